// Bidirectional message-passing graph encoder with gated aggregation.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsgae/graph.hpp"
#include "vsgae/params.hpp"

namespace vsgae {

struct EncoderConfig {
  int node_dim = 32;   // 250 at full scale
  int graph_dim = 16;  // 56 at full scale
  int rounds = 2;
  bool variational = true;

  void check() const;
};

/// One propagation round: forward and reverse message layers on
/// [h_v, h_u] (2d_n -> 2d_n) and a GRU update (input 2d_n, hidden d_n).
struct PropagationRound {
  nn::Linear message;
  nn::Linear reverse_message;
  nn::GruCell update;
};

/// sum_v project(h_v) * sigmoid(gate(h_v)).
struct GatedAggregation {
  nn::Linear project;  // d_n -> d_g
  nn::Linear gate;     // d_n -> 1
};

struct EncoderParams {
  EncoderConfig config;
  nn::Tensor lookup;  // 5 x d_n, one row per node type
  std::vector<PropagationRound> rounds;
  GatedAggregation mean;
  std::optional<GatedAggregation> logvar;
};

/// Registers every encoder parameter under `prefix` in `store`.
EncoderParams make_encoder(nn::ParamStore& store, const std::string& prefix,
                           const EncoderConfig& cfg, nn::Rng& rng);

struct GraphEmbedding {
  nn::Tensor mean;                   // 1 x d_g
  std::optional<nn::Tensor> logvar;  // 1 x d_g when variational
};

nn::Tensor init_embeddings(const CellGraph& g, const nn::Tensor& lookup);
nn::Tensor propagate_round(const nn::Tensor& h, const CellGraph& g, const PropagationRound& round);
/// All rounds in order.
nn::Tensor propagate(const nn::Tensor& h, const CellGraph& g, const EncoderParams& params);
nn::Tensor aggregate(const nn::Tensor& h, const GatedAggregation& agg);
GraphEmbedding aggregate(const nn::Tensor& h, const GatedAggregation& mean,
                         const GatedAggregation* logvar);

GraphEmbedding encode(const CellGraph& g, const EncoderParams& params);
/// Same computation on an arbitrary node order (e.g. an interior permutation).
GraphEmbedding encode(const PermutedGraph& g, const EncoderParams& params);

}  // namespace vsgae
