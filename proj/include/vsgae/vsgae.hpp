// Variational-sequential graph autoencoder: sequential decoder, losses and
// the unsupervised training loop.
#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "vsgae/dataset.hpp"
#include "vsgae/encoder.hpp"
#include "vsgae/params.hpp"

namespace vsgae {

/// What the evaluation protocols need from a generative model: a posterior
/// sample for a graph and a stochastic decoder.
class GraphAutoencoder {
 public:
  virtual ~GraphAutoencoder() = default;
  virtual int latent_dim() const = 0;
  virtual std::vector<double> sample_posterior(const CellGraph& g, Rng& rng) const = 0;
  virtual CellGraph decode_latent(std::span<const double> z, Rng& rng) const = 0;
};

struct DecoderParams {
  int node_dim = 0;
  int graph_dim = 0;
  nn::Tensor lookup;        // 5 x d_n, independent of the encoder's table
  EncoderParams graph_prop;  // two rounds, mean-only aggregation
  nn::Mlp add_node;         // 2d_g -> d_g -> 5
  nn::Mlp init_node;        // 2d_g + d_n -> d_g + d_n -> d_n
  nn::Mlp start_node;       // d_g + d_n -> d_g + d_n -> d_n
  nn::Mlp add_edges;        // 2d_g + 2d_n -> d_g + d_n -> 1
};

DecoderParams make_decoder(nn::ParamStore& store, const std::string& prefix, int node_dim,
                           int graph_dim, nn::Rng& rng);

struct PropagatedGraph {
  nn::Tensor summary;  // 1 x d_g
  nn::Tensor nodes;    // t x d_n
};

PropagatedGraph graph_prop(const nn::Tensor& h, const CellGraph& partial, const DecoderParams& p);
/// Raw logits (1 x 5) over node types.
nn::Tensor add_node(const nn::Tensor& z, const nn::Tensor& summary, const DecoderParams& p);
nn::Tensor init_node(const nn::Tensor& z, const nn::Tensor& summary, NodeType type,
                     const DecoderParams& p);
nn::Tensor start_node(const nn::Tensor& z, const DecoderParams& p, NodeType type = NodeType::Input);
/// One score per previous node (t x 1); sigmoid(score) is the probability of
/// the edge from that node to the new one.
nn::Tensor add_edges(const nn::Tensor& h_new, const nn::Tensor& h_prop, const nn::Tensor& z,
                     const nn::Tensor& summary, const DecoderParams& p);

struct GenerationStep {
  std::array<double, kNumNodeTypes> logits{};
  NodeType type = NodeType::Output;
  std::vector<double> edge_scores;
  std::vector<int> sources;  // chosen predecessors of the new node
};
using GenerationTrace = std::vector<GenerationStep>;

enum class DecodeMode { Sample, Argmax };

struct Decoded {
  CellGraph graph;
  GenerationTrace trace;
};

/// Grows a graph from the Input node until an Output node is added or the
/// graph reaches max_gen_nodes. Input is masked out of AddNode.
Decoded decode(const nn::Tensor& z, const DecoderParams& p, Rng& rng, int max_gen_nodes = 7,
               DecodeMode mode = DecodeMode::Sample);

struct ReconstructionLoss {
  nn::Tensor node_loss;  // summed cross-entropy of AddNode
  nn::Tensor edge_loss;  // summed binary cross-entropy of AddEdges
  int add_node_events = 0;
  int edge_candidates = 0;
};

/// Teacher-forced reconstruction loss of g (canonical order) given z.
ReconstructionLoss teacher_forced_loss(const CellGraph& g, const nn::Tensor& z,
                                       const DecoderParams& p);

struct LossBreakdown {
  double node = 0.0;
  double edge = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct LossTerms {
  nn::Tensor node, edge, kl, total;
  LossBreakdown values() const;
};

/// total = L_V + L_E + alpha * D_KL with z drawn by reparameterization.
LossTerms vsgae_loss(const CellGraph& g, const EncoderParams& enc, const DecoderParams& dec,
                     double alpha, Rng& rng);
/// Same with fixed reparameterization noise.
LossTerms vsgae_loss(const CellGraph& g, const EncoderParams& enc, const DecoderParams& dec,
                     double alpha, const nn::Matrix& eps);

struct TrainConfig {
  double alpha = 0.005;
  double learning_rate = 1e-4;
  int epochs = 300;
  int plateau_patience = 10;
  double plateau_factor = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> checkpoint;  // written every checkpoint_every epochs and at the end
  int checkpoint_every = 10;
  bool resume = false;  // continue from `checkpoint` if it exists

  void check() const;
};

struct EpochLoss {
  int epoch = 0;
  LossBreakdown loss;  // means over the epoch's graphs
  double learning_rate = 0.0;
};

class VsgaeModel : public GraphAutoencoder {
 public:
  VsgaeModel(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  const EncoderParams& encoder() const { return encoder_; }
  const DecoderParams& decoder() const { return decoder_; }

  int latent_dim() const override { return config_.graph_dim; }
  std::vector<double> sample_posterior(const CellGraph& g, Rng& rng) const override;
  CellGraph decode_latent(std::span<const double> z, Rng& rng) const override;

  /// Posterior mean (the encoder's h_G).
  std::vector<double> embed(const CellGraph& g) const;

  int max_gen_nodes = 7;
  DecodeMode decode_mode = DecodeMode::Sample;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static std::unique_ptr<VsgaeModel> load(const std::filesystem::path& path);

 private:
  EncoderConfig config_;
  std::uint64_t seed_;
  nn::ParamStore store_;
  EncoderParams encoder_;
  DecoderParams decoder_;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batched Adam on the mean per-graph loss with plateau decay.
std::vector<EpochLoss> train_vsgae(VsgaeModel& model, const Dataset& ds, const TrainConfig& cfg,
                                   const EpochCallback& on_epoch = {});

/// CSV with header epoch,L_V,L_E,D_KL,total,lr.
std::string loss_log_csv(std::span<const EpochLoss> log);

/// Digest over the dataset's graph hashes and labels (order-sensitive).
std::string dataset_digest(const Dataset& ds);

}  // namespace vsgae
