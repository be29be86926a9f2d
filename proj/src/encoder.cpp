#include "vsgae/encoder.hpp"

#include <stdexcept>

namespace vsgae {

using nn::Tensor;

void EncoderConfig::check() const {
  if (node_dim < 1 || graph_dim < 1) throw std::invalid_argument("encoder dimensions must be positive");
  if (rounds < 1) throw std::invalid_argument("encoder needs at least one propagation round");
}

namespace {

GatedAggregation make_aggregation(nn::ParamStore& store, const std::string& name, int dn, int dg,
                                  nn::Rng& rng) {
  return {nn::make_linear(store, name + ".project", dn, dg, rng),
          nn::make_linear(store, name + ".gate", dn, 1, rng)};
}

}  // namespace

EncoderParams make_encoder(nn::ParamStore& store, const std::string& prefix,
                           const EncoderConfig& cfg, nn::Rng& rng) {
  cfg.check();
  const int dn = cfg.node_dim;
  EncoderParams p;
  p.config = cfg;
  p.lookup = store.add(prefix + ".lookup", nn::normal_init(static_cast<Eigen::Index>(kNumNodeTypes), dn, rng));
  for (int t = 0; t < cfg.rounds; ++t) {
    const std::string r = prefix + ".round" + std::to_string(t);
    p.rounds.push_back({nn::make_linear(store, r + ".message", 2 * dn, 2 * dn, rng),
                        nn::make_linear(store, r + ".reverse_message", 2 * dn, 2 * dn, rng),
                        nn::make_gru(store, r + ".update", 2 * dn, dn, rng)});
  }
  p.mean = make_aggregation(store, prefix + ".aggregate", dn, cfg.graph_dim, rng);
  if (cfg.variational)
    p.logvar = make_aggregation(store, prefix + ".aggregate_var", dn, cfg.graph_dim, rng);
  return p;
}

namespace {

Tensor lookup_rows(const std::vector<NodeType>& labels, const Tensor& lookup) {
  std::vector<int> rows;
  rows.reserve(labels.size());
  for (NodeType t : labels) rows.push_back(static_cast<int>(type_index(t)));
  return nn::gather_rows(lookup, rows);
}

std::vector<Edge> edges_of(const PermutedGraph& g) {
  const auto n = static_cast<int>(g.labels.size());
  if (g.adjacency.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
    throw std::invalid_argument("permuted graph: adjacency size differs from n*n");
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (g.adjacency[static_cast<std::size_t>(u * n + v)]) edges.push_back({u, v});
  return edges;
}

Tensor propagate_edges(const Tensor& h, const std::vector<Edge>& edges, const PropagationRound& round) {
  const Eigen::Index n = h.rows();
  const Eigen::Index width = round.message.out_features();
  Tensor messages;
  if (edges.empty()) {
    messages = Tensor::zeros(n, width);
  } else {
    std::vector<int> src, dst;
    for (const Edge& e : edges) {
      src.push_back(e.from);
      dst.push_back(e.to);
    }
    const Tensor h_src = nn::gather_rows(h, src);
    const Tensor h_dst = nn::gather_rows(h, dst);
    // Incoming: target v = dst receives M([h_v, h_u]) from u = src.
    const Tensor incoming = nn::scatter_add_rows(round.message(nn::hcat({h_dst, h_src})), dst, n);
    // Outgoing: source v = src receives M_out([h_v, h_u]) from u = dst.
    const Tensor outgoing =
        nn::scatter_add_rows(round.reverse_message(nn::hcat({h_src, h_dst})), src, n);
    messages = nn::add(incoming, outgoing);
  }
  return round.update(messages, h);
}

}  // namespace

Tensor init_embeddings(const CellGraph& g, const Tensor& lookup) { return lookup_rows(g.labels(), lookup); }

Tensor propagate_round(const Tensor& h, const CellGraph& g, const PropagationRound& round) {
  if (h.rows() != g.size())
    throw std::invalid_argument("propagate_round: embedding rows differ from node count");
  return propagate_edges(h, g.edges(), round);
}

Tensor propagate(const Tensor& h, const CellGraph& g, const EncoderParams& params) {
  Tensor out = h;
  for (const auto& round : params.rounds) out = propagate_round(out, g, round);
  return out;
}

Tensor aggregate(const Tensor& h, const GatedAggregation& agg) {
  const Tensor projected = agg.project(h);
  const Tensor gates = nn::sigmoid(agg.gate(h));
  return nn::sum_rows(nn::scale_rows(projected, gates));
}

GraphEmbedding aggregate(const Tensor& h, const GatedAggregation& mean, const GatedAggregation* logvar) {
  GraphEmbedding e;
  e.mean = aggregate(h, mean);
  if (logvar) e.logvar = aggregate(h, *logvar);
  return e;
}

GraphEmbedding encode(const CellGraph& g, const EncoderParams& params) {
  const Tensor h = propagate(init_embeddings(g, params.lookup), g, params);
  return aggregate(h, params.mean, params.logvar ? &*params.logvar : nullptr);
}

}  // namespace vsgae

namespace vsgae {

GraphEmbedding encode(const PermutedGraph& g, const EncoderParams& params) {
  const std::vector<Edge> edges = edges_of(g);
  Tensor h = lookup_rows(g.labels, params.lookup);
  for (const auto& round : params.rounds) h = propagate_edges(h, edges, round);
  return aggregate(h, params.mean, params.logvar ? &*params.logvar : nullptr);
}

}  // namespace vsgae
