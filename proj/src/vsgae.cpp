#include "vsgae/vsgae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vsgae/checkpoint.hpp"

namespace vsgae {

using nn::Tensor;

DecoderParams make_decoder(nn::ParamStore& store, const std::string& prefix, int node_dim,
                           int graph_dim, nn::Rng& rng) {
  const Eigen::Index dn = node_dim;
  const Eigen::Index dg = graph_dim;
  DecoderParams p;
  p.node_dim = node_dim;
  p.graph_dim = graph_dim;
  p.lookup = store.add(prefix + ".lookup", nn::normal_init(static_cast<Eigen::Index>(kNumNodeTypes), dn, rng));
  p.graph_prop = make_encoder(store, prefix + ".graph_prop",
                              EncoderConfig{node_dim, graph_dim, 2, false}, rng);
  p.add_node = nn::make_mlp(store, prefix + ".add_node", {2 * dg, dg, static_cast<Eigen::Index>(kNumNodeTypes)}, rng);
  p.init_node = nn::make_mlp(store, prefix + ".init_node", {2 * dg + dn, dg + dn, dn}, rng);
  p.start_node = nn::make_mlp(store, prefix + ".start_node", {dg + dn, dg + dn, dn}, rng);
  p.add_edges = nn::make_mlp(store, prefix + ".add_edges", {2 * dg + 2 * dn, dg + dn, 1}, rng);
  return p;
}

namespace {

Tensor type_embedding(NodeType t, const DecoderParams& p) {
  const int row = static_cast<int>(type_index(t));
  return nn::gather_rows(p.lookup, std::span<const int>(&row, 1));
}

void require_row(const Tensor& t, Eigen::Index width, const char* what) {
  if (t.rows() != 1 || t.cols() != width)
    throw std::invalid_argument(std::string(what) + ": expected a 1 x " + std::to_string(width) + " row");
}

}  // namespace

PropagatedGraph graph_prop(const Tensor& h, const CellGraph& partial, const DecoderParams& p) {
  if (h.rows() != partial.size() || h.rows() < 1)
    throw std::invalid_argument("graph_prop: embedding rows differ from partial graph size");
  PropagatedGraph out;
  out.nodes = propagate(h, partial, p.graph_prop);
  out.summary = aggregate(out.nodes, p.graph_prop.mean);
  return out;
}

Tensor add_node(const Tensor& z, const Tensor& summary, const DecoderParams& p) {
  require_row(z, p.graph_dim, "add_node z");
  require_row(summary, p.graph_dim, "add_node summary");
  return p.add_node(nn::hcat({z, summary}));
}

Tensor init_node(const Tensor& z, const Tensor& summary, NodeType type, const DecoderParams& p) {
  require_row(z, p.graph_dim, "init_node z");
  require_row(summary, p.graph_dim, "init_node summary");
  return p.init_node(nn::hcat({z, summary, type_embedding(type, p)}));
}

Tensor start_node(const Tensor& z, const DecoderParams& p, NodeType type) {
  require_row(z, p.graph_dim, "start_node z");
  return p.start_node(nn::hcat({z, type_embedding(type, p)}));
}

Tensor add_edges(const Tensor& h_new, const Tensor& h_prop, const Tensor& z, const Tensor& summary,
                 const DecoderParams& p) {
  if (h_prop.rows() < 1) throw std::invalid_argument("add_edges: no previous nodes");
  require_row(h_new, p.node_dim, "add_edges h_new");
  require_row(z, p.graph_dim, "add_edges z");
  require_row(summary, p.graph_dim, "add_edges summary");
  const Eigen::Index t = h_prop.rows();
  return p.add_edges(nn::hcat({nn::repeat_rows(h_new, t), h_prop, nn::repeat_rows(z, t),
                               nn::repeat_rows(summary, t)}));
}

Decoded decode(const Tensor& z, const DecoderParams& p, Rng& rng, int max_gen_nodes, DecodeMode mode) {
  require_row(z, p.graph_dim, "decode z");
  if (!z.value().allFinite()) throw std::invalid_argument("decode: latent point is not finite");
  if (max_gen_nodes < 2) throw std::invalid_argument("decode: max_gen_nodes must be at least 2");
  nn::NoGradGuard no_grad;

  std::vector<NodeType> labels{NodeType::Input};
  std::vector<Edge> edges;
  Tensor h = start_node(z, p);
  Decoded out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  while (static_cast<int>(labels.size()) < max_gen_nodes) {
    const CellGraph partial(labels, edges);
    const PropagatedGraph prop = graph_prop(h, partial, p);
    const Tensor logits = add_node(z, prop.summary, p);

    GenerationStep step;
    for (std::size_t c = 0; c < kNumNodeTypes; ++c) step.logits[c] = logits.value()(0, static_cast<Eigen::Index>(c));
    std::array<double, kNumNodeTypes> masked = step.logits;
    masked[type_index(NodeType::Input)] = -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(masked.begin(), masked.end());
    std::size_t choice = 0;
    if (mode == DecodeMode::Argmax) {
      choice = static_cast<std::size_t>(std::max_element(masked.begin(), masked.end()) - masked.begin());
    } else {
      std::array<double, kNumNodeTypes> w{};
      for (std::size_t c = 0; c < kNumNodeTypes; ++c) w[c] = std::exp(masked[c] - top);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      choice = pick(rng);
    }
    step.type = node_type_from_index(choice);

    const Tensor h_new = init_node(z, prop.summary, step.type, p);
    const Tensor scores = add_edges(h_new, prop.nodes, z, prop.summary, p);
    const int new_index = static_cast<int>(labels.size());
    for (Eigen::Index v = 0; v < scores.rows(); ++v) {
      const double s = scores.value()(v, 0);
      step.edge_scores.push_back(s);
      const double prob = 1.0 / (1.0 + std::exp(-s));
      const bool take = mode == DecodeMode::Argmax ? prob > 0.5 : unit(rng) < prob;
      if (take) {
        step.sources.push_back(static_cast<int>(v));
        edges.push_back({static_cast<int>(v), new_index});
      }
    }
    labels.push_back(step.type);
    h = nn::vstack({prop.nodes, h_new});
    out.trace.push_back(std::move(step));
    if (labels.back() == NodeType::Output) break;
  }
  out.graph = CellGraph(std::move(labels), std::move(edges));
  return out;
}

ReconstructionLoss teacher_forced_loss(const CellGraph& g, const Tensor& z, const DecoderParams& p) {
  if (g.size() < 2 || g.label(0) != NodeType::Input)
    throw std::invalid_argument("teacher_forced_loss: graph must start with its Input node");
  require_row(z, p.graph_dim, "teacher_forced_loss z");
  ReconstructionLoss out;
  Tensor h = start_node(z, p);
  std::vector<Tensor> node_terms, edge_terms;
  for (int t = 1; t < g.size(); ++t) {
    const PropagatedGraph prop = graph_prop(h, g.prefix(t), p);
    const Tensor logits = add_node(z, prop.summary, p);
    const int target = static_cast<int>(type_index(g.label(t)));
    node_terms.push_back(nn::cross_entropy_logits(logits, std::span<const int>(&target, 1)));
    ++out.add_node_events;

    const Tensor h_new = init_node(z, prop.summary, g.label(t), p);
    const Tensor scores = add_edges(h_new, prop.nodes, z, prop.summary, p);
    std::vector<double> truth(static_cast<std::size_t>(t));
    for (int v = 0; v < t; ++v) truth[static_cast<std::size_t>(v)] = g.has_edge(v, t) ? 1.0 : 0.0;
    edge_terms.push_back(nn::bce_logits(scores, truth));
    out.edge_candidates += t;

    h = nn::vstack({prop.nodes, h_new});
  }
  out.node_loss = nn::sum(nn::vstack(node_terms));
  out.edge_loss = nn::sum(nn::vstack(edge_terms));
  return out;
}

LossBreakdown LossTerms::values() const {
  return {node.item(), edge.item(), kl.item(), total.item()};
}

namespace {

LossTerms assemble_loss(const CellGraph& g, const GraphEmbedding& e, const Tensor& z,
                        const DecoderParams& dec, double alpha) {
  const ReconstructionLoss rec = teacher_forced_loss(g, z, dec);
  LossTerms out;
  out.node = rec.node_loss;
  out.edge = rec.edge_loss;
  out.kl = nn::kl_divergence(e.mean, *e.logvar);
  out.total = nn::add(nn::add(out.node, out.edge), nn::scale(out.kl, alpha));
  return out;
}

const GraphEmbedding& require_variational(const GraphEmbedding& e) {
  if (!e.logvar) throw std::invalid_argument("vsgae_loss needs a variational encoder");
  return e;
}

}  // namespace

LossTerms vsgae_loss(const CellGraph& g, const EncoderParams& enc, const DecoderParams& dec,
                     double alpha, Rng& rng) {
  const GraphEmbedding e = encode(g, enc);
  require_variational(e);
  const Tensor z = nn::reparameterize(e.mean, *e.logvar, rng);
  return assemble_loss(g, e, z, dec, alpha);
}

LossTerms vsgae_loss(const CellGraph& g, const EncoderParams& enc, const DecoderParams& dec,
                     double alpha, const nn::Matrix& eps) {
  const GraphEmbedding e = encode(g, enc);
  require_variational(e);
  const Tensor z = nn::reparameterize(e.mean, *e.logvar, eps);
  return assemble_loss(g, e, z, dec, alpha);
}

void TrainConfig::check() const {
  if (!(alpha >= 0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs < 1 || batch_size < 1 || plateau_patience < 1 || checkpoint_every < 1)
    throw std::invalid_argument("epochs, batch size, patience and checkpoint interval must be positive");
  if (!(plateau_factor > 0 && plateau_factor <= 1))
    throw std::invalid_argument("plateau factor must lie in (0,1]");
}

VsgaeModel::VsgaeModel(const EncoderConfig& cfg, std::uint64_t seed) : config_(cfg), seed_(seed) {
  config_.variational = true;
  config_.check();
  nn::Rng rng(seed);
  encoder_ = make_encoder(store_, "encoder", config_, rng);
  decoder_ = make_decoder(store_, "decoder", config_.node_dim, config_.graph_dim, rng);
}

std::vector<double> VsgaeModel::sample_posterior(const CellGraph& g, Rng& rng) const {
  nn::NoGradGuard no_grad;
  const GraphEmbedding e = encode(g, encoder_);
  const Tensor z = nn::reparameterize(e.mean, *e.logvar, rng);
  return {z.value().data(), z.value().data() + z.value().size()};
}

CellGraph VsgaeModel::decode_latent(std::span<const double> z, Rng& rng) const {
  if (static_cast<int>(z.size()) != config_.graph_dim)
    throw std::invalid_argument("latent vector has the wrong dimension");
  return decode(Tensor::row(z), decoder_, rng, max_gen_nodes, decode_mode).graph;
}

std::vector<double> VsgaeModel::embed(const CellGraph& g) const {
  nn::NoGradGuard no_grad;
  const Tensor m = encode(g, encoder_).mean;
  return {m.value().data(), m.value().data() + m.value().size()};
}

void VsgaeModel::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["model"] = "vsgae";
  meta["seed"] = seed_;
  meta["encoder"] = {{"node_dim", config_.node_dim},
                     {"graph_dim", config_.graph_dim},
                     {"rounds", config_.rounds},
                     {"variational", config_.variational}};
  nn::save_checkpoint(path, store_, meta);
}

std::unique_ptr<VsgaeModel> VsgaeModel::load(const std::filesystem::path& path) {
  const nlohmann::json meta = nn::read_checkpoint_meta(path);
  if (meta.value("model", std::string{}) != "vsgae")
    throw std::runtime_error(path.string() + " is not a VS-GAE checkpoint");
  const auto& e = meta.at("encoder");
  EncoderConfig cfg{e.at("node_dim").get<int>(), e.at("graph_dim").get<int>(),
                    e.at("rounds").get<int>(), true};
  auto model = std::make_unique<VsgaeModel>(cfg, meta.value("seed", std::uint64_t{0}));
  nn::load_checkpoint(path, model->store_);
  return model;
}

namespace {

nlohmann::json log_to_json(std::span<const EpochLoss> log) {
  auto arr = nlohmann::json::array();
  for (const auto& e : log)
    arr.push_back({e.epoch, e.loss.node, e.loss.edge, e.loss.kl, e.loss.total, e.learning_rate});
  return arr;
}

std::vector<EpochLoss> log_from_json(const nlohmann::json& arr) {
  std::vector<EpochLoss> log;
  for (const auto& r : arr)
    log.push_back({r.at(0).get<int>(),
                   {r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>(), r.at(4).get<double>()},
                   r.at(5).get<double>()});
  return log;
}

nlohmann::json train_config_json(const TrainConfig& cfg) {
  return {{"alpha", cfg.alpha},           {"learning_rate", cfg.learning_rate},
          {"epochs", cfg.epochs},         {"plateau_patience", cfg.plateau_patience},
          {"plateau_factor", cfg.plateau_factor}, {"batch_size", cfg.batch_size},
          {"seed", cfg.seed}};
}

}  // namespace

std::vector<EpochLoss> train_vsgae(VsgaeModel& model, const Dataset& ds, const TrainConfig& cfg,
                                   const EpochCallback& on_epoch) {
  cfg.check();
  if (ds.empty()) throw std::invalid_argument("train_vsgae: empty dataset");

  double lr = cfg.learning_rate;
  nn::PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience);
  std::vector<EpochLoss> log;
  int start_epoch = 0;
  const std::string digest = dataset_digest(ds);

  if (cfg.resume && cfg.checkpoint && std::filesystem::exists(*cfg.checkpoint)) {
    const nlohmann::json meta = nn::load_checkpoint(*cfg.checkpoint, model.store());
    if (meta.value("dataset_digest", std::string{}) != digest)
      throw std::runtime_error("checkpoint was trained on a different dataset");
    start_epoch = meta.at("epoch").get<int>();
    lr = meta.at("lr").get<double>();
    scheduler.restore(meta.at("scheduler").at(0).get<double>(), meta.at("scheduler").at(1).get<int>());
    log = log_from_json(meta.at("log"));
  }

  auto write_checkpoint = [&](int epochs_done) {
    if (!cfg.checkpoint) return;
    nlohmann::json meta;
    meta["train"] = train_config_json(cfg);
    meta["dataset_digest"] = digest;
    meta["epoch"] = epochs_done;
    meta["lr"] = lr;
    const double best = scheduler.best();
    meta["scheduler"] = {std::isfinite(best) ? best : std::numeric_limits<double>::max(),
                         scheduler.bad_epochs()};
    meta["log"] = log_to_json(log);
    model.save(*cfg.checkpoint, meta);
  };

  const auto n = ds.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown sums;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double weight = 1.0 / static_cast<double>(stop - start);
      model.store().zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const CellGraph& g = ds.records[order[i]].graph;
        const LossTerms terms = vsgae_loss(g, model.encoder(), model.decoder(), cfg.alpha, rng);
        const LossBreakdown v = terms.values();
        if (!std::isfinite(v.total)) {
          std::ostringstream msg;
          msg << "non-finite VS-GAE loss at epoch " << epoch << " on record " << order[i]
              << " (L_V=" << v.node << ", L_E=" << v.edge << ", D_KL=" << v.kl << ")";
          throw std::runtime_error(msg.str());
        }
        nn::scale(terms.total, weight).backward();
        sums.node += v.node;
        sums.edge += v.edge;
        sums.kl += v.kl;
        sums.total += v.total;
      }
      nn::OptimConfig opt;
      opt.learning_rate = lr;
      nn::adam_step(model.store(), opt);
    }

    const double inv = 1.0 / static_cast<double>(n);
    EpochLoss entry{epoch + 1, {sums.node * inv, sums.edge * inv, sums.kl * inv, sums.total * inv}, lr};
    log.push_back(entry);
    scheduler.step(entry.loss.total, lr);
    if (on_epoch) on_epoch(entry);
    if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs) write_checkpoint(epoch + 1);
  }
  return log;
}

std::string loss_log_csv(std::span<const EpochLoss> log) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,L_V,L_E,D_KL,total,lr\n";
  for (const auto& e : log)
    out << e.epoch << ',' << e.loss.node << ',' << e.loss.edge << ',' << e.loss.kl << ','
        << e.loss.total << ',' << e.learning_rate << '\n';
  return out.str();
}

std::string dataset_digest(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : ds.records) {
    h = mix_seed(h, graph_hash(r.graph, false).value);
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(r.accuracy));
    std::memcpy(&bits, &r.accuracy, sizeof(bits));
    h = mix_seed(h, bits);
  }
  return GraphDigest{h}.hex();
}

}  // namespace vsgae
