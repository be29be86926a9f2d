#include "vsgae/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vsgae/checkpoint.hpp"

namespace vsgae {

using nn::Tensor;

void PredTrainConfig::check() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch size must be positive");
}

PredictorModel::PredictorModel(const EncoderConfig& cfg, std::uint64_t seed) : config_(cfg), seed_(seed) {
  config_.variational = false;
  config_.check();
  nn::Rng rng(seed);
  encoder_ = make_encoder(store_, "encoder", config_, rng);
  std::vector<Eigen::Index> sizes{config_.graph_dim};
  for (int h : kPredictorHidden) sizes.push_back(h);
  sizes.push_back(1);
  head_ = nn::make_mlp(store_, "predictor", sizes, rng);
}

Tensor predict(const Tensor& embedding, const nn::Mlp& head) { return head(embedding); }

Tensor PredictorModel::forward(const CellGraph& g) const {
  return vsgae::predict(encode(g, encoder_).mean, head_);
}

double PredictorModel::predict(const CellGraph& g) const {
  nn::NoGradGuard no_grad;
  return forward(g).item();
}

std::vector<double> PredictorModel::predict(const Dataset& ds, std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(predict(ds.records.at(i).graph));
  return out;
}

void PredictorModel::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["model"] = "predictor";
  meta["seed"] = seed_;
  meta["encoder"] = {{"node_dim", config_.node_dim},
                     {"graph_dim", config_.graph_dim},
                     {"rounds", config_.rounds},
                     {"variational", false}};
  nn::save_checkpoint(path, store_, meta);
}

double rmse(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predictions[i] - truth[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

namespace {

double evaluate_rmse(const PredictorModel& model, const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<double> truth;
  truth.reserve(idx.size());
  for (std::size_t i : idx) truth.push_back(ds.records.at(i).accuracy);
  return rmse(model.predict(ds, idx), truth);
}

}  // namespace

PredictorResult train_joint(PredictorModel& model, const Dataset& ds, const Split& split,
                            const PredTrainConfig& cfg) {
  cfg.check();
  if (split.train.empty() || split.validation.empty() || split.test.empty())
    throw std::invalid_argument("train_joint: every split part must be non-empty");

  PredictorResult result;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  nn::ParamStore::Snapshot best = model.store().snapshot();
  nn::OptimConfig opt;
  opt.learning_rate = cfg.learning_rate;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = split.train;
    std::shuffle(order.begin(), order.end(), rng);

    double squared = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(stop - start);
      model.store().zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const ArchRecord& r = ds.records[order[i]];
        const Tensor err = nn::add_scalar(model.forward(r.graph), -r.accuracy);
        const Tensor loss = nn::square(err);
        if (!std::isfinite(loss.item()))
          throw std::runtime_error("non-finite predictor loss at epoch " + std::to_string(epoch) +
                                   " on record " + std::to_string(order[i]));
        squared += loss.item();
        nn::scale(loss, weight).backward();
      }
      nn::adam_step(model.store(), opt);
    }

    PredEpoch entry;
    entry.epoch = epoch + 1;
    entry.train_rmse = std::sqrt(squared / static_cast<double>(order.size()));
    entry.val_rmse = evaluate_rmse(model, ds, split.validation);
    result.log.push_back(entry);
    if (entry.val_rmse < result.best_val_rmse) {
      result.best_val_rmse = entry.val_rmse;
      result.best_epoch = entry.epoch;
      best = model.store().snapshot();
    }
  }
  model.store().restore(best);
  result.test_rmse = evaluate_rmse(model, ds, split.test);
  return result;
}

Split zero_shot_split(const Dataset& ds, const ZeroShotSpec& spec, std::uint64_t seed) {
  Split s;
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.records[i].graph.size() == spec.holdout_nodes) s.test.push_back(i);
    else seen.push_back(i);
  }
  if (s.test.empty())
    throw std::invalid_argument("zero_shot: no graphs with " + std::to_string(spec.holdout_nodes) + " nodes");
  if (seen.size() < 2) throw std::invalid_argument("zero_shot: held-out size covers the whole dataset");
  if (!(spec.validation_fraction > 0 && spec.validation_fraction < 1))
    throw std::invalid_argument("zero_shot: validation fraction must lie in (0,1)");
  Rng rng(seed);
  std::shuffle(seen.begin(), seen.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(seen.size()))), 1,
      seen.size() - 1);
  s.validation.assign(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(seen.begin() + static_cast<std::ptrdiff_t>(n_val), seen.end());
  return s;
}

PredictorResult zero_shot(PredictorModel& model, const Dataset& ds, const ZeroShotSpec& spec,
                          const PredTrainConfig& cfg) {
  return train_joint(model, ds, zero_shot_split(ds, spec, mix_seed(cfg.seed, 0x5a)), cfg);
}

std::string predictor_log_csv(std::span<const PredEpoch> log) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_rmse,val_rmse\n";
  for (const auto& e : log) out << e.epoch << ',' << e.train_rmse << ',' << e.val_rmse << '\n';
  return out.str();
}

}  // namespace vsgae
