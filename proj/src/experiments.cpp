#include "vsgae/experiments.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vsgae/sampling.hpp"

namespace vsgae {

ReconstructionReport eval_reconstruction(const GraphAutoencoder& model, std::span<const CellGraph> graphs,
                                         std::uint64_t seed, int z_samples, int decodes) {
  if (graphs.empty()) throw std::invalid_argument("eval_reconstruction: empty test set");
  if (z_samples < 1 || decodes < 1) throw std::invalid_argument("eval_reconstruction: counts must be positive");
  Rng rng(seed);
  ReconstructionReport r;
  r.graphs = graphs.size();
  double acc = 0.0;
  for (const CellGraph& g : graphs) {
    std::size_t hits = 0;
    for (int s = 0; s < z_samples; ++s) {
      const std::vector<double> z = model.sample_posterior(g, rng);
      for (int d = 0; d < decodes; ++d)
        if (model.decode_latent(z, rng) == g) ++hits;
    }
    const auto n = static_cast<std::size_t>(z_samples) * static_cast<std::size_t>(decodes);
    r.decodes += n;
    r.exact += hits;
    acc += static_cast<double>(hits) / static_cast<double>(n);
  }
  r.accuracy = acc / static_cast<double>(graphs.size());
  return r;
}

PriorValidityReport eval_prior_validity(const GraphAutoencoder& model, std::uint64_t seed, int latents,
                                        int decodes) {
  if (latents < 1 || decodes < 1) throw std::invalid_argument("eval_prior_validity: counts must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PriorValidityReport r;
  std::vector<double> z(static_cast<std::size_t>(model.latent_dim()));
  for (int i = 0; i < latents; ++i) {
    for (double& v : z) v = normal(rng);
    for (int d = 0; d < decodes; ++d) {
      ++r.decodes;
      if (is_valid(model.decode_latent(z, rng))) ++r.valid;
    }
  }
  r.validity = static_cast<double>(r.valid) / static_cast<double>(r.decodes);
  return r;
}

std::string metric_rows_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out.precision(10);
  out << "experiment,method,fraction,seed,metric,value\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.method << ',' << r.fraction << ',' << r.seed << ',' << r.metric << ','
        << r.value << '\n';
  return out.str();
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

void StabilityConfig::check() const {
  if (methods.empty() || fractions.empty() || seeds.empty())
    throw std::invalid_argument("stability: methods, fractions and seeds must be non-empty");
  for (const auto& m : methods)
    if (std::find(kSamplingMethods.begin(), kSamplingMethods.end(), m) == kSamplingMethods.end())
      throw std::invalid_argument("stability: unknown sampling method '" + m + "'");
  for (double f : fractions)
    if (!(f > 0 && f <= 1)) throw std::invalid_argument("stability: fractions must lie in (0,1]");
  split.check();
  train.check();
}

nlohmann::ordered_json StabilityResult::summary() const {
  nlohmann::ordered_json j;
  j["cells"] = rows.size();
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  for (const auto& s : spread)
    methods.push_back({{"method", s.method},
                       {"across_fraction_std", s.across_fraction_std},
                       {"overall_std", s.overall_std},
                       {"mean_test_rmse", s.mean_rmse}});
  j["methods"] = methods;
  return j;
}

StabilityResult run_sampling_stability(const Dataset& ds, const VsgaeModel& embedder,
                                       const StabilityConfig& cfg, const CellCallback& on_cell) {
  cfg.check();
  const Split base = split(ds, cfg.split);
  const std::size_t n_train = base.train.size();
  const Dataset train_ds = ds.subset(base.train);

  Eigen::MatrixXd reduced;
  if (std::find(cfg.methods.begin(), cfg.methods.end(), "latent") != cfg.methods.end()) {
    Eigen::MatrixXd means(static_cast<Eigen::Index>(n_train), embedder.latent_dim());
    for (std::size_t i = 0; i < n_train; ++i) {
      const auto e = embedder.embed(train_ds.records[i].graph);
      means.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(e.data(), embedder.latent_dim());
    }
    const PcaModel pca = fit_pca(means);
    reduced = reduce(pca, means, std::min<Eigen::Index>(cfg.pca_dims, pca.components.rows()));
  }

  StabilityResult result;
  std::map<std::string, std::map<std::uint64_t, std::vector<double>>> by_method;
  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    const double fraction = cfg.fractions[fi];
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_train)));
    if (k == 0)
      throw std::invalid_argument("stability: fraction " + std::to_string(fraction) + " leaves no training graphs");
    for (std::uint64_t seed : cfg.seeds) {
      const std::uint64_t cell_seed = mix_seed(seed, fi);
      for (const auto& method : cfg.methods) {
        SampleResult s;
        if (method == "uniform") s = sample_uniform_per_size(train_ds, k, cell_seed);
        else if (method == "edit") s = sample_edit_uniform(train_ds, k, cell_seed);
        else s = latent_bin_sample(reduced, k, cell_seed);

        Split cell = base;
        cell.train.clear();
        for (std::size_t i : s.indices) cell.train.push_back(base.train[i]);
        PredTrainConfig tc = cfg.train;
        tc.seed = cell_seed;
        PredictorModel model(cfg.predictor_encoder, cell_seed);
        const PredictorResult r = train_joint(model, ds, cell, tc);

        MetricRow row{"sampling-stability", method, fraction, seed, "test_rmse", r.test_rmse};
        result.rows.push_back(row);
        by_method[method][seed].push_back(r.test_rmse);
        if (on_cell) on_cell(row);
      }
    }
  }

  for (const auto& method : cfg.methods) {
    MethodSpread sp;
    sp.method = method;
    std::vector<double> all;
    for (std::uint64_t seed : cfg.seeds) {
      const auto& v = by_method[method][seed];
      sp.across_fraction_std += sample_std(v) / static_cast<double>(cfg.seeds.size());
      all.insert(all.end(), v.begin(), v.end());
    }
    sp.overall_std = sample_std(all);
    sp.mean_rmse = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    result.spread.push_back(sp);
  }
  return result;
}

}  // namespace vsgae
