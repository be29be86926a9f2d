// Evaluation protocols for trained models and the down-sampling stability study.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsgae/dataset.hpp"
#include "vsgae/predictor.hpp"
#include "vsgae/vsgae.hpp"

namespace vsgae {

struct ReconstructionReport {
  double accuracy = 0.0;
  std::size_t graphs = 0;
  std::size_t decodes = 0;
  std::size_t exact = 0;
};

/// Per graph: z_samples posterior draws, each decoded `decodes` times; a decode
/// counts when it equals the input exactly (labels and edges in order).
ReconstructionReport eval_reconstruction(const GraphAutoencoder& model, std::span<const CellGraph> graphs,
                                         std::uint64_t seed, int z_samples = 10, int decodes = 10);

struct PriorValidityReport {
  double validity = 0.0;
  std::size_t decodes = 0;
  std::size_t valid = 0;
};

/// latents draws from N(0, I), each decoded `decodes` times.
PriorValidityReport eval_prior_validity(const GraphAutoencoder& model, std::uint64_t seed,
                                        int latents = 1000, int decodes = 10);

struct MetricRow {
  std::string experiment;
  std::string method;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

/// CSV with header experiment,method,fraction,seed,metric,value.
std::string metric_rows_csv(std::span<const MetricRow> rows);

inline const std::vector<double> kDefaultFractions{0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9};
inline const std::vector<std::string> kSamplingMethods{"uniform", "edit", "latent"};

struct StabilityConfig {
  std::vector<std::string> methods = kSamplingMethods;
  std::vector<double> fractions = kDefaultFractions;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  SplitSpec split;
  EncoderConfig predictor_encoder{32, 16, 2, false};
  PredTrainConfig train;  // its seed is replaced per cell
  int pca_dims = 4;

  void check() const;
};

struct MethodSpread {
  std::string method;
  double across_fraction_std = 0.0;  // per-seed std over fractions, averaged over seeds
  double overall_std = 0.0;          // std over every (fraction, seed) cell
  double mean_rmse = 0.0;
};

struct StabilityResult {
  std::vector<MetricRow> rows;
  std::vector<MethodSpread> spread;
  nlohmann::ordered_json summary() const;
};

using CellCallback = std::function<void(const MetricRow&)>;

/// Down-samples only the training part of the split, trains a fresh joint
/// predictor per (method, fraction, seed) and records its test RMSE. The
/// latent method bins the PCA-reduced posterior means of `embedder`.
StabilityResult run_sampling_stability(const Dataset& ds, const VsgaeModel& embedder,
                                       const StabilityConfig& cfg, const CellCallback& on_cell = {});

/// Sample standard deviation (divisor n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

}  // namespace vsgae
