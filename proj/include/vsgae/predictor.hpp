// Accuracy prediction from graph embeddings, trained jointly with the encoder.
#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vsgae/dataset.hpp"
#include "vsgae/encoder.hpp"
#include "json.hpp"
#include "vsgae/params.hpp"

namespace vsgae {

/// d_g -> 28 -> 14 -> 7 -> 1 with ReLU between layers, linear output.
inline constexpr std::array<int, 3> kPredictorHidden{28, 14, 7};

struct PredTrainConfig {
  double learning_rate = 1e-5;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void check() const;
};

/// Non-variational encoder plus regression head in one parameter store.
class PredictorModel {
 public:
  PredictorModel(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  const EncoderParams& encoder() const { return encoder_; }
  const nn::Mlp& head() const { return head_; }

  nn::Tensor forward(const CellGraph& g) const;
  double predict(const CellGraph& g) const;
  std::vector<double> predict(const Dataset& ds, std::span<const std::size_t> indices) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;

 private:
  EncoderConfig config_;
  std::uint64_t seed_;
  nn::ParamStore store_;
  EncoderParams encoder_;
  nn::Mlp head_;
};

/// Regression head applied to a 1 x d_g embedding; unbounded output.
nn::Tensor predict(const nn::Tensor& embedding, const nn::Mlp& head);

double rmse(std::span<const double> predictions, std::span<const double> truth);

struct PredEpoch {
  int epoch = 0;
  double train_rmse = 0.0;
  double val_rmse = 0.0;
};

struct PredictorResult {
  std::vector<PredEpoch> log;
  int best_epoch = 0;
  double best_val_rmse = 0.0;
  double test_rmse = 0.0;
};

/// Minimizes MSE on split.train and keeps the parameters of the epoch with the
/// lowest validation RMSE; the model ends up holding those parameters.
PredictorResult train_joint(PredictorModel& model, const Dataset& ds, const Split& split,
                            const PredTrainConfig& cfg);

struct ZeroShotSpec {
  int holdout_nodes = 7;
  double validation_fraction = 0.1;  // carved out of the training sizes
};

/// Trains on every node count except the held-out one and tests on it.
PredictorResult zero_shot(PredictorModel& model, const Dataset& ds, const ZeroShotSpec& spec,
                          const PredTrainConfig& cfg);
Split zero_shot_split(const Dataset& ds, const ZeroShotSpec& spec, std::uint64_t seed);

/// CSV with header epoch,train_rmse,val_rmse.
std::string predictor_log_csv(std::span<const PredEpoch> log);

}  // namespace vsgae
