// Trainable parameter registry, layer primitives and the Adam optimizer.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vsgae/tensor.hpp"

namespace vsgae::nn {

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step = 0;
};

/// Named parameters in registration order, each with its Adam state.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor param;
    AdamState adam;
  };

  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  /// Registers a leaf tensor that requires gradients; names must be unique.
  Tensor add(const std::string& name, Matrix init);

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Allocates zero gradients for every parameter.
  void zero_grad();

  using Snapshot = std::vector<Matrix>;
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct OptimConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double plateau_factor = 0.1;
  int plateau_patience = 10;

  void check() const;
};

/// Bias-corrected Adam update on every parameter, then clears the gradients.
/// Throws std::logic_error if a parameter has no gradient.
void adam_step(ParamStore& store, const OptimConfig& cfg);

/// Multiplies the learning rate by `factor` once `patience` consecutive epochs
/// pass without the monitored loss improving.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}
  /// Returns true if the learning rate was reduced.
  bool step(double loss, double& learning_rate);

  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  void restore(double best, int bad_epochs) {
    best_ = best;
    bad_epochs_ = bad_epochs;
  }

 private:
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

// Weight init: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);
Matrix normal_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  Eigen::Index in_features() const { return weight.rows(); }
  Eigen::Index out_features() const { return weight.cols(); }
};
Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                   Rng& rng);

struct GruCell {
  Tensor w_ih, w_hh, b_ih, b_hh;

  Tensor operator()(const Tensor& x, const Tensor& h) const {
    return gru_cell(x, h, w_ih, w_hh, b_ih, b_hh);
  }
};
GruCell make_gru(ParamStore& store, const std::string& name, Eigen::Index input, Eigen::Index hidden,
                 Rng& rng);

enum class Activation { ReLU, Tanh, Sigmoid, Identity };
Tensor activate(const Tensor& x, Activation a);

/// Linear layers with `hidden` activations in between; the last layer is
/// linear unless linear_output is false.
struct Mlp {
  std::vector<Linear> layers;
  Activation hidden = Activation::ReLU;
  bool linear_output = true;

  Tensor operator()(const Tensor& x) const;
};
Mlp make_mlp(ParamStore& store, const std::string& name, const std::vector<Eigen::Index>& sizes,
             Rng& rng, Activation hidden = Activation::ReLU, bool linear_output = true);

}  // namespace vsgae::nn
