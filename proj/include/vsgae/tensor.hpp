// Dense rank-1/rank-2 tensors with reverse-mode differentiation.
//
// A Tensor is a handle onto a node of a dynamically built tape. Every op
// records its parents and a backward closure when any input requires a
// gradient; Tensor::backward() walks the tape in reverse topological order.
// Vectors are stored as 1 x d rows.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace vsgae::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad = false);
  static Tensor row(std::span<const double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::size_t numel() const { return static_cast<std::size_t>(node_->value.size()); }
  std::vector<std::size_t> shape() const;

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;

  void zero_grad();
  void clear_grad() { node_->grad.resize(0, 0); }

  /// Seeds d(self)/d(self) = 1 and propagates. Requires a 1 x 1 tensor.
  void backward() const;

  /// Same storage, cut from the tape.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend Tensor make_result(Matrix, std::vector<Tensor>, std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Elementwise and structural ops. Shape errors throw std::invalid_argument.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor matmul(const Tensor& a, const Tensor& b);
/// x (n x in) * w (in x out) + b (1 x out), bias broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Column-wise concatenation of tensors with equal row counts.
Tensor hcat(std::span<const Tensor> parts);
Tensor hcat(std::initializer_list<Tensor> parts);
/// Row-wise concatenation of tensors with equal column counts.
Tensor vstack(std::span<const Tensor> parts);
Tensor vstack(std::initializer_list<Tensor> parts);

Tensor gather_rows(const Tensor& a, std::span<const int> index);
/// out[index[i]] += a[i]; out has `rows` rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const int> index, Eigen::Index rows);
/// Copies a 1 x d tensor into n identical rows.
Tensor repeat_rows(const Tensor& a, Eigen::Index n);
/// a (n x d) with row i scaled by s(i,0), s is n x 1.
Tensor scale_rows(const Tensor& a, const Tensor& s);

Tensor sum_rows(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& a);

/// Sum over rows of -log softmax(logits)[target].
Tensor cross_entropy_logits(const Tensor& logits, std::span<const int> targets);
/// Sum of binary cross-entropies between sigmoid(scores) and {0,1} targets,
/// in the log-sum-exp form. scores is n x 1.
Tensor bce_logits(const Tensor& scores, std::span<const double> targets);

/// Gated recurrent update. Weights are stored input-major:
/// w_ih (in x 3h), w_hh (h x 3h), biases 1 x 3h, gate blocks ordered r, z, n.
///   r = sig(x W_ir + b_ir + h W_hr + b_hr)
///   z = sig(x W_iz + b_iz + h W_hz + b_hz)
///   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
///   h' = (1 - z) * n + z * h
Tensor gru_cell(const Tensor& x, const Tensor& h, const Tensor& w_ih, const Tensor& w_hh,
                const Tensor& b_ih, const Tensor& b_hh);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// z = mu + exp(clamp(logvar)/2) * eps with eps ~ N(0,1).
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng);
/// Same with caller-supplied noise, which is treated as a constant.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Matrix& eps);

/// -1/2 * sum(1 + lv - mu^2 - exp(lv)) with lv = clamp(logvar, -10, 10).
Tensor kl_divergence(const Tensor& mu, const Tensor& logvar);

}  // namespace vsgae::nn
