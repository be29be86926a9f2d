#include "vsgae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace vsgae::nn {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op,
          "shape mismatch " + dims(a.value()) + " vs " + dims(b.value()));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) grad = g;
  else grad += g;
}

Tensor make_result(Matrix value, std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  Tensor out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(inputs.size());
  for (auto& t : inputs) out.node_->parents.push_back(t.node());
  out.node_->backward = std::move(backward);
  return out;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::row(std::span<const double> values, bool requires_grad) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

std::vector<std::size_t> Tensor::shape() const {
  if (rows() == 1) return {static_cast<std::size_t>(cols())};
  return {static_cast<std::size_t>(rows()), static_cast<std::size_t>(cols())};
}

double Tensor::item() const {
  if (node_->value.size() != 1) throw std::invalid_argument("item() needs a single-element tensor");
  return node_->value(0, 0);
}

void Tensor::zero_grad() { node_->grad = Matrix::Zero(rows(), cols()); }

Tensor Tensor::detach() const { return Tensor(node_->value, false); }

void Tensor::backward() const {
  if (node_->value.size() != 1) throw std::invalid_argument("backward() needs a scalar tensor");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && p->backward && seen.insert(p).second) stack.push_back({p, 0});
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }

  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
  // Interior gradients are no longer needed once propagated.
  for (Node* n : order)
    if (n != node_.get()) n->grad.resize(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(-self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) x.accumulate(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(self.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, double factor) {
  return make_result(a.value() * factor, {a},
                     [factor](Node& self) { parent(self, 0).accumulate(self.grad * factor); });
}

Tensor add_scalar(const Tensor& a, double c) {
  return make_result(a.value().array() + c, {a},
                     [](Node& self) { parent(self, 0).accumulate(self.grad); });
}

Tensor square(const Tensor& a) {
  return make_result(a.value().array().square().matrix(), {a}, [](Node& self) {
    Node& x = parent(self, 0);
    x.accumulate(2.0 * self.grad.cwiseProduct(x.value));
  });
}

Tensor exp(const Tensor& a) {
  return make_result(a.value().array().exp().matrix(), {a}, [](Node& self) {
    parent(self, 0).accumulate(self.grad.cwiseProduct(self.value));
  });
}

Tensor sigmoid(const Tensor& a) {
  return make_result(a.value().unaryExpr(&stable_sigmoid), {a}, [](Node& self) {
    const auto& y = self.value.array();
    parent(self, 0).accumulate((self.grad.array() * y * (1.0 - y)).matrix());
  });
}

Tensor tanh(const Tensor& a) {
  return make_result(a.value().array().tanh().matrix(), {a}, [](Node& self) {
    const auto& y = self.value.array();
    parent(self, 0).accumulate((self.grad.array() * (1.0 - y.square())).matrix());
  });
}

Tensor relu(const Tensor& a) {
  return make_result(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    Node& x = parent(self, 0);
    x.accumulate((x.value.array() > 0.0).select(self.grad, 0.0));
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp", "empty interval");
  return make_result(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [lo, hi](Node& self) {
    Node& x = parent(self, 0);
    x.accumulate(((x.value.array() >= lo) && (x.value.array() <= hi)).select(self.grad, 0.0));
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul",
          "inner dimension mismatch " + dims(a.value()) + " * " + dims(b.value()));
  return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) x.accumulate(self.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * self.grad);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.cols() == w.rows(), "linear",
          "input width " + std::to_string(x.cols()) + " vs weight " + dims(w.value()));
  require(b.rows() == 1 && b.cols() == w.cols(), "linear", "bias shape " + dims(b.value()));
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return make_result(std::move(out), {x, w, b}, [](Node& self) {
    Node& xn = parent(self, 0);
    Node& wn = parent(self, 1);
    Node& bn = parent(self, 2);
    if (xn.requires_grad) xn.accumulate(self.grad * wn.value.transpose());
    if (wn.requires_grad) wn.accumulate(xn.value.transpose() * self.grad);
    if (bn.requires_grad) bn.accumulate(self.grad.colwise().sum());
  });
}

Tensor hcat(std::span<const Tensor> parts) {
  require(!parts.empty(), "hcat", "no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "hcat", "row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [offsets](Node& self) {
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         Node& p = parent(self, i);
                         if (p.requires_grad)
                           p.accumulate(self.grad.middleCols(offsets[i], p.value.cols()));
                       }
                     });
}

Tensor hcat(std::initializer_list<Tensor> parts) {
  return hcat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor vstack(std::span<const Tensor> parts) {
  require(!parts.empty(), "vstack", "no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "vstack", "column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    at += p.rows();
  }
  return make_result(std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [offsets](Node& self) {
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         Node& p = parent(self, i);
                         if (p.requires_grad)
                           p.accumulate(self.grad.middleRows(offsets[i], p.value.rows()));
                       }
                     });
}

Tensor vstack(std::initializer_list<Tensor> parts) {
  return vstack(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor gather_rows(const Tensor& a, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "gather_rows", "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    p.accumulate(g);
  });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const int> index, Eigen::Index rows) {
  require(static_cast<Eigen::Index>(index.size()) == a.rows(), "scatter_add_rows",
          "index length differs from row count");
  Matrix out = Matrix::Zero(rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < rows, "scatter_add_rows", "row index out of range");
    out.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Node& p = parent(self, 0);
    Matrix g(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = self.grad.row(idx[i]);
    p.accumulate(g);
  });
}

Tensor repeat_rows(const Tensor& a, Eigen::Index n) {
  require(a.rows() == 1, "repeat_rows", "expected a single row");
  require(n >= 1, "repeat_rows", "repeat count must be positive");
  Matrix out = a.value().replicate(n, 1);
  return make_result(std::move(out), {a},
                     [](Node& self) { parent(self, 0).accumulate(self.grad.colwise().sum()); });
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  require(s.cols() == 1 && s.rows() == a.rows(), "scale_rows", "scale must be n x 1");
  Matrix out = a.value().array().colwise() * s.value().col(0).array();
  return make_result(std::move(out), {a, s}, [](Node& self) {
    Node& an = parent(self, 0);
    Node& sn = parent(self, 1);
    if (an.requires_grad)
      an.accumulate((self.grad.array().colwise() * sn.value.col(0).array()).matrix());
    if (sn.requires_grad) sn.accumulate(self.grad.cwiseProduct(an.value).rowwise().sum());
  });
}

Tensor sum_rows(const Tensor& a) {
  return make_result(a.value().colwise().sum(), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(self.grad.replicate(p.value.rows(), 1));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Matrix::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor softmax(const Tensor& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    const Matrix& y = self.value;
    Matrix g(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = self.grad.row(r).dot(y.row(r));
      g.row(r) = y.row(r).cwiseProduct((self.grad.row(r).array() - dot).matrix());
    }
    parent(self, 0).accumulate(g);
  });
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy_logits",
          "one target per row required");
  Matrix probs(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require(t >= 0 && t < logits.cols(), "cross_entropy_logits", "target class out of range");
    const double m = logits.value().row(r).maxCoeff();
    const auto shifted = (logits.value().row(r).array() - m).eval();
    const double lse = std::log(shifted.exp().sum());
    loss += lse - shifted(t);
    probs.row(r) = (shifted - lse).exp().matrix();
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(Matrix::Constant(1, 1, loss), {logits},
                     [probs = std::move(probs), tgt = std::move(tgt)](Node& self) {
                       Matrix g = probs;
                       for (std::size_t r = 0; r < tgt.size(); ++r) g(static_cast<Eigen::Index>(r), tgt[r]) -= 1.0;
                       parent(self, 0).accumulate(g * self.grad(0, 0));
                     });
}

Tensor bce_logits(const Tensor& scores, std::span<const double> targets) {
  require(scores.cols() == 1 && static_cast<Eigen::Index>(targets.size()) == scores.rows(),
          "bce_logits", "scores must be n x 1 with one target each");
  double loss = 0.0;
  Matrix g(scores.rows(), 1);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double s = scores.value()(r, 0);
    const double y = targets[static_cast<std::size_t>(r)];
    loss += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
    g(r, 0) = stable_sigmoid(s) - y;
  }
  return make_result(Matrix::Constant(1, 1, loss), {scores}, [g = std::move(g)](Node& self) {
    parent(self, 0).accumulate(g * self.grad(0, 0));
  });
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const Tensor& w_ih, const Tensor& w_hh,
                const Tensor& b_ih, const Tensor& b_hh) {
  const Eigen::Index hid = h.cols();
  require(x.rows() == h.rows(), "gru_cell", "batch mismatch between input and hidden state");
  require(w_ih.rows() == x.cols() && w_ih.cols() == 3 * hid, "gru_cell", "w_ih shape " + dims(w_ih.value()));
  require(w_hh.rows() == hid && w_hh.cols() == 3 * hid, "gru_cell", "w_hh shape " + dims(w_hh.value()));
  require(b_ih.rows() == 1 && b_ih.cols() == 3 * hid, "gru_cell", "b_ih shape " + dims(b_ih.value()));
  require(b_hh.rows() == 1 && b_hh.cols() == 3 * hid, "gru_cell", "b_hh shape " + dims(b_hh.value()));

  Matrix gi = x.value() * w_ih.value();
  gi.rowwise() += b_ih.value().row(0);
  Matrix gh = h.value() * w_hh.value();
  gh.rowwise() += b_hh.value().row(0);

  const Matrix r = (gi.leftCols(hid) + gh.leftCols(hid)).unaryExpr(&stable_sigmoid);
  const Matrix z = (gi.middleCols(hid, hid) + gh.middleCols(hid, hid)).unaryExpr(&stable_sigmoid);
  const Matrix ghn = gh.rightCols(hid);
  const Matrix cand = (gi.rightCols(hid) + r.cwiseProduct(ghn)).array().tanh().matrix();
  Matrix out = (1.0 - z.array()).matrix().cwiseProduct(cand) + z.cwiseProduct(h.value());

  return make_result(std::move(out), {x, h, w_ih, w_hh, b_ih, b_hh},
                     [r, z, ghn, cand, hid](Node& self) {
                       Node& xn = parent(self, 0);
                       Node& hn = parent(self, 1);
                       Node& wih = parent(self, 2);
                       Node& whh = parent(self, 3);
                       Node& bih = parent(self, 4);
                       Node& bhh = parent(self, 5);
                       const Matrix& dout = self.grad;

                       const Matrix dcand = dout.cwiseProduct((1.0 - z.array()).matrix());
                       const Matrix dz = dout.cwiseProduct(hn.value - cand);
                       const Matrix dpre_n = dcand.cwiseProduct((1.0 - cand.array().square()).matrix());
                       const Matrix dr = dpre_n.cwiseProduct(ghn);
                       const Matrix dpre_r = dr.array() * r.array() * (1.0 - r.array());
                       const Matrix dpre_z = dz.array() * z.array() * (1.0 - z.array());

                       Matrix dgi(dout.rows(), 3 * hid);
                       dgi << dpre_r, dpre_z, dpre_n;
                       Matrix dgh(dout.rows(), 3 * hid);
                       dgh << dpre_r, dpre_z, dpre_n.cwiseProduct(r);

                       if (xn.requires_grad) xn.accumulate(dgi * wih.value.transpose());
                       if (hn.requires_grad)
                         hn.accumulate(dout.cwiseProduct(z) + dgh * whh.value.transpose());
                       if (wih.requires_grad) wih.accumulate(xn.value.transpose() * dgi);
                       if (whh.requires_grad) whh.accumulate(hn.value.transpose() * dgh);
                       if (bih.requires_grad) bih.accumulate(dgi.colwise().sum());
                       if (bhh.requires_grad) bhh.accumulate(dgh.colwise().sum());
                     });
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  require_same_shape(mu, logvar, "reparameterize");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
  return reparameterize(mu, logvar, eps);
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Matrix& eps) {
  require_same_shape(mu, logvar, "reparameterize");
  require(eps.rows() == mu.rows() && eps.cols() == mu.cols(), "reparameterize", "noise shape");
  const Tensor lv = clamp(logvar, kLogVarMin, kLogVarMax);
  const Tensor std = exp(scale(lv, 0.5));
  return add(mu, mul(std, Tensor(eps)));
}

Tensor kl_divergence(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu, logvar, "kl_divergence");
  const Matrix lv = logvar.value().cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  const Matrix var = lv.array().exp().matrix();
  const double kl =
      -0.5 * (1.0 + lv.array() - mu.value().array().square() - var.array()).sum();
  return make_result(Matrix::Constant(1, 1, kl), {mu, logvar}, [var](Node& self) {
    Node& m = parent(self, 0);
    Node& l = parent(self, 1);
    const double g = self.grad(0, 0);
    if (m.requires_grad) m.accumulate(m.value * g);
    if (l.requires_grad) {
      const Matrix inside =
          ((l.value.array() >= kLogVarMin) && (l.value.array() <= kLogVarMax)).cast<double>().matrix();
      l.accumulate((0.5 * (var.array() - 1.0) * inside.array() * g).matrix());
    }
  });
}

}  // namespace vsgae::nn
