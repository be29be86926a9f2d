#include "vsgae/params.hpp"

#include <cmath>
#include <stdexcept>

namespace vsgae::nn {

Tensor ParamStore::add(const std::string& name, Matrix init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  Tensor t(std::move(init), true);
  index_.emplace(name, entries_.size());
  AdamState st;
  st.first_moment = Matrix::Zero(t.rows(), t.cols());
  st.second_moment = Matrix::Zero(t.rows(), t.cols());
  entries_.push_back({name, t, std::move(st)});
  return t;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[it->second].param;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.param.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.param.zero_grad();
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  s.reserve(entries_.size());
  for (const auto& e : entries_) s.push_back(e.param.value());
  return s;
}

void ParamStore::restore(const Snapshot& s) {
  if (s.size() != entries_.size()) throw std::invalid_argument("snapshot does not match store");
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto& v = entries_[i].param.mutable_value();
    if (v.rows() != s[i].rows() || v.cols() != s[i].cols())
      throw std::invalid_argument("snapshot shape mismatch for '" + entries_[i].name + "'");
    v = s[i];
  }
}

void OptimConfig::check() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
    throw std::invalid_argument("Adam betas must lie in (0,1)");
  if (!(epsilon > 0)) throw std::invalid_argument("Adam epsilon must be positive");
}

void adam_step(ParamStore& store, const OptimConfig& cfg) {
  for (auto& e : store.entries())
    if (!e.param.has_grad()) throw std::logic_error("missing gradient for parameter '" + e.name + "'");

  for (auto& e : store.entries()) {
    AdamState& st = e.adam;
    const Matrix& g = e.param.grad();
    ++st.step;
    st.first_moment = cfg.beta1 * st.first_moment + (1.0 - cfg.beta1) * g;
    st.second_moment = cfg.beta2 * st.second_moment + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    const auto m_hat = st.first_moment.array() / c1;
    const auto v_hat = st.second_moment.array() / c2;
    e.param.mutable_value().array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    e.param.clear_grad();
  }
}

bool PlateauScheduler::step(double loss, double& learning_rate) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ < patience_) return false;
  learning_rate *= factor_;
  bad_epochs_ = 0;
  return true;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear make_linear(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                   Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = store.add(name + ".weight", uniform_init(in, out, bound, rng));
  l.bias = store.add(name + ".bias", uniform_init(1, out, bound, rng));
  return l;
}

GruCell make_gru(ParamStore& store, const std::string& name, Eigen::Index input,
                 Eigen::Index hidden, Rng& rng) {
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(input));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruCell g;
  g.w_ih = store.add(name + ".w_ih", uniform_init(input, 3 * hidden, in_bound, rng));
  g.w_hh = store.add(name + ".w_hh", uniform_init(hidden, 3 * hidden, hid_bound, rng));
  g.b_ih = store.add(name + ".b_ih", uniform_init(1, 3 * hidden, hid_bound, rng));
  g.b_hh = store.add(name + ".b_hh", uniform_init(1, 3 * hidden, hid_bound, rng));
  return g;
}

Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::ReLU: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
  }
  return x;
}

Tensor Mlp::operator()(const Tensor& x) const {
  if (layers.empty()) throw std::logic_error("empty MLP");
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size() || !linear_output) h = activate(h, hidden);
  }
  return h;
}

Mlp make_mlp(ParamStore& store, const std::string& name, const std::vector<Eigen::Index>& sizes,
             Rng& rng, Activation hidden, bool linear_output) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  Mlp m;
  m.hidden = hidden;
  m.linear_output = linear_output;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
    m.layers.push_back(make_linear(store, name + "." + std::to_string(i), sizes[i], sizes[i + 1], rng));
  return m;
}

}  // namespace vsgae::nn
