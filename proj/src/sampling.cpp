#include "vsgae/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vsgae {

nlohmann::ordered_json SampleResult::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["seed"] = seed;
  j["k"] = indices.size();
  j["indices"] = indices;
  j["diagnostics"] = diagnostics;
  return j;
}

namespace {

void check_k(std::size_t k, std::size_t available) {
  if (k < 1 || k > available)
    throw std::invalid_argument("sample size " + std::to_string(k) + " outside [1, " +
                                std::to_string(available) + "]");
}

std::map<int, std::vector<std::size_t>> size_classes(const Dataset& ds) {
  std::map<int, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < ds.size(); ++i) classes[ds.records[i].graph.size()].push_back(i);
  return classes;
}

std::vector<std::size_t> class_quotas(const std::map<int, std::vector<std::size_t>>& classes, std::size_t k) {
  std::vector<double> weights;
  for (const auto& [n, members] : classes) weights.push_back(static_cast<double>(members.size()));
  return apportion(k, weights);
}

void draw_into(std::vector<std::size_t> pool, std::size_t count, Rng& rng, std::vector<std::size_t>& out) {
  std::shuffle(pool.begin(), pool.end(), rng);
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
}

}  // namespace

SampleResult sample_uniform_per_size(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  check_k(k, ds.size());
  Rng rng(seed);
  const auto classes = size_classes(ds);
  const auto quotas = class_quotas(classes, k);
  SampleResult out;
  out.method = "uniform";
  out.seed = seed;
  std::size_t c = 0;
  nlohmann::ordered_json per_size = nlohmann::ordered_json::object();
  for (const auto& [n, members] : classes) {
    per_size[std::to_string(n)] = quotas[c];
    draw_into(members, quotas[c++], rng, out.indices);
  }
  std::sort(out.indices.begin(), out.indices.end());
  out.diagnostics["per_size"] = per_size;
  return out;
}

std::vector<std::size_t> even_fill(std::size_t quota, const std::vector<std::size_t>& capacity, Rng& rng) {
  const std::size_t total = std::accumulate(capacity.begin(), capacity.end(), std::size_t{0});
  if (quota > total) throw std::invalid_argument("even_fill: quota exceeds total capacity");
  std::vector<std::size_t> take(capacity.size(), 0);
  std::size_t left = quota;
  while (left > 0) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < capacity.size(); ++i)
      if (take[i] < capacity[i]) open.push_back(i);
    const std::size_t share = left / open.size();
    if (share == 0) {
      std::shuffle(open.begin(), open.end(), rng);
      for (std::size_t i = 0; i < left; ++i) ++take[open[i]];
      break;
    }
    for (std::size_t i : open) {
      const std::size_t add = std::min(share, capacity[i] - take[i]);
      take[i] += add;
      left -= add;
    }
  }
  return take;
}

SampleResult sample_edit_uniform(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  check_k(k, ds.size());
  Rng rng(seed);
  const auto classes = size_classes(ds);
  const auto quotas = class_quotas(classes, k);
  SampleResult out;
  out.method = "edit";
  out.seed = seed;
  nlohmann::ordered_json strata_info = nlohmann::ordered_json::object();
  std::size_t c = 0;
  for (const auto& [n, members] : classes) {
    const std::size_t quota = quotas[c++];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const std::size_t anchor = members[pick(rng)];
    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i : members)
      strata[edit_distance(ds.records[anchor].graph, ds.records[i].graph)].push_back(i);
    std::vector<std::size_t> capacity;
    for (const auto& [d, s] : strata) capacity.push_back(s.size());
    const auto take = even_fill(quota, capacity, rng);
    std::size_t s = 0;
    for (const auto& [d, stratum] : strata) draw_into(stratum, take[s++], rng, out.indices);
    strata_info[std::to_string(n)] = {{"anchor", anchor}, {"strata", strata.size()}, {"quota", quota}};
  }
  std::sort(out.indices.begin(), out.indices.end());
  out.diagnostics["classes"] = strata_info;
  return out;
}

PcaModel fit_pca(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) throw std::invalid_argument("fit_pca needs at least two points");
  if (points.cols() < 1) throw std::invalid_argument("fit_pca needs at least one dimension");
  if (!points.allFinite()) throw std::invalid_argument("fit_pca: non-finite input");
  PcaModel m;
  m.mean = points.colwise().mean().transpose();
  const Eigen::MatrixXd centered = points.rowwise() - m.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");
  const Eigen::Index d = cov.rows();
  m.components.resize(d, d);
  m.explained_variance.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;  // eigenvalues come ascending
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    m.components.row(i) = v.transpose();
    m.explained_variance(i) = std::max(0.0, solver.eigenvalues()(src));
  }
  const double total = m.explained_variance.sum();
  if (!(total > 0)) throw std::invalid_argument("fit_pca: points have zero variance");
  m.explained_variance_ratio = m.explained_variance / total;
  return m;
}

Eigen::MatrixXd reduce(const PcaModel& model, const Eigen::MatrixXd& points, Eigen::Index dims) {
  if (dims < 1 || dims > model.components.rows())
    throw std::invalid_argument("reduce: dims must lie in [1, " + std::to_string(model.components.rows()) + "]");
  if (points.cols() != model.mean.size()) throw std::invalid_argument("reduce: dimension mismatch");
  return (points.rowwise() - model.mean.transpose()) * model.components.topRows(dims).transpose();
}

std::string pca_report_csv(const PcaModel& model) {
  std::ostringstream out;
  out.precision(12);
  out << "component,eigenvalue,ratio,cumulative\n";
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < model.explained_variance.size(); ++i) {
    cumulative += model.explained_variance_ratio(i);
    out << i + 1 << ',' << model.explained_variance(i) << ',' << model.explained_variance_ratio(i) << ','
        << cumulative << '\n';
  }
  return out.str();
}

std::vector<long> BinGrid::cell(const Eigen::Ref<const Eigen::RowVectorXd>& point) const {
  std::vector<long> idx(static_cast<std::size_t>(dims()));
  for (Eigen::Index d = 0; d < dims(); ++d) {
    const double pos = std::floor((point(d) - origin(d)) / width(d));
    idx[static_cast<std::size_t>(d)] = std::clamp(static_cast<long>(pos), 0L, static_cast<long>(bins));
  }
  return idx;
}

Eigen::RowVectorXd BinGrid::center(const std::vector<long>& cell) const {
  Eigen::RowVectorXd c(dims());
  for (Eigen::Index d = 0; d < dims(); ++d)
    c(d) = origin(d) + (static_cast<double>(cell[static_cast<std::size_t>(d)]) + 0.5) * width(d);
  return c;
}

BinGrid make_grid(const Eigen::MatrixXd& points, int bins, const Eigen::VectorXd& shift) {
  if (bins < 1) throw std::invalid_argument("bin count must be positive");
  if (points.rows() < 1) throw std::invalid_argument("cannot grid an empty point set");
  if (shift.size() != points.cols()) throw std::invalid_argument("shift dimension mismatch");
  BinGrid g;
  g.bins = bins;
  g.shift = shift;
  const Eigen::VectorXd lo = points.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = points.colwise().maxCoeff().transpose();
  g.width = (hi - lo) / static_cast<double>(bins);
  for (Eigen::Index d = 0; d < g.width.size(); ++d)
    if (!(g.width(d) > 0)) g.width(d) = 1.0;
  g.origin = lo - shift.cwiseProduct(g.width);
  return g;
}

namespace {

std::map<std::vector<long>, std::vector<std::size_t>> bucket(const BinGrid& grid, const Eigen::MatrixXd& points) {
  std::map<std::vector<long>, std::vector<std::size_t>> cells;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    cells[grid.cell(points.row(i))].push_back(static_cast<std::size_t>(i));
  return cells;
}

// Points whose coordinates all agree within 1e-9 of that dimension's range
// count once, so rounding noise between equal embeddings is ignored.
std::size_t distinct_points(const Eigen::MatrixXd& points) {
  const Eigen::RowVectorXd tol =
      ((points.colwise().maxCoeff() - points.colwise().minCoeff()) * 1e-9).cwiseMax(1e-300);
  std::size_t distinct = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    bool seen = false;
    for (Eigen::Index j = 0; j < i && !seen; ++j)
      seen = ((points.row(i) - points.row(j)).cwiseAbs().array() <= tol.array()).all();
    if (!seen) ++distinct;
  }
  return distinct;
}

constexpr int kMaxBins = 1 << 16;

}  // namespace

std::size_t count_nonempty(const BinGrid& grid, const Eigen::MatrixXd& points) {
  return bucket(grid, points).size();
}

std::vector<std::size_t> cell_representatives(const BinGrid& grid, const Eigen::MatrixXd& points) {
  std::vector<std::size_t> chosen;
  for (const auto& [cell, members] : bucket(grid, points)) {
    const Eigen::RowVectorXd c = grid.center(cell);
    std::size_t best = members.front();
    double best_d = (points.row(static_cast<Eigen::Index>(best)) - c).squaredNorm();
    for (std::size_t i : members) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) - c).squaredNorm();
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

Calibration calibrate_bins(const Eigen::MatrixXd& points, std::size_t k) {
  if (k < 1 || k > static_cast<std::size_t>(points.rows()))
    throw std::invalid_argument("calibrate_bins: k outside [1, point count]");
  const std::size_t distinct = distinct_points(points);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(points.cols());
  Calibration c;
  for (int b = 1; b <= kMaxBins; ++b) {
    const std::size_t n = count_nonempty(make_grid(points, b, zero), points);
    c.trajectory.push_back(n);
    if (n >= k || n >= distinct) {
      c.bins = b;
      c.nonempty = n;
      return c;
    }
  }
  c.bins = kMaxBins;
  c.nonempty = c.trajectory.back();
  return c;
}

SampleResult latent_bin_sample(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                               std::optional<int> bins) {
  check_k(k, static_cast<std::size_t>(points.rows()));
  if (!points.allFinite()) throw std::invalid_argument("latent_bin_sample: non-finite input");
  Rng rng(seed);
  SampleResult out;
  out.method = "latent";
  out.seed = seed;

  const int b = bins ? *bins : calibrate_bins(points, k).bins;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd shift(points.cols());
  for (Eigen::Index d = 0; d < shift.size(); ++d) shift(d) = unit(rng);
  const BinGrid grid = make_grid(points, b, shift);
  auto cells = bucket(grid, points);

  std::vector<char> taken(static_cast<std::size_t>(points.rows()), 0);
  std::vector<std::size_t> chosen = cell_representatives(grid, points);
  for (std::size_t i : chosen) taken[i] = 1;
  out.diagnostics["bins_per_dim"] = b;
  out.diagnostics["nonempty_bins"] = cells.size();
  out.diagnostics["shift"] = std::vector<double>(shift.data(), shift.data() + shift.size());

  if (chosen.size() > k) {
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(k);
  }
  int refills = 0;
  while (chosen.size() < k) {
    std::vector<std::vector<std::size_t>> open;
    for (const auto& [cell, members] : cells) {
      std::vector<std::size_t> rest;
      for (std::size_t i : members)
        if (!taken[i]) rest.push_back(i);
      if (!rest.empty()) open.push_back(std::move(rest));
    }
    const std::size_t missing = k - chosen.size();
    std::vector<std::size_t> pick(open.size());
    std::iota(pick.begin(), pick.end(), 0);
    if (missing <= open.size()) {
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(missing);
      std::sort(pick.begin(), pick.end());
    }
    for (std::size_t c : pick) {
      std::uniform_int_distribution<std::size_t> any(0, open[c].size() - 1);
      const std::size_t i = open[c][any(rng)];
      chosen.push_back(i);
      taken[i] = 1;
    }
    ++refills;
  }
  out.diagnostics["refill_rounds"] = refills;
  std::sort(chosen.begin(), chosen.end());
  out.indices = std::move(chosen);
  return out;
}

}  // namespace vsgae
