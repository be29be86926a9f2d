// Training-set down-sampling: uniform per node count, edit-distance strata,
// and binning of a PCA-reduced latent space.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vsgae/dataset.hpp"

namespace vsgae {

struct SampleResult {
  std::vector<std::size_t> indices;  // ascending, distinct
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();

  std::size_t k() const { return indices.size(); }
  nlohmann::ordered_json to_json() const;
};

/// k split over node-count classes by largest remainder, uniform within each.
SampleResult sample_uniform_per_size(const Dataset& ds, std::size_t k, std::uint64_t seed);

/// Per node-count class: a random anchor graph partitions the class by edit
/// distance to it and the class quota is spread evenly over those strata.
SampleResult sample_edit_uniform(const Dataset& ds, std::size_t k, std::uint64_t seed);

/// Spreads `quota` as evenly as possible over bins of the given capacities;
/// leftover units go to randomly chosen bins that still have room.
std::vector<std::size_t> even_fill(std::size_t quota, const std::vector<std::size_t>& capacity, Rng& rng);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // one unit-norm component per row
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_variance_ratio;

  Eigen::Index dims() const { return components.cols(); }
};

/// Eigendecomposition of the sample covariance (divisor m - 1). Components
/// are sorted by variance, largest first, and oriented so that each one's
/// largest-magnitude entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& points);

/// Centered projection onto the first `dims` components.
Eigen::MatrixXd reduce(const PcaModel& model, const Eigen::MatrixXd& points, Eigen::Index dims = 4);

/// CSV with header component,eigenvalue,ratio,cumulative.
std::string pca_report_csv(const PcaModel& model);

/// B bins per dimension over the bounding box; the lattice is extended by one
/// bin so that any shift in [0,1) of a width still covers every point.
struct BinGrid {
  int bins = 1;
  Eigen::VectorXd origin;
  Eigen::VectorXd width;
  Eigen::VectorXd shift;  // fraction of a width per dimension

  Eigen::Index dims() const { return origin.size(); }
  std::vector<long> cell(const Eigen::Ref<const Eigen::RowVectorXd>& point) const;
  Eigen::RowVectorXd center(const std::vector<long>& cell) const;
};

BinGrid make_grid(const Eigen::MatrixXd& points, int bins, const Eigen::VectorXd& shift);
std::size_t count_nonempty(const BinGrid& grid, const Eigen::MatrixXd& points);

/// For every non-empty cell (in cell order) the point nearest its center;
/// ties go to the lower index.
std::vector<std::size_t> cell_representatives(const BinGrid& grid, const Eigen::MatrixXd& points);

struct Calibration {
  int bins = 1;
  std::size_t nonempty = 0;
  std::vector<std::size_t> trajectory;  // non-empty count for B = 1, 2, ...
};

/// Smallest B whose unshifted grid has at least k non-empty cells, or the
/// first B that isolates every distinct point when k exceeds their number.
/// Gives up at 65536 bins and returns that grid.
Calibration calibrate_bins(const Eigen::MatrixXd& points, std::size_t k);

/// One point nearest the center of each non-empty cell of a randomly shifted
/// grid, then trimmed or topped up at random to exactly k points.
SampleResult latent_bin_sample(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                               std::optional<int> bins = std::nullopt);

}  // namespace vsgae
