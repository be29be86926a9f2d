// Labeled architecture datasets, the synthetic accuracy oracle and splits.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "vsgae/graph.hpp"

namespace vsgae {

using Rng = std::mt19937_64;

/// splitmix64 finalizer over a ^ golden-ratio-scrambled b; derives
/// independent child seeds (per epoch, per experiment cell).
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ArchRecord {
  CellGraph graph;
  double accuracy = 0.0;

  bool operator==(const ArchRecord&) const = default;
};

enum class Provenance { Synthetic, Loaded };

struct Dataset {
  std::vector<ArchRecord> records;
  Provenance provenance = Provenance::Synthetic;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  /// Sub-dataset holding the given records in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Deterministic stand-in for a validation accuracy:
///   0.999 * sigmoid(1.5 + 0.5*c3 + 0.2*c1 - 0.6*mp + 0.15*longest_path - 0.05*|E|)
/// Throws std::invalid_argument on an invalid graph.
double synth_accuracy(const CellGraph& g);

struct DatasetParams {
  enum class Mode { EnumerateUpToN, SampleK };
  Mode mode = Mode::EnumerateUpToN;
  int max_n = 4;       // EnumerateUpToN: include every size 2..max_n
  std::size_t k = 0;   // SampleK: number of graphs drawn from the full space
  bool dedup = false;  // keep one graph per isomorphism class
};

/// Records sorted by graph_hash; throws on an empty result or k larger than
/// the space.
Dataset make_dataset(const SearchSpaceLimits& limits, const DatasetParams& params,
                     std::uint64_t seed);

/// Sorts records by (isomorphism-invariant hash, plain hash, encoding).
void sort_by_hash(std::vector<ArchRecord>& records);

enum class SplitMethod { Random, SizeStratified };

struct SplitSpec {
  double train = 0.7;
  double test = 0.2;
  double validation = 0.1;
  SplitMethod method = SplitMethod::Random;
  std::uint64_t seed = 0;

  void check() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> validation;
};

Split split(const Dataset& ds, const SplitSpec& spec);

/// Largest-remainder apportionment of `total` proportional to `weights`.
/// Ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

Dataset load_dataset(const std::filesystem::path& path);
/// Writes JSONL sorted by graph_hash (atomic: temp file then rename).
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Writes `contents` to `path` via a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace vsgae
