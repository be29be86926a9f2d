#include "vsgae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace vsgae {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.provenance = provenance;
  out.seed = seed;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

double synth_accuracy(const CellGraph& g) {
  if (!is_valid(g)) throw std::invalid_argument("synth_accuracy needs a valid graph");
  int c3 = 0, c1 = 0, mp = 0;
  for (NodeType t : g.labels()) {
    if (t == NodeType::Conv3x3) ++c3;
    if (t == NodeType::Conv1x1) ++c1;
    if (t == NodeType::MaxPool3x3) ++mp;
  }
  const double arg = 1.5 + 0.5 * c3 + 0.2 * c1 - 0.6 * mp + 0.15 * longest_path(g) -
                     0.05 * static_cast<double>(g.num_edges());
  return 0.999 / (1.0 + std::exp(-arg));
}

void sort_by_hash(std::vector<ArchRecord>& records) {
  struct Keyed {
    GraphDigest iso;
    GraphDigest plain;
    std::size_t index;
  };
  std::vector<Keyed> keys;
  keys.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    keys.push_back({graph_hash(records[i].graph, true), graph_hash(records[i].graph, false), i});
  std::sort(keys.begin(), keys.end(), [&](const Keyed& a, const Keyed& b) {
    if (a.iso != b.iso) return a.iso < b.iso;
    if (a.plain != b.plain) return a.plain < b.plain;
    const auto& ga = records[a.index].graph;
    const auto& gb = records[b.index].graph;
    if (ga.labels() != gb.labels()) return ga.labels() < gb.labels();
    return ga.edges() < gb.edges();
  });
  std::vector<ArchRecord> sorted;
  sorted.reserve(records.size());
  for (const auto& k : keys) sorted.push_back(std::move(records[k.index]));
  records = std::move(sorted);
}

Dataset make_dataset(const SearchSpaceLimits& limits, const DatasetParams& params,
                     std::uint64_t seed) {
  limits.check();
  const int upto = params.mode == DatasetParams::Mode::EnumerateUpToN ? params.max_n : limits.max_nodes;
  if (upto < 2 || upto > limits.max_nodes)
    throw std::invalid_argument("max_n must lie in [2, limits.max_nodes]");

  std::vector<CellGraph> graphs;
  for (int n = 2; n <= upto; ++n) {
    auto level = enumerate_valid(n, limits, params.dedup);
    graphs.insert(graphs.end(), std::make_move_iterator(level.begin()),
                  std::make_move_iterator(level.end()));
  }

  if (params.mode == DatasetParams::Mode::SampleK) {
    if (params.k == 0 || params.k > graphs.size())
      throw std::invalid_argument("sample size k=" + std::to_string(params.k) +
                                  " exceeds the search space of " + std::to_string(graphs.size()));
    Rng rng(seed);
    std::vector<CellGraph> picked;
    picked.reserve(params.k);
    std::sample(graphs.begin(), graphs.end(), std::back_inserter(picked), params.k, rng);
    graphs = std::move(picked);
  }
  if (graphs.empty()) throw std::runtime_error("dataset would be empty");

  Dataset ds;
  ds.provenance = Provenance::Synthetic;
  ds.seed = seed;
  ds.records.reserve(graphs.size());
  for (auto& g : graphs) {
    const double acc = synth_accuracy(g);
    ds.records.push_back({std::move(g), acc});
  }
  sort_by_hash(ds.records);
  return ds;
}

void SplitSpec::check() const {
  if (!(train > 0 && test > 0 && validation > 0))
    throw std::invalid_argument("split ratios must be positive");
  if (std::abs(train + test + validation - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0)) throw std::invalid_argument("apportion needs a positive weight sum");
  std::vector<double> remainders(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    const double base = std::floor(exact + 1e-9);
    counts[i] = static_cast<std::size_t>(base);
    remainders[i] = exact - base;
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b] + 1e-12; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++counts[order[i]];
    ++assigned;
  }
  return counts;
}

Split split(const Dataset& ds, const SplitSpec& spec) {
  spec.check();
  if (ds.empty()) throw std::invalid_argument("cannot split an empty dataset");
  const std::array<double, 3> ratios{spec.train, spec.test, spec.validation};
  Rng rng(spec.seed);
  Split out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.test, &out.validation};

  auto deal = [&](std::vector<std::size_t> pool) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto counts = apportion(pool.size(), ratios);
    std::size_t at = 0;
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t c = 0; c < counts[p]; ++c) parts[p]->push_back(pool[at++]);
  };

  if (spec.method == SplitMethod::Random) {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    deal(std::move(all));
  } else {
    std::map<int, std::vector<std::size_t>> by_size;
    for (std::size_t i = 0; i < ds.size(); ++i) by_size[ds.records[i].graph.size()].push_back(i);
    for (auto& [n, members] : by_size) deal(std::move(members));
  }
  if (out.train.empty() || out.test.empty() || out.validation.empty())
    throw std::invalid_argument("dataset of " + std::to_string(ds.size()) +
                                " records is too small for the requested split");
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  Dataset ds;
  ds.provenance = Provenance::Loaded;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    GraphRecord rec;
    try {
      rec = deserialize(line);
    } catch (const ParseError& e) {
      throw ParseError(e.field(), where + ": " + e.what());
    }
    if (!rec.accuracy) throw ParseError("acc", where + ": accuracy is required");
    if (!(*rec.accuracy >= 0.0 && *rec.accuracy <= 1.0))
      throw ParseError("acc", where + ": accuracy outside [0,1]");
    if (!is_valid(rec.graph)) throw std::runtime_error(where + ": graph fails validation");
    ds.records.push_back({std::move(rec.graph), *rec.accuracy});
  }
  if (in.bad()) throw std::runtime_error("read error on " + path.string());
  if (ds.records.empty()) throw std::runtime_error("dataset " + path.string() + " has no records");
  return ds;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::vector<ArchRecord> records = ds.records;
  sort_by_hash(records);
  std::ostringstream out;
  for (const auto& r : records) out << serialize(r.graph, r.accuracy) << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace vsgae
