#include "vsgae/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace vsgae {

namespace {

constexpr std::array<std::string_view, kNumNodeTypes> kOpNames{
    "input", "output", "conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3"};

std::vector<int> identity_permutation(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

// Advances the interior block p[1..n-2]; false once all have been visited.
bool next_interior_permutation(std::vector<int>& p) {
  if (p.size() <= 3) return false;
  return std::next_permutation(p.begin() + 1, p.end() - 1);
}

bool upper_triangular(const std::vector<std::uint8_t>& adj, int n) {
  for (int u = 0; u < n; ++u)
    for (int v = 0; v <= u; ++v)
      if (adj[static_cast<std::size_t>(u * n + v)]) return false;
  return true;
}

// Lexicographic comparison of (labels, adjacency) encodings.
std::strong_ordering compare_encoding(const std::vector<NodeType>& la,
                                      const std::vector<std::uint8_t>& aa,
                                      const std::vector<NodeType>& lb,
                                      const std::vector<std::uint8_t>& ab) {
  if (auto c = la <=> lb; c != 0) return c;
  return aa <=> ab;
}

}  // namespace

NodeType node_type_from_index(std::size_t i) {
  if (i >= kNumNodeTypes) throw std::out_of_range("node type index out of range");
  return static_cast<NodeType>(i);
}

std::string_view op_name(NodeType t) { return kOpNames[type_index(t)]; }

std::optional<NodeType> parse_op(std::string_view s) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == s) return static_cast<NodeType>(i);
  return std::nullopt;
}

void SearchSpaceLimits::check() const {
  if (max_nodes < 2 || max_edges < 1 || num_op_types < 1)
    throw std::invalid_argument("search space limits must be positive with max_nodes >= 2");
}

CellGraph::CellGraph(std::vector<NodeType> labels, std::vector<Edge> edges)
    : labels_(std::move(labels)), edges_(std::move(edges)) {
  if (labels_.empty()) throw std::invalid_argument("cell graph needs at least one node");
  const int n = size();
  for (const Edge& e : edges_) {
    if (e.from < 0 || e.to >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (e.from >= e.to)
      throw std::invalid_argument("edge (" + std::to_string(e.from) + "," +
                                  std::to_string(e.to) + ") is not upper-triangular");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool CellGraph::has_edge(int from, int to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

std::vector<int> CellGraph::predecessors(int v) const {
  std::vector<int> out;
  for (const Edge& e : edges_)
    if (e.to == v) out.push_back(e.from);
  return out;
}

std::vector<int> CellGraph::successors(int v) const {
  std::vector<int> out;
  for (const Edge& e : edges_)
    if (e.from == v) out.push_back(e.to);
  return out;
}

std::vector<std::uint8_t> CellGraph::adjacency() const {
  const auto n = static_cast<std::size_t>(size());
  std::vector<std::uint8_t> adj(n * n, 0);
  for (const Edge& e : edges_)
    adj[static_cast<std::size_t>(e.from) * n + static_cast<std::size_t>(e.to)] = 1;
  return adj;
}

CellGraph CellGraph::prefix(int count) const {
  if (count < 1 || count > size()) throw std::out_of_range("prefix length out of range");
  std::vector<NodeType> labels(labels_.begin(), labels_.begin() + count);
  std::vector<Edge> edges;
  for (const Edge& e : edges_)
    if (e.to < count) edges.push_back(e);
  return CellGraph(std::move(labels), std::move(edges));
}

ValidityReport validate(const CellGraph& g, const SearchSpaceLimits& limits) {
  ValidityReport r;
  const int n = g.size();
  const auto& labels = g.labels();
  r.single_input = std::count(labels.begin(), labels.end(), NodeType::Input) == 1;
  r.single_output = std::count(labels.begin(), labels.end(), NodeType::Output) == 1;

  std::vector<int> indeg(static_cast<std::size_t>(n), 0), outdeg(static_cast<std::size_t>(n), 0);
  for (const Edge& e : g.edges()) {
    ++indeg[static_cast<std::size_t>(e.to)];
    ++outdeg[static_cast<std::size_t>(e.from)];
  }
  for (int v = 0; v < n; ++v) {
    const auto i = static_cast<std::size_t>(v);
    if (labels[i] != NodeType::Input && indeg[i] == 0) r.missing_predecessors.push_back(v);
    if (labels[i] != NodeType::Output && outdeg[i] == 0) r.missing_successors.push_back(v);
  }
  r.all_have_predecessors = r.missing_predecessors.empty();
  r.all_have_successors = r.missing_successors.empty();

  // Kahn's algorithm; upper-triangular storage already rules out cycles.
  std::vector<int> pending = indeg;
  std::vector<int> queue;
  for (int v = 0; v < n; ++v)
    if (pending[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
  std::size_t visited = 0;
  while (visited < queue.size()) {
    const int u = queue[visited++];
    for (const Edge& e : g.edges())
      if (e.from == u && --pending[static_cast<std::size_t>(e.to)] == 0) queue.push_back(e.to);
  }
  r.acyclic = static_cast<int>(visited) == n;

  r.valid = r.single_input && r.single_output && r.all_have_predecessors &&
            r.all_have_successors && r.acyclic;
  r.within_node_limit = n <= limits.max_nodes;
  r.within_edge_limit = static_cast<int>(g.num_edges()) <= limits.max_edges;
  return r;
}

PermutedGraph permute(const CellGraph& g, const std::vector<int>& perm) {
  const int n = g.size();
  if (static_cast<int>(perm.size()) != n || perm.front() != 0 || perm.back() != n - 1)
    throw std::invalid_argument("permutation must fix the first and last node");
  PermutedGraph out;
  out.labels.resize(static_cast<std::size_t>(n));
  out.adjacency.assign(static_cast<std::size_t>(n * n), 0);
  for (int v = 0; v < n; ++v) out.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = g.label(v);
  for (const Edge& e : g.edges()) {
    const int u = perm[static_cast<std::size_t>(e.from)];
    const int v = perm[static_cast<std::size_t>(e.to)];
    out.adjacency[static_cast<std::size_t>(u * n + v)] = 1;
  }
  return out;
}

namespace {

CellGraph from_permuted(const PermutedGraph& p) {
  const int n = static_cast<int>(p.labels.size());
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (p.adjacency[static_cast<std::size_t>(u * n + v)]) edges.push_back({u, v});
  return CellGraph(p.labels, std::move(edges));
}

// True iff no upper-triangular relabeling of g encodes smaller than g itself.
bool is_canonical(const CellGraph& g) {
  const int n = g.size();
  if (n <= 3) return true;
  const auto& labels = g.labels();
  const auto adj = g.adjacency();
  std::vector<int> perm = identity_permutation(n);
  std::vector<NodeType> plabels(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> padj(static_cast<std::size_t>(n * n));
  while (next_interior_permutation(perm)) {
    for (int v = 0; v < n; ++v) plabels[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = labels[static_cast<std::size_t>(v)];
    if (plabels > labels) continue;
    bool upper = true;
    std::fill(padj.begin(), padj.end(), 0);
    for (const Edge& e : g.edges()) {
      const int u = perm[static_cast<std::size_t>(e.from)];
      const int v = perm[static_cast<std::size_t>(e.to)];
      if (u >= v) {
        upper = false;
        break;
      }
      padj[static_cast<std::size_t>(u * n + v)] = 1;
    }
    if (!upper) continue;
    if (compare_encoding(plabels, padj, labels, adj) < 0) return false;
  }
  return true;
}

}  // namespace

CellGraph canonical_form(const CellGraph& g) {
  const int n = g.size();
  if (n <= 3) return g;
  std::vector<int> perm = identity_permutation(n);
  PermutedGraph best{g.labels(), g.adjacency()};
  while (next_interior_permutation(perm)) {
    PermutedGraph p = permute(g, perm);
    if (!upper_triangular(p.adjacency, n)) continue;
    if (compare_encoding(p.labels, p.adjacency, best.labels, best.adjacency) < 0)
      best = std::move(p);
  }
  return from_permuted(best);
}

std::vector<CellGraph> enumerate_valid(int exact_n, const SearchSpaceLimits& limits, bool dedup) {
  limits.check();
  if (exact_n < 2 || exact_n > limits.max_nodes)
    throw std::invalid_argument("exact_n must lie in [2, max_nodes]");
  const int n = exact_n;
  std::vector<Edge> pairs;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) pairs.push_back({u, v});

  const int interior = n - 2;
  const int num_ops = std::min<int>(limits.num_op_types, static_cast<int>(kOperations.size()));
  std::size_t labelings = 1;
  for (int i = 0; i < interior; ++i) labelings *= static_cast<std::size_t>(num_ops);

  std::vector<CellGraph> out;
  const std::uint64_t masks = std::uint64_t{1} << pairs.size();
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    std::vector<Edge> edges;
    std::vector<int> indeg(static_cast<std::size_t>(n), 0), outdeg(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!((mask >> i) & 1U)) continue;
      edges.push_back(pairs[i]);
      ++outdeg[static_cast<std::size_t>(pairs[i].from)];
      ++indeg[static_cast<std::size_t>(pairs[i].to)];
    }
    if (static_cast<int>(edges.size()) > limits.max_edges) continue;
    bool ok = true;
    for (int v = 0; v < n && ok; ++v) {
      if (v != 0 && indeg[static_cast<std::size_t>(v)] == 0) ok = false;
      if (v != n - 1 && outdeg[static_cast<std::size_t>(v)] == 0) ok = false;
    }
    if (!ok) continue;

    for (std::size_t code = 0; code < labelings; ++code) {
      std::vector<NodeType> labels(static_cast<std::size_t>(n));
      labels.front() = NodeType::Input;
      labels.back() = NodeType::Output;
      std::size_t c = code;
      for (int i = interior; i >= 1; --i) {
        labels[static_cast<std::size_t>(i)] = kOperations[c % static_cast<std::size_t>(num_ops)];
        c /= static_cast<std::size_t>(num_ops);
      }
      CellGraph g(std::move(labels), edges);
      if (dedup && !is_canonical(g)) continue;
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::string GraphDigest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

GraphDigest graph_hash(const CellGraph& g, bool isomorphism_invariant) {
  const CellGraph& h = isomorphism_invariant ? canonical_form(g) : g;
  std::uint64_t state = 0xcbf29ce484222325ULL;
  auto feed = [&state](std::uint8_t byte) {
    state ^= byte;
    state *= 0x100000001b3ULL;
  };
  feed(static_cast<std::uint8_t>(h.size()));
  for (NodeType t : h.labels()) feed(static_cast<std::uint8_t>(t));
  for (std::uint8_t a : h.adjacency()) feed(a);
  return GraphDigest{state};
}

int edit_distance(const CellGraph& a, const CellGraph& b) {
  const int n = a.size();
  if (n != b.size()) throw std::invalid_argument("edit_distance needs graphs with equal node counts");
  const auto target = b.adjacency();
  const auto& tlabels = b.labels();
  std::vector<int> perm = identity_permutation(n);
  int best = std::numeric_limits<int>::max();
  do {
    int d = 0;
    std::vector<std::uint8_t> mapped(static_cast<std::size_t>(n * n), 0);
    for (int v = 0; v < n; ++v)
      if (a.label(v) != tlabels[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])]) ++d;
    for (const Edge& e : a.edges())
      mapped[static_cast<std::size_t>(perm[static_cast<std::size_t>(e.from)] * n + perm[static_cast<std::size_t>(e.to)])] = 1;
    for (std::size_t i = 0; i < mapped.size(); ++i) d += mapped[i] != target[i];
    best = std::min(best, d);
  } while (next_interior_permutation(perm));
  return best;
}

int longest_path(const CellGraph& g) {
  const int n = g.size();
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  dist[0] = 0;
  // Sorted edges visit sources in topological order.
  for (const Edge& e : g.edges()) {
    const int d = dist[static_cast<std::size_t>(e.from)];
    if (d >= 0) dist[static_cast<std::size_t>(e.to)] = std::max(dist[static_cast<std::size_t>(e.to)], d + 1);
  }
  if (g.label(0) != NodeType::Input || g.label(n - 1) != NodeType::Output || dist.back() < 0)
    throw std::invalid_argument("graph has no Input->Output path");
  return dist.back();
}

std::string serialize(const CellGraph& g, std::optional<double> accuracy) {
  nlohmann::ordered_json j;
  j["n"] = g.size();
  auto ops = nlohmann::ordered_json::array();
  for (NodeType t : g.labels()) ops.push_back(op_name(t));
  j["ops"] = std::move(ops);
  auto edges = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.from, e.to});
  j["edges"] = std::move(edges);
  if (accuracy) j["acc"] = *accuracy;
  else j["acc"] = nullptr;
  return j.dump();
}

GraphRecord deserialize(std::string_view record) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(record);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("record", e.what());
  }
  if (!j.is_object()) throw ParseError("record", "expected a JSON object");

  if (!j.contains("n") || !j["n"].is_number_integer()) throw ParseError("n", "missing or not an integer");
  const auto n = j["n"].get<long long>();
  if (n < 2 || n > 64) throw ParseError("n", "node count out of range");

  if (!j.contains("ops") || !j["ops"].is_array()) throw ParseError("ops", "missing or not an array");
  if (static_cast<long long>(j["ops"].size()) != n) throw ParseError("ops", "length differs from n");
  std::vector<NodeType> labels;
  for (const auto& op : j["ops"]) {
    if (!op.is_string()) throw ParseError("ops", "entries must be strings");
    auto t = parse_op(op.get<std::string>());
    if (!t) throw ParseError("ops", "unknown op '" + op.get<std::string>() + "'");
    labels.push_back(*t);
  }

  if (!j.contains("edges") || !j["edges"].is_array()) throw ParseError("edges", "missing or not an array");
  std::vector<Edge> edges;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw ParseError("edges", "each edge must be a pair of integers");
    const auto u = e[0].get<long long>();
    const auto v = e[1].get<long long>();
    if (u < 0 || v < 0 || u >= n || v >= n) throw ParseError("edges", "endpoint out of range");
    if (u >= v)
      throw ParseError("edges", "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                    ") is not upper-triangular");
    edges.push_back({static_cast<int>(u), static_cast<int>(v)});
  }

  std::optional<double> acc;
  if (j.contains("acc") && !j["acc"].is_null()) {
    if (!j["acc"].is_number()) throw ParseError("acc", "must be a number or null");
    acc = j["acc"].get<double>();
  }
  return {CellGraph(std::move(labels), std::move(edges)), acc};
}

}  // namespace vsgae
