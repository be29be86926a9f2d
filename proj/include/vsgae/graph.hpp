// Cell graphs: small labeled DAGs stored in canonical (upper-triangular) order.
#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vsgae {

enum class NodeType : std::uint8_t {
  Input = 0,
  Output = 1,
  Conv3x3 = 2,
  Conv1x1 = 3,
  MaxPool3x3 = 4,
};

inline constexpr std::size_t kNumNodeTypes = 5;
inline constexpr std::array<NodeType, 3> kOperations{NodeType::Conv3x3, NodeType::Conv1x1,
                                                     NodeType::MaxPool3x3};

constexpr bool is_operation(NodeType t) {
  return t == NodeType::Conv3x3 || t == NodeType::Conv1x1 || t == NodeType::MaxPool3x3;
}
constexpr std::size_t type_index(NodeType t) { return static_cast<std::size_t>(t); }
NodeType node_type_from_index(std::size_t i);

/// Record string for a node type ("input", "conv3x3-bn-relu", ...).
std::string_view op_name(NodeType t);
std::optional<NodeType> parse_op(std::string_view s);

struct Edge {
  int from = 0;
  int to = 0;
  auto operator<=>(const Edge&) const = default;
};

struct SearchSpaceLimits {
  int max_nodes = 7;
  int max_edges = 9;
  int num_op_types = 3;

  void check() const;
};

/// Labeled DAG whose edges all satisfy from < to. Partial graphs built by the
/// decoder may have a single node; everything read from disk has at least two.
class CellGraph {
 public:
  CellGraph() = default;
  /// Throws std::invalid_argument on an empty label list, an out-of-range
  /// endpoint or an edge that is not strictly upper-triangular. Duplicate
  /// edges collapse; edges are kept sorted.
  CellGraph(std::vector<NodeType> labels, std::vector<Edge> edges);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<NodeType>& labels() const { return labels_; }
  NodeType label(int v) const { return labels_.at(static_cast<std::size_t>(v)); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }

  bool has_edge(int from, int to) const;
  std::vector<int> predecessors(int v) const;
  std::vector<int> successors(int v) const;

  /// Flattened n x n adjacency, row-major, adj[u*n+v] != 0 iff (u,v) is an edge.
  std::vector<std::uint8_t> adjacency() const;

  /// Graph with the nodes [0, count) and the edges among them.
  CellGraph prefix(int count) const;

  bool operator==(const CellGraph&) const = default;

 private:
  std::vector<NodeType> labels_;
  std::vector<Edge> edges_;
};

/// Outcome of the five structural checks. The size budget is reported on its
/// own and never folded into `valid`.
struct ValidityReport {
  bool single_input = false;
  bool single_output = false;
  bool all_have_predecessors = false;
  bool all_have_successors = false;
  bool acyclic = false;
  bool valid = false;

  bool within_node_limit = false;
  bool within_edge_limit = false;

  std::vector<int> missing_predecessors;
  std::vector<int> missing_successors;
};

ValidityReport validate(const CellGraph& g, const SearchSpaceLimits& limits = {});
inline bool is_valid(const CellGraph& g) { return validate(g).valid; }

/// Every canonical cell with exactly `exact_n` nodes: Input first, Output last,
/// interior nodes drawn from the three operations, at most limits.max_edges
/// edges, passing validate(). With `dedup` one graph per label-preserving
/// isomorphism class is kept (the class's canonical_form).
std::vector<CellGraph> enumerate_valid(int exact_n, const SearchSpaceLimits& limits = {},
                                       bool dedup = false);

/// Interior permutation p (size n) applied to g: node v moves to p[v].
/// p must fix 0 and n-1. The result need not be upper-triangular, so it is
/// returned as raw labels plus adjacency.
struct PermutedGraph {
  std::vector<NodeType> labels;
  std::vector<std::uint8_t> adjacency;
};
PermutedGraph permute(const CellGraph& g, const std::vector<int>& perm);

/// Upper-triangular member of g's isomorphism class (Input/Output fixed) with
/// the smallest (labels, adjacency) encoding.
CellGraph canonical_form(const CellGraph& g);

struct GraphDigest {
  std::uint64_t value = 0;
  auto operator<=>(const GraphDigest&) const = default;
  std::string hex() const;
};

/// FNV-1a over the serialized graph. With `isomorphism_invariant`, the
/// canonical form is hashed, so label-preserving isomorphic graphs collide.
GraphDigest graph_hash(const CellGraph& g, bool isomorphism_invariant = true);

/// Minimum number of label substitutions plus edge insertions/deletions over
/// all matchings that fix Input and Output. Requires equal node counts.
int edit_distance(const CellGraph& a, const CellGraph& b);

/// Longest Input->Output path, counted in edges.
int longest_path(const CellGraph& g);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, const std::string& what)
      : std::runtime_error("field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// One JSONL record: {"n":..,"ops":[..],"edges":[[u,v],..],"acc":..}.
std::string serialize(const CellGraph& g, std::optional<double> accuracy = std::nullopt);

struct GraphRecord {
  CellGraph graph;
  std::optional<double> accuracy;
};
GraphRecord deserialize(std::string_view record);

}  // namespace vsgae
