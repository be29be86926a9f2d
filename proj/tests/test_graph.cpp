#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <set>

#include "vsgae/graph.hpp"

using namespace vsgae;
using enum NodeType;

namespace {

CellGraph minimal() { return CellGraph({Input, Output}, {{0, 1}}); }
CellGraph chain3(NodeType op, bool skip = false) {
  std::vector<Edge> e{{0, 1}, {1, 2}};
  if (skip) e.push_back({0, 2});
  return CellGraph({Input, op, Output}, e);
}

}  // namespace

TEST_CASE("node type names round-trip") {
  for (std::size_t i = 0; i < kNumNodeTypes; ++i) {
    const NodeType t = node_type_from_index(i);
    CHECK(parse_op(op_name(t)) == t);
  }
  CHECK(op_name(Conv3x3) == "conv3x3-bn-relu");
  CHECK(op_name(Conv1x1) == "conv1x1-bn-relu");
  CHECK(op_name(MaxPool3x3) == "maxpool3x3");
  CHECK_FALSE(parse_op("conv5x5").has_value());
  CHECK_THROWS(node_type_from_index(5));
}

TEST_CASE("construction enforces upper-triangular edges") {
  CHECK_THROWS_AS(CellGraph({Input, Conv3x3, Output}, {{2, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(CellGraph({Input, Output}, {{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(CellGraph({Input, Output}, {{0, 2}}), std::invalid_argument);
  const CellGraph g({Input, Conv3x3, Output}, {{1, 2}, {0, 1}, {0, 1}});
  CHECK(g.num_edges() == 2);
  CHECK(g.edges().front() == Edge{0, 1});
}

TEST_CASE("validate: the five checks") {
  CHECK(validate(minimal()).valid);

  const ValidityReport dangling = validate(CellGraph({Input, Conv3x3, Output}, {{0, 2}}));
  CHECK_FALSE(dangling.valid);
  CHECK_FALSE(dangling.all_have_predecessors);
  CHECK_FALSE(dangling.all_have_successors);
  CHECK(dangling.missing_predecessors == std::vector<int>{1});
  CHECK(dangling.missing_successors == std::vector<int>{1});
  CHECK(dangling.single_input);
  CHECK(dangling.single_output);

  const ValidityReport two_inputs = validate(CellGraph({Input, Input, Output}, {{0, 1}, {0, 2}, {1, 2}}));
  CHECK_FALSE(two_inputs.valid);
  CHECK_FALSE(two_inputs.single_input);
  CHECK(two_inputs.acyclic);

  const ValidityReport no_output = validate(CellGraph({Input, Conv1x1}, {{0, 1}}));
  CHECK_FALSE(no_output.single_output);
  CHECK_FALSE(no_output.valid);
}

TEST_CASE("validate reports the size budget separately") {
  std::vector<NodeType> labels{Input};
  std::vector<Edge> edges;
  for (int i = 1; i < 8; ++i) {
    labels.push_back(Conv3x3);
    edges.push_back({i - 1, i});
  }
  labels.push_back(Output);
  edges.push_back({7, 8});
  const ValidityReport r = validate(CellGraph(labels, edges));
  CHECK(r.valid);
  CHECK_FALSE(r.within_node_limit);
  CHECK(r.within_edge_limit);
}

TEST_CASE("enumeration counts agree with the brute-force oracle") {
  const int expected[] = {1, 6, 90};
  for (int n = 2; n <= 4; ++n) {
    const auto lib = enumerate_valid(n);
    CHECK(lib.size() == static_cast<std::size_t>(expected[n - 2]));
    auto ref = oracle::brute_force_enumerate(n);
    std::vector<CellGraph> a = lib;
    auto key = [](const CellGraph& g) { return std::make_pair(g.labels(), g.edges()); };
    std::sort(a.begin(), a.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
    std::sort(ref.begin(), ref.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
    CHECK(a == ref);
  }
  CHECK(enumerate_valid(5).size() == oracle::brute_force_enumerate(5).size());
  CHECK(enumerate_valid(5).size() == 3267);
}

TEST_CASE("enumeration with dedup keeps one graph per isomorphism class") {
  const std::size_t expected[] = {1, 6, 84, 2441};
  for (int n = 2; n <= 5; ++n) {
    const auto dedup = enumerate_valid(n, {}, true);
    CHECK(dedup.size() == expected[n - 2]);
    std::set<std::uint64_t> hashes;
    for (const auto& g : dedup) {
      hashes.insert(graph_hash(g).value);
      CHECK(canonical_form(g) == g);
    }
    CHECK(hashes.size() == dedup.size());
    std::set<std::uint64_t> all;
    for (const auto& g : enumerate_valid(n)) all.insert(graph_hash(g).value);
    CHECK(all == hashes);
  }
}

TEST_CASE("enumeration output is valid and strictly upper-triangular") {
  for (int n = 2; n <= 5; ++n)
    for (const auto& g : enumerate_valid(n)) {
      REQUIRE(is_valid(g));
      for (const auto& e : g.edges()) CHECK(e.from < e.to);
    }
  CHECK_THROWS_AS(enumerate_valid(1), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_valid(8), std::invalid_argument);
}

TEST_CASE("edge budget prunes the enumeration") {
  SearchSpaceLimits tight;
  tight.max_edges = 3;
  for (const auto& g : enumerate_valid(4, tight)) CHECK(g.num_edges() <= 3);
  CHECK(enumerate_valid(4, tight).size() < 90);
}

TEST_CASE("graph_hash") {
  CHECK(graph_hash(minimal()) == graph_hash(CellGraph({Input, Output}, {{0, 1}})));
  CHECK(graph_hash(chain3(Conv3x3)) != graph_hash(chain3(Conv1x1)));

  // Interior swap of a 4-node graph: 1 and 2 exchange labels and roles.
  const CellGraph a({Input, Conv3x3, MaxPool3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 2}});
  const CellGraph b({Input, MaxPool3x3, Conv3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const CellGraph c({Input, MaxPool3x3, Conv3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {1, 2}});
  const CellGraph a_plain({Input, Conv3x3, MaxPool3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  CHECK(graph_hash(a_plain) == graph_hash(b));
  CHECK(graph_hash(a_plain, false) != graph_hash(b, false));
  CHECK(graph_hash(a) != graph_hash(c));
  CHECK(graph_hash(a).hex().size() == 16);
}

TEST_CASE("permute and canonical_form") {
  const CellGraph g({Input, Conv3x3, MaxPool3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const PermutedGraph p = permute(g, {0, 2, 1, 3});
  CHECK(p.labels == std::vector<NodeType>{Input, MaxPool3x3, Conv3x3, Output});
  CHECK_THROWS(permute(g, {1, 0, 2, 3}));
  CHECK(canonical_form(g) == canonical_form(CellGraph(p.labels, {{0, 1}, {0, 2}, {1, 3}, {2, 3}})));
}

TEST_CASE("edit distance examples") {
  CHECK(edit_distance(chain3(Conv3x3), chain3(Conv3x3)) == 0);
  CHECK(edit_distance(chain3(Conv3x3), chain3(MaxPool3x3)) == 1);
  CHECK(edit_distance(chain3(Conv3x3, true), chain3(Conv3x3)) == 1);
  CHECK_THROWS_AS(edit_distance(minimal(), chain3(Conv3x3)), std::invalid_argument);
}

TEST_CASE("edit distance equals the permutation oracle and is a metric for n <= 4") {
  for (int n = 2; n <= 4; ++n) {
    const auto graphs = enumerate_valid(n);
    const std::size_t m = graphs.size();
    std::vector<int> d(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        d[i * m + j] = edit_distance(graphs[i], graphs[j]);
        REQUIRE(d[i * m + j] == oracle::brute_force_edit_distance(graphs[i], graphs[j]));
      }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        REQUIRE(d[i * m + j] == d[j * m + i]);
        REQUIRE((d[i * m + j] == 0) == (canonical_form(graphs[i]) == canonical_form(graphs[j])));
        for (std::size_t k = 0; k < m; ++k) REQUIRE(d[i * m + k] <= d[i * m + j] + d[j * m + k]);
      }
  }
}

TEST_CASE("longest_path") {
  CHECK(longest_path(minimal()) == 1);
  CHECK(longest_path(chain3(Conv3x3, true)) == 2);
  std::vector<NodeType> labels{Input, Conv3x3, Conv1x1, MaxPool3x3, Conv3x3, Conv1x1, Output};
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < 7; ++i) edges.push_back({i, i + 1});
  CHECK(longest_path(CellGraph(labels, edges)) == 6);
  CHECK_THROWS(longest_path(CellGraph({Input, Conv3x3, Output}, {{0, 1}})));
}

TEST_CASE("serialize and deserialize") {
  const std::string s = serialize(minimal());
  CHECK(s == R"({"n":2,"ops":["input","output"],"edges":[[0,1]],"acc":null})");
  CHECK(deserialize(s).graph == minimal());
  CHECK_FALSE(deserialize(s).accuracy.has_value());
  CHECK(deserialize(serialize(minimal(), 0.25)).accuracy == 0.25);

  for (int n = 2; n <= 5; ++n)
    for (const auto& g : enumerate_valid(n)) REQUIRE(deserialize(serialize(g)).graph == g);

  auto field_of = [](const std::string& rec) {
    try {
      deserialize(rec);
    } catch (const ParseError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"n":3,"ops":["input","conv3x3-bn-relu","output"],"edges":[[0,1],[2,1]],"acc":null})") ==
        "edges");
  CHECK(field_of(R"({"n":2,"ops":["input","conv5x5"],"edges":[[0,1]],"acc":null})") == "ops");
  CHECK(field_of(R"({"n":3,"ops":["input","output"],"edges":[[0,1]],"acc":null})") == "ops");
  CHECK(field_of(R"({"ops":["input","output"],"edges":[[0,1]],"acc":null})") == "n");
  CHECK(field_of(R"({"n":2,"ops":["input","output"],"edges":[[0,1]],"acc":"x"})") == "acc");
  CHECK_THROWS_AS(deserialize("not json"), ParseError);
}
