#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "vsgae/dataset.hpp"

using namespace vsgae;
using enum NodeType;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vsgae_test_dataset";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Dataset upto(int n, bool dedup = false) {
  DatasetParams p;
  p.max_n = n;
  p.dedup = dedup;
  return make_dataset({}, p, 0);
}

}  // namespace

TEST_CASE("synthetic accuracy examples") {
  CHECK(synth_accuracy(CellGraph({Input, Output}, {{0, 1}})) == doctest::Approx(0.999 * sig(1.6)).epsilon(1e-12));
  CHECK(synth_accuracy(CellGraph({Input, Output}, {{0, 1}})) == doctest::Approx(0.83119).epsilon(1e-5));
  const CellGraph conv({Input, Conv3x3, Output}, {{0, 1}, {1, 2}});
  CHECK(synth_accuracy(conv) == doctest::Approx(0.999 * sig(2.2)).epsilon(1e-12));
  CHECK(synth_accuracy(conv) == doctest::Approx(0.89935).epsilon(1e-5));
  const CellGraph pool({Input, MaxPool3x3, Output}, {{0, 1}, {1, 2}});
  CHECK(synth_accuracy(pool) == doctest::Approx(0.999 * sig(1.1)).epsilon(1e-12));
  CHECK(synth_accuracy(pool) == doctest::Approx(0.74951).epsilon(1e-5));
  CHECK_THROWS_AS(synth_accuracy(CellGraph({Input, Conv3x3, Output}, {{0, 2}})), std::invalid_argument);
}

TEST_CASE("synthetic accuracy is isomorphism invariant") {
  const CellGraph a({Input, Conv3x3, MaxPool3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const CellGraph b({Input, MaxPool3x3, Conv3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  CHECK(synth_accuracy(a) == synth_accuracy(b));
}

TEST_CASE("make_dataset sizes") {
  CHECK(upto(3).size() == 7);
  CHECK(upto(4).size() == 97);
  CHECK(upto(4, true).size() == 91);
  CHECK(upto(5, true).size() == 2532);

  DatasetParams too_many;
  too_many.mode = DatasetParams::Mode::SampleK;
  too_many.k = 1'000'000'000;
  SearchSpaceLimits small;
  small.max_nodes = 4;
  CHECK_THROWS_AS(make_dataset(small, too_many, 1), std::invalid_argument);

  DatasetParams some;
  some.mode = DatasetParams::Mode::SampleK;
  some.k = 20;
  const Dataset s1 = make_dataset(small, some, 5);
  CHECK(s1.size() == 20);
  CHECK(make_dataset(small, some, 5).records == s1.records);
}

TEST_CASE("make_dataset records are valid, labeled and hash-sorted") {
  const Dataset ds = upto(4);
  std::vector<ArchRecord> sorted = ds.records;
  sort_by_hash(sorted);
  CHECK(sorted == ds.records);
  for (const auto& r : ds.records) {
    CHECK(is_valid(r.graph));
    CHECK(r.accuracy == synth_accuracy(r.graph));
  }
  std::set<std::uint64_t> hashes;
  for (const auto& r : upto(5, true).records) hashes.insert(graph_hash(r.graph).value);
  CHECK(hashes.size() == 2532);
}

TEST_CASE("apportion") {
  const std::vector<double> w{0.7, 0.2, 0.1};
  CHECK(apportion(10, w) == std::vector<std::size_t>{7, 2, 1});
  const std::vector<double> even{1, 1, 1};
  CHECK(apportion(4, even) == std::vector<std::size_t>{2, 1, 1});
  const std::vector<double> classes{60, 40};
  CHECK(apportion(10, classes) == std::vector<std::size_t>{6, 4});
}

TEST_CASE("split sizes, determinism and errors") {
  Dataset ten = upto(3);
  ten.records.insert(ten.records.end(), ten.records.begin(), ten.records.begin() + 3);
  REQUIRE(ten.size() == 10);
  SplitSpec spec;
  spec.seed = 4;
  const Split s = split(ten, spec);
  CHECK(s.train.size() == 7);
  CHECK(s.test.size() == 2);
  CHECK(s.validation.size() == 1);
  const Split again = split(ten, spec);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  Dataset two = upto(3);
  two.records.resize(2);
  CHECK_THROWS_AS(split(two, spec), std::invalid_argument);

  SplitSpec bad;
  bad.train = 0.5;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
}

TEST_CASE("split parts partition the dataset") {
  const Dataset ds = upto(4);
  for (SplitMethod m : {SplitMethod::Random, SplitMethod::SizeStratified})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SplitSpec spec;
      spec.method = m;
      spec.seed = seed;
      const Split s = split(ds, spec);
      std::vector<std::size_t> all;
      for (const auto* part : {&s.train, &s.test, &s.validation}) all.insert(all.end(), part->begin(), part->end());
      std::sort(all.begin(), all.end());
      REQUIRE(all.size() == ds.size());
      for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
    }
}

TEST_CASE("size-stratified split keeps per-size ratios") {
  const Dataset ds = upto(5, true);
  SplitSpec spec;
  spec.method = SplitMethod::SizeStratified;
  spec.seed = 9;
  const Split s = split(ds, spec);
  std::map<int, std::array<std::size_t, 3>> counts;
  for (std::size_t i : s.train) ++counts[ds.records[i].graph.size()][0];
  for (std::size_t i : s.test) ++counts[ds.records[i].graph.size()][1];
  for (std::size_t i : s.validation) ++counts[ds.records[i].graph.size()][2];
  const auto& c5 = counts[5];
  const double total = static_cast<double>(c5[0] + c5[1] + c5[2]);
  CHECK(std::abs(c5[0] - 0.7 * total) <= 1.0);
  CHECK(std::abs(c5[1] - 0.2 * total) <= 1.0);
  CHECK(std::abs(c5[2] - 0.1 * total) <= 1.0);
}

TEST_CASE("save and load round-trip") {
  const Dataset ds = upto(3);
  const auto path = temp_file("upto3.jsonl");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(back.records == ds.records);
  CHECK(back.provenance == Provenance::Loaded);
}

TEST_CASE("load rejects bad files") {
  const auto bad_acc = temp_file("bad_acc.jsonl");
  std::ofstream(bad_acc) << R"({"n":2,"ops":["input","output"],"edges":[[0,1]],"acc":1.5})" << "\n";
  CHECK_THROWS_AS(load_dataset(bad_acc), ParseError);

  const auto missing_acc = temp_file("missing_acc.jsonl");
  std::ofstream(missing_acc) << R"({"n":2,"ops":["input","output"],"edges":[[0,1]],"acc":null})" << "\n";
  CHECK_THROWS_AS(load_dataset(missing_acc), ParseError);

  const auto empty = temp_file("empty.jsonl");
  std::ofstream(empty).flush();
  CHECK_THROWS(load_dataset(empty));

  const auto invalid = temp_file("invalid.jsonl");
  std::ofstream(invalid) << R"({"n":3,"ops":["input","conv3x3-bn-relu","output"],"edges":[[0,2]],"acc":0.5})"
                         << "\n";
  CHECK_THROWS(load_dataset(invalid));

  CHECK_THROWS(load_dataset(temp_file("does_not_exist.jsonl")));
}

TEST_CASE("accuracy distribution is skewed toward the top of its range") {
  const Dataset ds = upto(7, false);
  REQUIRE(ds.size() == 1'293'208);
  double lo = 1.0, hi = 0.0;
  for (const auto& r : ds.records) {
    lo = std::min(lo, r.accuracy);
    hi = std::max(hi, r.accuracy);
  }
  const double cut = lo + 0.8 * (hi - lo);
  std::size_t top = 0;
  for (const auto& r : ds.records) top += r.accuracy >= cut;
  MESSAGE("share in top two bins: " << static_cast<double>(top) / static_cast<double>(ds.size()));
  CHECK(static_cast<double>(top) / static_cast<double>(ds.size()) > 0.5);
}
