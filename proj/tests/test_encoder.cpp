#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "vsgae/encoder.hpp"
#include "vsgae/gradcheck.hpp"

using namespace vsgae;
using enum NodeType;
using nn::Matrix;
using nn::Tensor;

namespace {

struct Fixture {
  nn::ParamStore store;
  EncoderParams params;
  Fixture(EncoderConfig cfg, std::uint64_t seed) {
    nn::Rng rng(seed);
    params = make_encoder(store, "enc", cfg, rng);
  }
  void zero() {
    for (auto& e : store.entries()) e.param.mutable_value().setZero();
  }
};

std::vector<std::vector<int>> interior_permutations(int n) {
  std::vector<int> inner(static_cast<std::size_t>(n - 2));
  std::iota(inner.begin(), inner.end(), 1);
  std::vector<std::vector<int>> out;
  do {
    std::vector<int> p{0};
    p.insert(p.end(), inner.begin(), inner.end());
    p.push_back(n - 1);
    out.push_back(p);
  } while (std::next_permutation(inner.begin(), inner.end()));
  return out;
}

// Reference propagation: one explicit loop per node over its neighbors.
Matrix reference_round(const Matrix& h, const CellGraph& g, const PropagationRound& r) {
  const Eigen::Index n = h.rows(), dn = h.cols();
  Matrix m = Matrix::Zero(n, 2 * dn);
  auto apply = [](const nn::Linear& l, const Matrix& x) -> Matrix {
    return x * l.weight.value() + l.bias.value();
  };
  for (int v = 0; v < n; ++v) {
    for (int u : g.predecessors(v)) {
      Matrix cat(1, 2 * dn);
      cat << h.row(v), h.row(u);
      m.row(v) += apply(r.message, cat);
    }
    for (int u : g.successors(v)) {
      Matrix cat(1, 2 * dn);
      cat << h.row(v), h.row(u);
      m.row(v) += apply(r.reverse_message, cat);
    }
  }
  return nn::gru_cell(Tensor(m), Tensor(h), r.update.w_ih, r.update.w_hh, r.update.b_ih, r.update.b_hh).value();
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig c;
  CHECK_NOTHROW(c.check());
  c.rounds = 0;
  CHECK_THROWS(c.check());
  c = EncoderConfig{};
  c.node_dim = 0;
  CHECK_THROWS(c.check());
}

TEST_CASE("parameter layout") {
  Fixture f({4, 3, 2, true}, 1);
  CHECK(f.params.rounds.size() == 2);
  CHECK(f.params.lookup.rows() == 5);
  CHECK(f.params.rounds[0].message.in_features() == 8);
  CHECK(f.params.rounds[0].message.out_features() == 8);
  CHECK(f.params.rounds[0].update.w_ih.rows() == 8);
  CHECK(f.params.rounds[0].update.w_hh.rows() == 4);
  CHECK(f.params.mean.project.out_features() == 3);
  CHECK(f.params.mean.gate.out_features() == 1);
  REQUIRE(f.params.logvar.has_value());
  CHECK(f.params.rounds[0].message.weight.value() != f.params.rounds[1].message.weight.value());
  Fixture plain({4, 3, 2, false}, 1);
  CHECK_FALSE(plain.params.logvar.has_value());
  CHECK_FALSE(encode(CellGraph({Input, Output}, {{0, 1}}), plain.params).logvar.has_value());
}

TEST_CASE("init_embeddings") {
  Fixture f({4, 3, 2, false}, 2);
  const CellGraph g({Input, Conv3x3, Conv3x3, Output}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const Matrix h = init_embeddings(g, f.params.lookup).value();
  CHECK(h.row(1) == h.row(2));
  CHECK(h.row(0) == f.params.lookup.value().row(0));
  f.zero();
  CHECK(init_embeddings(g, f.params.lookup).value().isZero());
}

TEST_CASE("lookup gradient touches only the rows in use") {
  Fixture f({4, 3, 2, false}, 3);
  const CellGraph g({Input, Conv1x1, Output}, {{0, 1}, {1, 2}});
  f.store.zero_grad();
  nn::sum(encode(g, f.params).mean).backward();
  const Matrix& grad = f.params.lookup.grad();
  CHECK(grad.row(type_index(Conv3x3)).isZero());
  CHECK(grad.row(type_index(MaxPool3x3)).isZero());
  CHECK_FALSE(grad.row(type_index(Conv1x1)).isZero());
}

TEST_CASE("propagate_round edge cases") {
  Fixture f({4, 3, 1, false}, 4);
  const CellGraph lone({Input, Conv3x3, Output}, {});
  const Tensor h = init_embeddings(lone, f.params.lookup);
  for (auto* t : {&f.params.rounds[0].update.w_ih, &f.params.rounds[0].update.w_hh, &f.params.rounds[0].update.b_ih,
                  &f.params.rounds[0].update.b_hh})
    t->mutable_value().setZero();
  CHECK(propagate_round(h, lone, f.params.rounds[0]).value().isApprox(0.5 * h.value()));
  CHECK_THROWS_AS(propagate_round(h, CellGraph({Input, Output}, {{0, 1}}), f.params.rounds[0]),
                  std::invalid_argument);
}

TEST_CASE("single edge: forward message to the head, reverse message to the tail") {
  Fixture f({2, 2, 1, false}, 5);
  auto& r = f.params.rounds[0];
  const CellGraph g({Input, Output}, {{0, 1}});
  const Tensor h = init_embeddings(g, f.params.lookup);
  const Matrix base = propagate_round(h, g, r).value();
  r.message.bias.mutable_value().array() += 1.0;
  const Matrix fwd = propagate_round(h, g, r).value();
  CHECK(fwd.row(0) == base.row(0));
  CHECK(fwd.row(1) != base.row(1));
  r.reverse_message.bias.mutable_value().array() += 1.0;
  const Matrix both = propagate_round(h, g, r).value();
  CHECK(both.row(0) != fwd.row(0));
  CHECK(both.row(1) == fwd.row(1));
}

TEST_CASE("message passing matches a per-edge loop") {
  Fixture f({5, 3, 2, false}, 6);
  const CellGraph g({Input, Conv3x3, MaxPool3x3, Conv1x1, Output},
                    {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {0, 4}});
  Tensor h = init_embeddings(g, f.params.lookup);
  Matrix ref = h.value();
  for (const auto& round : f.params.rounds) {
    h = propagate_round(h, g, round);
    ref = reference_round(ref, g, round);
  }
  CHECK(h.value().isApprox(ref, 1e-12));
}

TEST_CASE("aggregation") {
  Fixture f({4, 3, 1, false}, 7);
  const CellGraph g({Input, Conv3x3, Output}, {{0, 1}, {1, 2}});
  const Tensor h = propagate(init_embeddings(g, f.params.lookup), g, f.params);

  SUBCASE("zero weights") {
    f.params.mean.project.weight.mutable_value().setZero();
    f.params.mean.project.bias.mutable_value().setZero();
    CHECK(aggregate(h, f.params.mean).value().isZero());
  }
  SUBCASE("saturated gate is a plain linear sum") {
    f.params.mean.gate.weight.mutable_value().setZero();
    f.params.mean.gate.bias.mutable_value().setConstant(50.0);
    const Matrix plain = (h.value() * f.params.mean.project.weight.value()).colwise().sum() +
                         3.0 * f.params.mean.project.bias.value();
    CHECK(aggregate(h, f.params.mean).value().isApprox(plain, 1e-12));
  }
  SUBCASE("row order does not matter") {
    const std::vector<int> rev{2, 0, 1};
    const Tensor shuffled = nn::gather_rows(h, rev);
    CHECK(aggregate(shuffled, f.params.mean).value().isApprox(aggregate(h, f.params.mean).value(), 1e-14));
  }
}

TEST_CASE("encode is deterministic and ignores unused lookup rows") {
  Fixture f({4, 3, 2, true}, 8);
  const CellGraph g({Input, Conv3x3, Output}, {{0, 1}, {1, 2}, {0, 2}});
  const GraphEmbedding a = encode(g, f.params);
  const GraphEmbedding b = encode(g, f.params);
  CHECK(a.mean.value() == b.mean.value());
  CHECK(a.logvar->value() == b.logvar->value());
  f.params.lookup.mutable_value().row(type_index(MaxPool3x3)).setZero();
  CHECK(encode(g, f.params).mean.value() == a.mean.value());
}

TEST_CASE("encode is invariant to interior permutations (n <= 5)") {
  Fixture f({8, 4, 2, true}, 9);
  double worst = 0.0;
  for (int n = 2; n <= 5; ++n)
    for (const auto& g : enumerate_valid(n)) {
      const GraphEmbedding ref = encode(g, f.params);
      for (const auto& p : interior_permutations(n)) {
        const GraphEmbedding e = encode(permute(g, p), f.params);
        worst = std::max(worst, (e.mean.value() - ref.mean.value()).cwiseAbs().maxCoeff());
        worst = std::max(worst, (e.logvar->value() - ref.logvar->value()).cwiseAbs().maxCoeff());
      }
    }
  CHECK(worst <= 1e-9);
}

TEST_CASE("full encoder gradcheck (d_n=4, d_g=3)") {
  Fixture f({4, 3, 2, true}, 10);
  const CellGraph g({Input, Conv3x3, MaxPool3x3, Output}, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {1, 3}});
  std::vector<Tensor> inputs;
  for (auto& e : f.store.entries()) inputs.push_back(e.param);
  const nn::GradCheckReport r = nn::gradcheck(
      [&](std::span<const Tensor>) {
        const GraphEmbedding e = encode(g, f.params);
        return nn::add(nn::sum(nn::mul(e.mean, e.mean)), nn::sum(nn::exp(*e.logvar)));
      },
      inputs);
  INFO("max rel error " << r.max_rel_error);
  CHECK(r.passed);
}
