#include "doctest.h"

#include <cmath>
#include <random>

#include "vsgae/gradcheck.hpp"
#include "vsgae/tensor.hpp"

using namespace vsgae::nn;

namespace {

Tensor random_leaf(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return Tensor(m, true);
}

// Weighted sum so that every output entry gets a distinct upstream gradient.
Tensor probe(const Tensor& y) {
  Matrix w(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return sum(mul(y, Tensor(w)));
}

void expect_gradcheck(const ScalarFn& f, std::vector<Tensor> inputs) {
  const GradCheckReport r = gradcheck(f, inputs);
  INFO("max rel error " << r.max_rel_error << " at input " << r.worst_input << "[" << r.worst_index
                        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.checked > 0);
  CHECK(r.passed);
}

}  // namespace

TEST_CASE("linear forward") {
  const Tensor x(Matrix{{1.0, 2.0, 3.0}, {-1.0, 0.5, 4.0}});
  const Tensor eye(Matrix::Identity(3, 3));
  const Tensor zero_b(Matrix::Zero(1, 3));
  CHECK(linear(x, eye, zero_b).value().isApprox(x.value()));
  const Tensor b(Matrix{{0.1, 0.2}});
  const Tensor w(Matrix::Random(3, 2));
  const Matrix out = linear(Tensor(Matrix::Zero(2, 3)), w, b).value();
  CHECK(out.row(0).isApprox(b.value()));
  CHECK(out.row(1).isApprox(b.value()));
  CHECK_THROWS_AS(linear(x, Tensor(Matrix::Zero(2, 2)), b), std::invalid_argument);
}

TEST_CASE("gru_cell zero-parameter cases") {
  const Tensor x(Matrix{{0.3, -1.2, 0.7, 2.0}});
  const Tensor h(Matrix{{1.0, -2.0}});
  const Tensor w_ih(Matrix::Zero(4, 6)), w_hh(Matrix::Zero(2, 6)), b(Matrix::Zero(1, 6));
  CHECK(gru_cell(x, h, w_ih, w_hh, b, b).value().isApprox(0.5 * h.value()));
  CHECK(gru_cell(x, Tensor(Matrix::Zero(1, 2)), w_ih, w_hh, b, b).value().isZero());
  CHECK_THROWS_AS(gru_cell(x, h, Tensor(Matrix::Zero(3, 6)), w_hh, b, b), std::invalid_argument);
}

TEST_CASE("gru_cell matches a hand-written reference") {
  Rng rng(3);
  const Tensor x = random_leaf(1, 3, rng), h = random_leaf(1, 2, rng);
  const Tensor w_ih = random_leaf(3, 6, rng), w_hh = random_leaf(2, 6, rng);
  const Tensor b_ih = random_leaf(1, 6, rng), b_hh = random_leaf(1, 6, rng);
  const Matrix gi = x.value() * w_ih.value() + b_ih.value();
  const Matrix gh = h.value() * w_hh.value() + b_hh.value();
  auto s = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const Matrix out = gru_cell(x, h, w_ih, w_hh, b_ih, b_hh).value();
  for (int j = 0; j < 2; ++j) {
    const double r = s(gi(0, j) + gh(0, j));
    const double z = s(gi(0, 2 + j) + gh(0, 2 + j));
    const double n = std::tanh(gi(0, 4 + j) + r * gh(0, 4 + j));
    CHECK(out(0, j) == doctest::Approx((1 - z) * n + z * h.value()(0, j)).epsilon(1e-14));
  }
}

TEST_CASE("softmax and sigmoid") {
  const Tensor zeros(Matrix::Zero(1, 5));
  const Matrix p = softmax(zeros).value();
  for (int i = 0; i < 5; ++i) CHECK(p(0, i) == doctest::Approx(0.2));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  const Tensor a(Matrix{{1.0, -3.0, 2.5}, {1000.0, 999.0, -1000.0}});
  const Matrix sa = softmax(a).value();
  const Matrix shifted = softmax(add_scalar(a, 17.25)).value();
  CHECK(sa.isApprox(shifted, 1e-12));
  for (int r = 0; r < 2; ++r) {
    CHECK(std::abs(sa.row(r).sum() - 1.0) < 1e-12);
    CHECK((sa.row(r).array() >= 0).all());
  }
  CHECK(sa.allFinite());
}

TEST_CASE("cross entropy and binary cross entropy from logits") {
  const Tensor logits(Matrix::Zero(1, 5));
  const int target = 1;
  CHECK(cross_entropy_logits(logits, std::span<const int>(&target, 1)).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-15));
  const std::vector<double> t{1.0};
  CHECK(bce_logits(Tensor(Matrix::Zero(1, 1)), t).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> tt{1.0, 0.0};
  const double huge = bce_logits(Tensor(Matrix{{800.0}, {-800.0}}), tt).item();
  CHECK(huge == doctest::Approx(0.0));
  CHECK(std::isfinite(bce_logits(Tensor(Matrix{{-800.0}, {800.0}}), tt).item()));
  const int bad = 5;
  CHECK_THROWS(cross_entropy_logits(logits, std::span<const int>(&bad, 1)));
}

TEST_CASE("kl divergence closed form") {
  CHECK(kl_divergence(Tensor(Matrix::Zero(1, 3)), Tensor(Matrix::Zero(1, 3))).item() == 0.0);
  CHECK(kl_divergence(Tensor(Matrix{{1.0, 0.0}}), Tensor(Matrix::Zero(1, 2))).item() ==
        doctest::Approx(0.5).epsilon(1e-14));
  const double v = kl_divergence(Tensor(Matrix::Zero(1, 1)), Tensor(Matrix::Constant(1, 1, 1.0))).item();
  CHECK(std::abs(v - (std::exp(1.0) - 2.0) / 2.0) < 1e-12);
  CHECK_THROWS_AS(kl_divergence(Tensor(Matrix::Zero(1, 2)), Tensor(Matrix::Zero(1, 3))), std::invalid_argument);
}

TEST_CASE("reparameterize") {
  const Tensor mu(Matrix{{0.5, -1.0}});
  const Tensor low(Matrix::Constant(1, 2, -1e6));
  Rng a(11), b(11);
  const Matrix za = reparameterize(mu, Tensor(Matrix::Zero(1, 2)), a).value();
  const Matrix zb = reparameterize(mu, Tensor(Matrix::Zero(1, 2)), b).value();
  CHECK(za == zb);
  Rng c(1);
  const Matrix clamped = reparameterize(mu, low, c).value();
  CHECK(((clamped - mu.value()).array().abs() < 10 * std::exp(-5.0)).all());

  Rng d(5);
  const int draws = 100000;
  double mean = 0.0;
  const Tensor lv(Matrix::Constant(1, 1, std::log(4.0)));
  const Tensor m1(Matrix::Constant(1, 1, 0.25));
  for (int i = 0; i < draws; ++i) mean += reparameterize(m1, lv, d).item();
  mean /= draws;
  CHECK(std::abs(mean - 0.25) < 3 * 2.0 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("reparameterize gradient reaches mu and logvar only") {
  Tensor mu(Matrix{{0.1, 0.2}}, true), lv(Matrix{{0.3, -0.4}}, true);
  const Matrix eps{{0.5, -1.5}};
  sum(reparameterize(mu, lv, eps)).backward();
  CHECK(mu.grad().isApprox(Matrix::Ones(1, 2)));
  CHECK(lv.grad()(0, 0) == doctest::Approx(0.5 * std::exp(0.15) * 0.5));
}

TEST_CASE("gradcheck self test") {
  Rng rng(1);
  expect_gradcheck([](std::span<const Tensor> in) { return sum(square(in[0])); }, {random_leaf(3, 4, rng)});
  const GradCheckReport r =
      gradcheck([](std::span<const Tensor> in) { return sum(square(in[0])); }, std::vector{random_leaf(2, 2, rng)});
  CHECK(r.max_rel_error < 1e-8);
  Tensor x(Matrix{{std::nan("")}}, true);
  CHECK_THROWS_AS(gradcheck([](std::span<const Tensor> in) { return sum(in[0]); }, std::vector{x}),
                  std::domain_error);
}

TEST_CASE("gradcheck of every primitive") {
  Rng rng(7);
  auto leaf = [&](Eigen::Index r, Eigen::Index c) { return random_leaf(r, c, rng); };

  SUBCASE("elementwise") {
    expect_gradcheck([](std::span<const Tensor> in) { return probe(add(in[0], in[1])); }, {leaf(2, 3), leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(sub(in[0], in[1])); }, {leaf(2, 3), leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(mul(in[0], in[1])); }, {leaf(2, 3), leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(scale(in[0], -1.7)); }, {leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(exp(in[0])); }, {leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(sigmoid(in[0])); }, {leaf(2, 3)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(tanh(in[0])); }, {leaf(2, 3)});
    Tensor r = leaf(3, 3);
    move_off_kinks(r);
    expect_gradcheck([](std::span<const Tensor> in) { return probe(relu(in[0])); }, {r});
    Tensor c = leaf(3, 3);
    for (Eigen::Index i = 0; i < c.value().size(); ++i)
      if (std::abs(std::abs(c.value().data()[i]) - 0.8) < 1e-2) c.mutable_value().data()[i] = 0.0;
    expect_gradcheck([](std::span<const Tensor> in) { return probe(clamp(in[0], -0.8, 0.8)); }, {c});
  }
  SUBCASE("linear algebra and structure") {
    expect_gradcheck([](std::span<const Tensor> in) { return probe(matmul(in[0], in[1])); }, {leaf(2, 3), leaf(3, 4)});
    expect_gradcheck([](std::span<const Tensor> in) { return sum(linear(in[0], in[1], in[2])); },
                     {leaf(3, 4), leaf(4, 2), leaf(1, 2)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(linear(in[0], in[1], in[2])); },
                     {leaf(3, 4), leaf(4, 2), leaf(1, 2)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(hcat({in[0], in[1]})); }, {leaf(2, 3), leaf(2, 1)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(vstack({in[0], in[1]})); }, {leaf(2, 3), leaf(1, 3)});
    expect_gradcheck(
        [](std::span<const Tensor> in) {
          const std::vector<int> idx{2, 0, 2};
          return probe(gather_rows(in[0], idx));
        },
        {leaf(3, 2)});
    expect_gradcheck(
        [](std::span<const Tensor> in) {
          const std::vector<int> idx{1, 1, 0, 3};
          return probe(scatter_add_rows(in[0], idx, 5));
        },
        {leaf(4, 2)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(repeat_rows(in[0], 3)); }, {leaf(1, 4)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(scale_rows(in[0], in[1])); }, {leaf(3, 2), leaf(3, 1)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(sum_rows(in[0])); }, {leaf(3, 2)});
    expect_gradcheck([](std::span<const Tensor> in) { return mean(in[0]); }, {leaf(3, 2)});
    expect_gradcheck([](std::span<const Tensor> in) { return probe(softmax(in[0])); }, {leaf(2, 5)});
  }
  SUBCASE("losses and sampling") {
    expect_gradcheck(
        [](std::span<const Tensor> in) {
          const std::vector<int> t{3, 0};
          return cross_entropy_logits(in[0], t);
        },
        {leaf(2, 5)});
    expect_gradcheck(
        [](std::span<const Tensor> in) {
          const std::vector<double> t{1.0, 0.0, 1.0};
          return bce_logits(in[0], t);
        },
        {leaf(3, 1)});
    expect_gradcheck([](std::span<const Tensor> in) { return kl_divergence(in[0], in[1]); }, {leaf(1, 3), leaf(1, 3)});
    const Matrix eps{{0.3, -1.1, 0.8}};
    expect_gradcheck([eps](std::span<const Tensor> in) { return probe(reparameterize(in[0], in[1], eps)); },
                     {leaf(1, 3), leaf(1, 3)});
  }
  SUBCASE("gru cell") {
    expect_gradcheck(
        [](std::span<const Tensor> in) { return probe(gru_cell(in[0], in[1], in[2], in[3], in[4], in[5])); },
        {leaf(3, 4), leaf(3, 2), leaf(4, 6), leaf(2, 6), leaf(1, 6), leaf(1, 6)});
  }
}

TEST_CASE("backward accumulates through shared subexpressions") {
  Tensor x(Matrix{{2.0}}, true);
  const Tensor y = mul(x, x);
  add(y, y).backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("no-grad guard stops recording") {
  Tensor x(Matrix{{2.0}}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const Tensor y = square(x);
    CHECK(y.node()->parents.empty());
  }
  CHECK(grad_enabled());
}
