#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "qproxy/infotheory.hpp"
#include "qproxy/model.hpp"
#include "qproxy/proxies.hpp"

using namespace qproxy;
using doctest::Approx;

namespace {

ConditionalKernel kernel(const std::vector<std::vector<double>>& rows) {
  return {RealMatrix::from_rows(rows)};
}

ConditionalKernel random_kernel(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  ConditionalKernel k{RealMatrix(m, n)};
  for (std::size_t x = 0; x < m; ++x) {
    const auto row = qproxy::testing::random_distribution(rng, n);
    for (std::size_t y = 0; y < n; ++y) k.rows(x, y) = row[y];
  }
  return k;
}

}  // namespace

TEST_CASE("entropy values") {
  const std::vector<double> u4(4, 0.25);
  CHECK(entropy(u4).bits() == Approx(2.0));
  CHECK(entropy(std::vector<double>{1.0, 0.0}).bits() == 0.0);
  const double oracle = -(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75));
  CHECK(entropy(std::vector<double>{0.25, 0.75}).bits() == Approx(oracle).epsilon(1e-12));
  CHECK(oracle == Approx(0.8113).epsilon(1e-4));
}

TEST_CASE("binary divergence values") {
  CHECK(binary_divergence(0.5, 0.5).nats() == 0.0);
  CHECK(binary_divergence(1.0, 0.3).nats() == Approx(std::log(1 / 0.3)));
  CHECK(binary_divergence(0.75, 0.25).bits() == Approx(0.5 * std::log2(3.0)).epsilon(1e-12));
  CHECK(binary_divergence(0.75, 0.25).bits() == Approx(0.7925).epsilon(1e-4));
  CHECK(binary_divergence(0.5, 0.0).is_infinite());
  CHECK(binary_divergence(0.0, 0.0).nats() == 0.0);
  CHECK_THROWS(binary_divergence(1.2, 0.5));
}

TEST_CASE("binary entropy values") {
  CHECK(binary_entropy(0.0).bits() == 0.0);
  CHECK(binary_entropy(0.5).bits() == Approx(1.0));
  const double h = -(0.11 * std::log2(0.11) + 0.89 * std::log2(0.89));
  CHECK(binary_entropy(0.11).bits() == Approx(h).epsilon(1e-12));
  CHECK(h == Approx(0.4999).epsilon(1e-3));
}

TEST_CASE("mutual information values") {
  const std::vector<double> px{0.5, 0.5};
  CHECK(mutual_information(px, kernel({{0.3, 0.7}, {0.3, 0.7}})).nats() == Approx(0.0));
  const std::vector<double> u3(3, 1.0 / 3);
  CHECK(mutual_information(u3, kernel({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})).nats() ==
        Approx(std::log(3.0)));
  const double bsc = 1.0 + 0.11 * std::log2(0.11) + 0.89 * std::log2(0.89);
  CHECK(mutual_information(px, kernel({{0.89, 0.11}, {0.11, 0.89}})).bits() ==
        Approx(bsc).epsilon(1e-12));
  CHECK(bsc == Approx(0.5004).epsilon(1e-3));
}

TEST_CASE("conditional divergence values") {
  const std::vector<double> px{0.4, 0.6};
  const auto k = kernel({{0.9, 0.1}, {0.2, 0.8}});
  CHECK(conditional_divergence(px, k, k.marginal(px)).nats() ==
        Approx(mutual_information(px, k).nats()).epsilon(1e-12));
  const ReproductionDistribution q{{0.3, 0.7}};
  CHECK(conditional_divergence(px, kernel({{0.3, 0.7}, {0.3, 0.7}}), q).nats() == Approx(0.0));
  const std::vector<double> one{1.0};
  CHECK(conditional_divergence(one, kernel({{1, 0}}), ReproductionDistribution{{0.5, 0.5}})
            .bits() == Approx(1.0));
}

TEST_CASE("tilted information values") {
  const std::vector<double> row{0, 1};
  const std::vector<double> u{0.5, 0.5};
  CHECK(tilted_information(u, row, 0.0, 0.3) == Approx(0.0));
  const std::vector<double> point{0.0, 1.0};
  CHECK(tilted_information(point, row, 2.0, 0.25) == Approx(2.0 * (1.0 - 0.25)));
  const double oracle = -std::log((1.0 + std::exp(-1.0)) / 2.0);
  CHECK(tilted_information(u, row, 1.0, 0.0) == Approx(oracle).epsilon(1e-12));
  CHECK(oracle == Approx(0.3799).epsilon(1e-3));
  // Large slopes must not overflow.
  CHECK(std::isfinite(tilted_information(u, row, 5000.0, 0.0)));
  CHECK(tilted_information(u, row, 5000.0, 0.0) == Approx(std::log(2.0)));
}

TEST_CASE("entropy is at most log n, with equality at uniform") {
  std::mt19937_64 rng(1);
  for (std::size_t n = 2; n <= 16; ++n) {
    const auto p = qproxy::testing::random_distribution(rng, n);
    CHECK(entropy(p).nats() <= std::log(static_cast<double>(n)) + 1e-12);
    const std::vector<double> u(n, 1.0 / static_cast<double>(n));
    CHECK(std::abs(entropy(u).nats() - std::log(static_cast<double>(n))) < 1e-9);
  }
}

TEST_CASE("binary divergence is nonnegative and unimodal around q") {
  for (double q = 0.05; q < 1.0; q += 0.05) {
    double prev = binary_divergence(0.0, q).nats();
    for (int i = 1; i <= 200; ++i) {
      const double a = i / 200.0;
      const double v = binary_divergence(a, q).nats();
      CHECK(v >= 0.0);
      if (a <= q) CHECK(v <= prev + 1e-15);
      if (a - 1.0 / 200.0 >= q) CHECK(v >= prev - 1e-15);
      prev = v;
    }
    CHECK(binary_divergence(q, q).nats() == Approx(0.0));
  }
}

TEST_CASE("conditional divergence dominates mutual information") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto px = qproxy::testing::random_distribution(rng, 3);
    const auto k = random_kernel(rng, 3, 4);
    const ReproductionDistribution q{qproxy::testing::random_distribution(rng, 4)};
    CHECK(conditional_divergence(px, k, q).nats() >= mutual_information(px, k).nats() - 1e-12);
  }
}

TEST_CASE("Markov relation between ball mass and tilted information") {
  std::mt19937_64 rng(3);
  std::vector<double> lambdas;
  for (int i = 0; i < 50; ++i) lambdas.push_back(0.5 * i);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = qproxy::testing::random_case(rng, 4, 4);
    const auto ball = ball_table(c.instance, c.d);
    const ReproductionDistribution py{qproxy::testing::random_distribution(rng, 4)};
    for (std::size_t x = 0; x < 4; ++x)
      for (double l : lambdas) {
        const double lhs = -std::log(ball.mass(x, py.py));
        CHECK(lhs >= tilted_information(py.py, c.instance.dist().row(x), l, c.d) - 1e-12);
      }
    CHECK(markov_min_gap(c.instance, ball, py, lambdas) >= -1e-12);
  }
}

TEST_CASE("info values convert and order") {
  CHECK(InfoValue::from_bits(1.0).nats() == Approx(std::log(2.0)));
  CHECK((InfoValue::from_nats(1.0) + InfoValue::infinity()).is_infinite());
  CHECK(InfoValue::from_nats(1.0) < InfoValue::from_nats(2.0));
  CHECK(InfoValue::from_bits(2.0).in(Units::bits) == Approx(2.0));
}
