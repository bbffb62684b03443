#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "qproxy/codebook.hpp"
#include "qproxy/errors.hpp"
#include "qproxy/proxies.hpp"

using namespace qproxy;
using doctest::Approx;
using qproxy::testing::binary_hamming;

namespace {

// E[floor(log2 W)] for W ~ Geometric(1/2) on {1, 2, ...}: sum_k P[W >= 2^k].
double geometric_mean_log() {
  double s = 0.0;
  for (int k = 1; k < 7; ++k) s += std::ldexp(1.0, -((1 << k) - 1));
  return s;
}

}  // namespace

TEST_CASE("Elias gamma codewords") {
  CHECK(elias_gamma(1) == "1");
  CHECK(elias_gamma(2) == "010");
  CHECK(elias_gamma(5) == "00101");
  CHECK(elias_gamma(8) == "0001000");
  CHECK_THROWS(elias_gamma(0));
}

TEST_CASE("counter generator is a pure function of its key") {
  CHECK(counter_hash(1, 2, 3, 4) == counter_hash(1, 2, 3, 4));
  CHECK(counter_hash(1, 2, 3, 4) != counter_hash(1, 2, 3, 5));
  CHECK(counter_hash(1, 2, 3, 4) != counter_hash(1, 3, 3, 4));
  CHECK(counter_hash(1, 2, 3, 4) != counter_hash(2, 2, 3, 4));
  const double u = counter_uniform(9, 0, 0, 0);
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
  CounterRng a(9, 0, 0);
  CHECK(a.uniform() == u);
}

TEST_CASE("codebooks are reproducible and extend stably") {
  const auto py = ReproductionDistribution{{0.2, 0.5, 0.3}};
  auto a = Codebook::draw(py, 100, 42, 3);
  const auto b = Codebook::draw(py, 100, 42, 3);
  CHECK(a.entries() == b.entries());
  CHECK(a.generator_id() == std::string(kGeneratorId));
  const auto prefix = a.entries();
  a.extend(400);
  CHECK(a.size() == 400);
  CHECK(std::equal(prefix.begin(), prefix.end(), a.entries().begin()));
  CHECK(Codebook::draw(py, 100, 43, 3).entries() != prefix);

  const auto sparse = Codebook::draw(ReproductionDistribution{{0.0, 1.0, 0.0}}, 50, 1);
  for (auto y : sparse.entries()) CHECK(y == 1);
}

TEST_CASE("waiting-time encoder") {
  const auto bin = binary_hamming();
  const auto ball = ball_table(bin, 0.0);
  auto cb = Codebook::draw(ReproductionDistribution{{1.0, 0.0}}, 4, 0);
  CHECK(encode_waiting(0, cb, ball) == 1);
  CHECK_THROWS_AS(encode_waiting(1, cb, ball), CodebookExhausted);

  // Find a codebook whose first entries are (0, 1).
  for (std::uint64_t s = 0;; ++s) {
    const auto c = Codebook::draw(ReproductionDistribution::uniform(2), 8, s);
    if (c.entries()[0] == 0 && c.entries()[1] == 1) {
      CHECK(encode_waiting(1, c, ball) == 2);
      CHECK(encode_waiting(0, c, ball) == 1);
      break;
    }
  }
}

TEST_CASE("waiting time is geometric for a singleton ball") {
  const auto ball = ball_table(binary_hamming(), 0.0);
  const auto py = ReproductionDistribution::uniform(2);
  const int trials = 100000;
  std::map<std::uint64_t, int> counts;
  for (int t = 0; t < trials; ++t) {
    const auto cb = Codebook::draw(py, 128, 42, static_cast<std::uint64_t>(t));
    ++counts[std::min<std::uint64_t>(encode_waiting(1, cb, ball), 11)];
  }
  double chi2 = 0.0;
  for (std::uint64_t w = 1; w <= 11; ++w) {
    const double p = w < 11 ? std::ldexp(1.0, -static_cast<int>(w)) : std::ldexp(1.0, -10);
    const double e = p * trials;
    chi2 += (counts[w] - e) * (counts[w] - e) / e;
  }
  // 99.9% quantile of chi-square with 10 degrees of freedom.
  CHECK(chi2 < 29.59);
}

TEST_CASE("give-up encoder") {
  const auto ball = ball_table(binary_hamming(), 0.0);
  const auto py = ReproductionDistribution::uniform(2);
  const int trials = 100000;
  int ones = 0;
  for (int t = 0; t < trials; ++t) {
    const auto cb = Codebook::draw(py, 128, 7, static_cast<std::uint64_t>(t));
    CounterRng rng(7, static_cast<std::uint64_t>(t), 1);
    CounterRng always(7, static_cast<std::uint64_t>(t), 1);
    CounterRng never(7, static_cast<std::uint64_t>(t), 1);
    if (encode_giveup(0, cb, ball, 0.9, rng) == 1) ++ones;
    CHECK(encode_giveup(0, cb, ball, 1.0, always) == encode_waiting(0, cb, ball));
    CHECK(encode_giveup(0, cb, ball, 0.0, never) == 1);
  }
  const double p = 0.1 + 0.9 * 0.5;
  const double se = std::sqrt(p * (1 - p) / trials);
  CHECK(std::abs(ones / static_cast<double>(trials) - p) < 4 * se);
}

TEST_CASE("simulation on the binary instance") {
  const auto bin = binary_hamming();
  const auto rep = simulate(bin, 0.0, ReproductionDistribution::uniform(2), AlphaProfile::ones(2),
                            100000, 4096, 42);
  CHECK(rep.trials == 100000);
  CHECK(rep.excess_rate == 0.0);
  CHECK(std::abs(rep.mean_log_w - geometric_mean_log()) <= 3 * rep.mean_log_w_se);
  CHECK(rep.mean_log_w <= 1.0);
  CHECK(rep.bound_ball_codelength == Approx(1.0));
  CHECK(rep.mean_log_w <= rep.bound_ball_codelength + 3 * rep.mean_log_w_se);
  CHECK(rep.entropy_w <= rep.entropy_chain_rhs + 3 * rep.mean_log_w_se);
  CHECK(rep.mean_gamma_length == Approx(2 * rep.mean_log_w + 1));
  CHECK_FALSE(rep.insufficient_length);
}

TEST_CASE("full balls need one codeword") {
  const auto bin = binary_hamming();
  const auto rep = simulate(bin, 1.0, ReproductionDistribution{{0.3, 0.7}}, AlphaProfile::ones(2),
                            1000, 16, 5);
  CHECK(rep.mean_log_w == 0.0);
  CHECK(rep.mean_gamma_length == 1.0);
  CHECK(rep.entropy_w == 0.0);
}

TEST_CASE("give-up simulation respects the budget") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  const double d = 0.3;
  const auto ball = ball_table(inst, d);
  for (double eps : {0.1, 0.25}) {
    const auto sol = solve_r_excess(inst, d, eps);
    const auto alpha = alpha_threshold(sol.py, ball, inst.px(), eps);
    const auto rep = simulate(inst, d, sol.py, alpha, 50000, 4096, 42);
    CHECK(rep.excess_rate <= eps + 3 * rep.excess_rate_se);
    for (const auto& l : rep.letters)
      CHECK(l.excess_rate <= (1 - l.alpha) + 3 * l.excess_se + 1e-12);
    CHECK(rep.mean_log_w <= rep.bound_ball_codelength + 3 * rep.mean_log_w_se);
  }
}

TEST_CASE("simulation is reproducible") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  const auto sol = solve_r_guaranteed(inst, 0.3);
  const auto a = simulate(inst, 0.3, sol.py, sol.alpha, 5000, 256, 99);
  const auto b = simulate(inst, 0.3, sol.py, sol.alpha, 5000, 256, 99);
  CHECK(a.mean_log_w == b.mean_log_w);
  CHECK(a.mean_log_w_se == b.mean_log_w_se);
  CHECK(a.entropy_w == b.entropy_w);
  CHECK(a.excess_rate == b.excess_rate);
  CHECK(a.exhausted_trials == b.exhausted_trials);
  const auto c = simulate(inst, 0.3, sol.py, sol.alpha, 5000, 256, 100);
  CHECK(a.mean_log_w != c.mean_log_w);
}

TEST_CASE("short codebooks are extended and accounted") {
  const auto bin = binary_hamming();
  const auto rep = simulate(bin, 0.0, ReproductionDistribution{{0.05, 0.95}},
                            AlphaProfile::ones(2), 2000, 2, 3);
  CHECK(rep.exhausted_trials > 0);
  CHECK(rep.insufficient_length);
  CHECK(rep.dropped_trials == 0);
}
