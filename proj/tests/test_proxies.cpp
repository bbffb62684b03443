#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "qproxy/errors.hpp"
#include "qproxy/infotheory.hpp"
#include "qproxy/proxies.hpp"

using namespace qproxy;
using doctest::Approx;
using qproxy::testing::binary_hamming;
using qproxy::testing::triangle;

namespace {

double h2(double a) {
  if (a <= 0.0 || a >= 1.0) return 0.0;
  return -(a * std::log2(a) + (1 - a) * std::log2(1 - a));
}

// d(a || q) in bits, written out from the definition.
double d2(double a, double q) {
  double v = 0.0;
  if (a > 0) v += a * std::log2(a / q);
  if (a < 1) v += (1 - a) * std::log2((1 - a) / (1 - q));
  return v;
}

// Binary source, singleton balls, P_Y = (p, 1 - p): the ball masses are p and 1 - p.
double binary_cond_grid(double eps, double px0, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double p = step; p < 1.0; p += step) {
    const double a0 = std::max(1 - eps, p);
    const double a1 = std::max(1 - eps, 1 - p);
    best = std::min(best, px0 * d2(a0, p) + (1 - px0) * d2(a1, 1 - p));
  }
  return best;
}

// Same setting, averaged budget: a grid over p and over alpha(0) with
// alpha(1) set by the budget (the objective is nondecreasing in each alpha
// above its ball mass, so the budget binds or both alphas sit at the masses).
double binary_excess_grid(double eps, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double p = step; p < 1.0; p += step) {
    if (p / 2 + (1 - p) / 2 >= 1 - eps) return 0.0;
    for (double a0 = p; a0 <= 1.0 + 1e-12; a0 += step / 4) {
      const double a1 = std::clamp(2 * (1 - eps) - a0, 1 - p, 1.0);
      if ((a0 + a1) / 2 < 1 - eps - 1e-12) continue;
      best = std::min(best, 0.5 * d2(std::min(a0, 1.0), p) + 0.5 * d2(a1, 1 - p));
    }
  }
  return best;
}

// Guaranteed objective minimized over a simplex grid, independent of the library oracle.
double guaranteed_grid(const InstanceSpec& inst, double d, int steps) {
  const auto ball = ball_table(inst, d);
  const std::size_t n = inst.reproduction_size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> k(n, 0);
  auto eval = [&] {
    double v = 0.0;
    for (std::size_t x = 0; x < inst.source_size(); ++x) {
      double mass = 0.0;
      for (std::size_t y = 0; y < n; ++y)
        if (ball.contains(x, y)) mass += static_cast<double>(k[y]) / steps;
      if (mass <= 0.0) return;
      v -= inst.px()[x] * std::log2(mass);
    }
    best = std::min(best, v);
  };
  // Compositions of `steps` into n parts.
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    if (i + 1 == n) {
      k[i] = left;
      eval();
      return;
    }
    for (int v = 0; v <= left; ++v) {
      k[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, steps);
  return best;
}

ProxySolution with_kernel(ProxyKind kind, const InstanceSpec& inst, double d,
                          const ReproductionDistribution& py, const ConditionalKernel& k) {
  ProxySolution s;
  s.kind = kind;
  s.d = d;
  s.py = py;
  s.kernel = k;
  s.alpha = AlphaProfile::ones(inst.source_size());
  return s;
}

}  // namespace

TEST_CASE("guaranteed kernel construction") {
  const auto bin = binary_hamming();
  const auto k = construct_kernel_guaranteed(ReproductionDistribution::uniform(2),
                                             ball_table(bin, 0.0));
  CHECK(k(0, 0) == 1.0);
  CHECK(k(0, 1) == 0.0);
  CHECK(k(1, 1) == 1.0);

  const auto t = construct_kernel_guaranteed(ReproductionDistribution::uniform(3),
                                             ball_table(triangle(), 1.0));
  for (std::size_t x = 0; x < 3; ++x) {
    CHECK(t(x, x) == Approx(0.5));
    CHECK(t(x, (x + 1) % 3) == Approx(0.5));
    CHECK(t(x, (x + 2) % 3) == 0.0);
  }

  const auto full = construct_kernel_guaranteed(ReproductionDistribution{{0.2, 0.8}},
                                                ball_table(bin, 1.0));
  CHECK(full(0, 0) == Approx(0.2));
  CHECK(full(0, 1) == Approx(0.8));
}

TEST_CASE("conditional kernel construction") {
  const auto bin = binary_hamming();
  const auto ball = ball_table(bin, 0.0);
  const auto py = ReproductionDistribution::uniform(2);
  const auto ones = construct_kernel_cond(py, ball, AlphaProfile::ones(2));
  CHECK(ones.rows == construct_kernel_guaranteed(py, ball).rows);

  const auto k = construct_kernel_cond(py, ball, AlphaProfile{{0.9, 0.9}, 0.0});
  CHECK(k(0, 0) == Approx(0.9));
  CHECK(k(0, 1) == Approx(0.1));
  CHECK(k(1, 0) == Approx(0.1));
  CHECK(k(1, 1) == Approx(0.9));

  const auto one = InstanceSpec::create({1.0}, RealMatrix::from_rows({{0, 1, 1}}));
  const auto k3 = construct_kernel_cond(ReproductionDistribution{{0.5, 0.25, 0.25}},
                                        ball_table(one, 0.0), AlphaProfile{{0.8}, 0.0});
  CHECK(k3(0, 0) == Approx(0.8));
  CHECK(k3(0, 1) == Approx(0.1));
  CHECK(k3(0, 2) == Approx(0.1));
}

TEST_CASE("threshold alpha rule") {
  const auto bin = binary_hamming();
  const auto ball = ball_table(bin, 0.0);
  const ReproductionDistribution py{{0.2, 0.8}};

  const auto zero = alpha_threshold(py, ball, bin.px(), 0.0);
  CHECK(zero.alpha == std::vector<double>{1.0, 1.0});
  CHECK(zero.q == 0.0);

  const auto wide = alpha_threshold(py, ball, bin.px(), 0.45);
  CHECK(wide.q == Approx(0.8));
  CHECK(wide.alpha[0] == Approx(0.2));
  CHECK(wide.alpha[1] == 1.0);
  CHECK(wide.expectation(bin.px()) == Approx(0.6));

  const auto narrow = alpha_threshold(py, ball, bin.px(), 0.15);
  CHECK(narrow.q == Approx(0.2));
  CHECK(narrow.alpha == std::vector<double>{1.0, 1.0});
}

TEST_CASE("optimal alpha meets the budget and beats the threshold rule") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = qproxy::testing::random_case(rng, 4, 4);
    const auto ball = ball_table(c.instance, c.d);
    const ReproductionDistribution py{qproxy::testing::random_distribution(rng, 4)};
    const double eps = 0.5 * qproxy::testing::unit(rng);
    const auto& px = c.instance.px();
    const auto opt = alpha_optimal(py, ball, px, eps);
    const auto thr = alpha_threshold(py, ball, px, eps);
    CHECK(opt.expectation(px) >= 1 - eps - 1e-9);
    for (std::size_t x = 0; x < 4; ++x) {
      CHECK(opt.alpha[x] >= ball.mass(x, py.py) - 1e-12);
      CHECK(opt.alpha[x] <= 1.0);
    }
    CHECK(alpha_objective(px, ball, py, opt).nats() <=
          alpha_objective(px, ball, py, thr).nats() + 1e-12);
  }
}

TEST_CASE("guaranteed solver values") {
  CHECK(solve_r_guaranteed(binary_hamming(), 0.0).value.bits() == Approx(1.0).epsilon(1e-9));
  CHECK(solve_r_guaranteed(binary_hamming(), 1.0).value.bits() == Approx(0.0));
  const auto tri = solve_r_guaranteed(triangle(), 1.0);
  CHECK(tri.value.bits() == Approx(std::log2(1.5)).epsilon(1e-9));
  CHECK(tri.converged);
  for (double p : tri.py.py) CHECK(p == Approx(1.0 / 3));
  CHECK(solve_r_guaranteed(triangle(), 2.0).value.bits() == Approx(0.0));
  CHECK_THROWS_AS(solve_r_guaranteed(triangle(), 0.0 - 1e-3), std::invalid_argument);
}

TEST_CASE("infeasible targets raise") {
  const auto inst = InstanceSpec::create({0.5, 0.5}, RealMatrix::from_rows({{0, 1}, {5, 5}}));
  CHECK_THROWS_AS(solve_r_guaranteed(inst, 1.0), InfeasibleError);
  CHECK_THROWS_AS(solve_r_cond_excess(inst, 1.0, 0.3), InfeasibleError);
  CHECK_THROWS_AS(solve_r_excess(inst, 1.0, 0.3), InfeasibleError);
  CHECK_NOTHROW(solve_r_excess(inst, 1.0, 0.6));
}

TEST_CASE("conditional excess solver on the binary instance") {
  const auto bin = binary_hamming();
  const auto g = solve_r_guaranteed(bin, 0.0);
  CHECK(solve_r_cond_excess(bin, 0.0, 0.0).value.bits() ==
        Approx(g.value.bits()).epsilon(1e-10));
  CHECK(solve_r_cond_excess(bin, 0.0, 0.5).value.bits() == Approx(0.0).epsilon(1e-9));
  for (double eps : {0.05, 0.1, 0.25, 0.4}) {
    const double r = solve_r_cond_excess(bin, 0.0, eps).value.bits();
    CHECK(std::abs(r - (1 - h2(eps))) < 1e-6);
    CHECK(std::abs(r - binary_cond_grid(eps, 0.5, 1e-4)) < 1e-6);
  }
}

TEST_CASE("conditional excess solver with a skewed source and per-letter budgets") {
  const auto bin = binary_hamming(0.3);
  const double r = solve_r_cond_excess(bin, 0.0, 0.1).value.bits();
  CHECK(std::abs(r - binary_cond_grid(0.1, 0.3, 1e-5)) < 1e-6);
  const std::vector<double> profile{0.1, 0.3};
  const auto s = solve_r_cond_excess(bin, 0.0, profile);
  CHECK(s.eps_profile == profile);
  CHECK(s.value.bits() <= r + 1e-9);
}

TEST_CASE("excess solver on the binary instance") {
  const auto bin = binary_hamming();
  CHECK(solve_r_excess(bin, 0.0, 0.0).value.bits() == Approx(1.0).epsilon(1e-9));
  CHECK(solve_r_excess(bin, 0.0, 0.5).value.bits() == Approx(0.0).epsilon(1e-9));
  const auto s = solve_r_excess(bin, 0.0, 0.1);
  CHECK(s.converged);
  CHECK(std::abs(s.value.bits() - binary_excess_grid(0.1, 1e-3)) < 1e-3);
  CHECK(s.value.bits() <= binary_excess_grid(0.1, 1e-3) + 1e-9);
  CHECK(s.value.bits() <= 1 - h2(0.1) + 1e-9);
  CHECK(s.alpha.expectation(bin.px()) >= 0.9 - 1e-9);
}

TEST_CASE("expected-distortion solver matches the binary closed form") {
  const auto bin = binary_hamming();
  for (double d : {0.05, 0.11, 0.25}) {
    const auto s = solve_r_expected(bin, d);
    CHECK(std::abs(s.value.bits() - (1 - h2(d))) < 1e-5);
    CHECK(s.lambda_star == Approx(std::log((1 - d) / d)).epsilon(1e-4));
    CHECK(s.distortion == Approx(d).epsilon(1e-8));
    CHECK(csiszar_residual(bin, s) <= 1e-4);
  }
  CHECK(solve_r_expected(bin, 0.5).value.bits() == Approx(0.0));
  CHECK(solve_r_expected(bin, 1.0).value.bits() == Approx(0.0));
  CHECK_THROWS_AS(solve_r_expected(bin, 0.0), DminViolation);
}

TEST_CASE("objective is nonincreasing along the iterations") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  std::mt19937_64 rng(8);
  auto check_trace = [](const std::vector<double>& trace) {
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i)
      CHECK(trace[i] <= trace[i - 1] + 1e-12 * std::max(1.0, std::abs(trace[i - 1])));
  };
  std::vector<double> trace;
  SolverOptions opts;
  opts.objective_trace = &trace;
  for (double d : {0.2, 0.4}) {
    trace.clear();
    solve_r_guaranteed(inst, d, opts);
    check_trace(trace);
    trace.clear();
    solve_r_cond_excess(inst, d, 0.1, opts);
    check_trace(trace);
    trace.clear();
    solve_r_excess(inst, d, 0.1, opts);
    check_trace(trace);
  }
  for (int trial = 0; trial < 20; ++trial) {
    auto c = qproxy::testing::random_case(rng, 4, 4);
    trace.clear();
    solve_r_guaranteed(c.instance, c.d, opts);
    if (trace.size() >= 2) check_trace(trace);
  }
}

TEST_CASE("guaranteed solver matches independent grid searches") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 15; ++trial) {
    auto c = qproxy::testing::random_case(rng, 3, 3);
    const double r = solve_r_guaranteed(c.instance, c.d).value.bits();
    const double grid = guaranteed_grid(c.instance, c.d, 400);
    CHECK(r <= grid + 1e-9);
    CHECK(grid - r < 5e-3);
    const double lib = oracle_grid_min(c.instance, c.d, 0.0, ProxyKind::guaranteed, 1e-3).bits();
    CHECK(std::abs(lib - r) <= 1e-3);
  }
}

TEST_CASE("library oracle examples") {
  CHECK(oracle_grid_min(triangle(), 1.0, 0.0, ProxyKind::guaranteed, 1e-3).bits() ==
        Approx(std::log2(1.5)).epsilon(1e-6));
  CHECK(oracle_grid_min(binary_hamming(), 0.0, 0.0, ProxyKind::guaranteed, 1e-3).bits() ==
        Approx(1.0).epsilon(1e-9));
  CHECK(oracle_grid_min(binary_hamming(), 0.0, 0.5, ProxyKind::cond, 1e-3).bits() ==
        Approx(0.0));
  const auto big = InstanceSpec::create(std::vector<double>(5, 0.2), RealMatrix(5, 5, 0.0));
  CHECK_THROWS_AS(oracle_grid_min(big, 0.0, 0.0, ProxyKind::guaranteed, 1e-3), SearchTooLarge);
}

TEST_CASE("reduction chain and monotonicity on random instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    auto c = qproxy::testing::random_case(rng, 4, 4);
    const double g = solve_r_guaranteed(c.instance, c.d).value.nats();
    double prev_c = g;
    double prev_e = g;
    for (double eps : {0.05, 0.1, 0.25}) {
      const double rc = solve_r_cond_excess(c.instance, c.d, eps).value.nats();
      const double re = solve_r_excess(c.instance, c.d, eps).value.nats();
      CHECK(re <= rc + 1e-9);
      CHECK(rc <= g + 1e-9);
      CHECK(rc <= prev_c + 1e-9);
      CHECK(re <= prev_e + 1e-9);
      prev_c = rc;
      prev_e = re;
    }
    const double g_hi = solve_r_guaranteed(c.instance, c.d + 0.1).value.nats();
    CHECK(g_hi <= g + 1e-9);
  }
}

TEST_CASE("optimality residuals") {
  const auto tri = triangle();
  const auto ball = ball_table(tri, 1.0);
  const auto py = ReproductionDistribution::uniform(3);
  const auto sym = with_kernel(ProxyKind::guaranteed, tri, 1.0, py,
                               construct_kernel_guaranteed(py, ball));
  CHECK(verify_optimality(ProxyKind::guaranteed, tri.px(), sym, ball).residual < 1e-6);

  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  for (double d : {0.2, 0.4}) {
    const auto b = ball_table(inst, d);
    const auto g = solve_r_guaranteed(inst, d);
    CHECK(verify_optimality(ProxyKind::guaranteed, inst.px(), g, b).residual <= 1e-9);
    const auto ce = solve_r_cond_excess(inst, d, 0.1);
    CHECK(verify_optimality(ProxyKind::cond, inst.px(), ce, b).residual <= 1e-9);
    const auto ex = solve_r_excess(inst, d, 0.1);
    const auto rep = verify_optimality(ProxyKind::excess, inst.px(), ex, b);
    CHECK(rep.residual <= 1e-9);
    CHECK(rep.alpha_feasible);

    // Mixing 10% uniform into one row breaks the condition.
    for (auto* s : {&g, &ce, &ex}) {
      ProxySolution bad = *s;
      for (std::size_t y = 0; y < inst.reproduction_size(); ++y)
        bad.kernel.rows(0, y) = 0.9 * bad.kernel.rows(0, y) + 0.1 / inst.reproduction_size();
      CHECK(verify_optimality(s->kind, inst.px(), bad, b).residual > 0.01);
    }
  }
}

TEST_CASE("Markov relation at solver outputs") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  std::vector<double> lambdas;
  for (int i = 0; i < 50; ++i) lambdas.push_back(0.4 * i);
  for (double d : {0.2, 0.4}) {
    const auto ball = ball_table(inst, d);
    CHECK(markov_min_gap(inst, ball, solve_r_guaranteed(inst, d).py, lambdas) >= -1e-12);
    CHECK(markov_min_gap(inst, ball, solve_r_excess(inst, d, 0.1).py, lambdas) >= -1e-12);
    CHECK(markov_min_gap(inst, ball, solve_r_expected(inst, d).py, lambdas) >= -1e-12);
  }
}

TEST_CASE("solutions induce their marginal and agree with the expectation form") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  for (const auto& s : {solve_r_guaranteed(inst, 0.3), solve_r_cond_excess(inst, 0.3, 0.2),
                        solve_r_excess(inst, 0.3, 0.2)}) {
    const auto marg = s.kernel.marginal(inst.px());
    for (std::size_t y = 0; y < marg.size(); ++y) CHECK(std::abs(marg[y] - s.py[y]) < 1e-9);
    CHECK(std::abs(s.value.nats() - s.proxy_objective.nats()) < 1e-8);
    CHECK(s.kernel.max_row_defect() < 1e-12);
  }
}

TEST_CASE("iteration limit reports the best iterate") {
  const auto inst = load_instance(std::string(QPROXY_DATA_DIR) + "/instances/random_5x5.json");
  SolverOptions opts;
  opts.max_iter = 2;
  try {
    solve_r_guaranteed(inst, 0.3, opts);
    FAIL("expected NotConverged");
  } catch (const NotConverged& e) {
    CHECK_FALSE(e.best().converged);
    CHECK(e.best().value.nats() > 0.0);
  }
}
