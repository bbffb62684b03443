// Brute-force grid oracle for the expectation-form proxy objectives. Shares
// nothing with the solvers beyond the ball table: objectives are tabulated
// per letter on the grid of ball masses k/N.
#include <cmath>
#include <limits>
#include <vector>

#include "qproxy/proxies.hpp"

namespace qproxy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bernoulli_kl(double a, double q) {
  auto term = [](double u, double v) {
    if (u == 0.0) return 0.0;
    if (v == 0.0) return kInf;
    return u * std::log(u / v);
  };
  return term(a, q) + term(1.0 - a, 1.0 - q);
}

// max over mu >= 0 of mu (1 - eps) - sum_x px log(1 - B_x + B_x e^mu), the
// dual of min E[d(alpha || B)] s.t. E[alpha] >= 1 - eps. Golden-section search.
double excess_dual(const std::vector<double>& px, const std::vector<double>& b, double eps) {
  const double target = 1.0 - eps;
  double reachable = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x)
    if (b[x] > 0.0) reachable += px[x];
  if (reachable < target - 1e-15) return kInf;

  auto dual = [&](double mu) {
    double s = mu * target;
    for (std::size_t x = 0; x < px.size(); ++x) {
      if (b[x] <= 0.0) continue;
      // log(1 - B + B e^mu) = mu + log(B + (1 - B) e^-mu)
      s -= px[x] * (mu + std::log(b[x] + (1.0 - b[x]) * std::exp(-mu)));
    }
    return s;
  };

  double hi = 1.0;
  while (dual(2.0 * hi) > dual(hi) && hi < 1e3) hi *= 2.0;
  hi *= 2.0;
  double lo = 0.0;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - r * (hi - lo);
  double c = lo + r * (hi - lo);
  double fa = dual(a);
  double fc = dual(c);
  for (int i = 0; i < 120; ++i) {
    if (fa < fc) {
      lo = a;
      a = c;
      fa = fc;
      c = lo + r * (hi - lo);
      fc = dual(c);
    } else {
      hi = c;
      c = a;
      fc = fa;
      a = hi - r * (hi - lo);
      fa = dual(a);
    }
  }
  return std::max({dual(0.0), fa, fc, 0.0});
}

}  // namespace

InfoValue oracle_grid_min(const InstanceSpec& instance, double d, double eps, ProxyKind mode,
                          double step) {
  const std::size_t n = instance.reproduction_size();
  const std::size_t m = instance.source_size();
  if (n > 4) throw SearchTooLarge("grid oracle supports at most 4 reproduction letters");
  if (mode == ProxyKind::expected) throw std::invalid_argument("grid oracle has no expected mode");
  if (!(step > 0.0 && step <= 0.01)) throw std::invalid_argument("grid step must lie in (0, 0.01]");

  const long grid = std::lround(1.0 / step);
  const BallTable ball(instance, d);
  const auto& px = instance.px();

  // cost[x][k] = contribution of letter x when its ball carries mass k / grid.
  std::vector<std::vector<double>> cost;
  if (mode != ProxyKind::excess) {
    cost.assign(m, std::vector<double>(grid + 1, 0.0));
    for (std::size_t x = 0; x < m; ++x)
      for (long k = 0; k <= grid; ++k) {
        const double q = static_cast<double>(k) / static_cast<double>(grid);
        if (mode == ProxyKind::guaranteed)
          cost[x][k] = k == 0 ? kInf : -px[x] * std::log(q);
        else
          cost[x][k] = px[x] * bernoulli_kl(std::max(1.0 - eps, q), q);
      }
  }

  std::vector<long> counts(n, 0);
  std::vector<long> ball_counts(m, 0);
  std::vector<double> masses(m);
  double best = kInf;

  auto evaluate = [&] {
    if (mode == ProxyKind::excess) {
      for (std::size_t x = 0; x < m; ++x)
        masses[x] = static_cast<double>(ball_counts[x]) / static_cast<double>(grid);
      best = std::min(best, excess_dual(px, masses, eps));
      return;
    }
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) s += cost[x][ball_counts[x]];
    if (s < best) best = s;
  };

  auto assign = [&](std::size_t y, long k) {
    const long delta = k - counts[y];
    counts[y] = k;
    for (std::size_t x = 0; x < m; ++x)
      if (ball.contains(x, y)) ball_counts[x] += delta;
  };

  // Last two letters share `remaining`: a flat scan over table lookups, with
  // each ball count affine in the split point k.
  std::vector<const double*> base(m);
  std::vector<long> stride(m);
  auto scan_last_two = [&](long remaining) {
    const std::size_t y1 = n - 2;
    const std::size_t y2 = n - 1;
    for (std::size_t x = 0; x < m; ++x) {
      const long in1 = ball.contains(x, y1) ? 1 : 0;
      const long in2 = ball.contains(x, y2) ? 1 : 0;
      base[x] = cost[x].data() + ball_counts[x] + in2 * remaining;
      stride[x] = in1 - in2;
    }
    for (long k = 0; k <= remaining; ++k) {
      double s = 0.0;
      for (std::size_t x = 0; x < m; ++x) s += base[x][stride[x] * k];
      if (s < best) best = s;
    }
  };

  // Compositions of `grid` into n nonnegative parts, the last part implied.
  auto recurse = [&](auto&& self, std::size_t y, long remaining) -> void {
    if (mode != ProxyKind::excess && n >= 2 && y + 2 == n) {
      scan_last_two(remaining);
      return;
    }
    if (y + 1 == n) {
      assign(y, remaining);
      evaluate();
      assign(y, 0);
      return;
    }
    for (long k = 0; k <= remaining; ++k) {
      assign(y, k);
      self(self, y + 1, remaining - k);
    }
    assign(y, 0);
  };
  recurse(recurse, 0, grid);
  return InfoValue::from_nats(best);
}

}  // namespace qproxy
