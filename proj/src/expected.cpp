// Minimal mutual information under an expected-distortion constraint:
// Blahut-Arimoto at fixed slope, bisection on the slope to hit the target
// distortion, and a secant estimate of -R'(d).
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qproxy/proxies.hpp"

namespace qproxy {

namespace {

constexpr double kRevivedMass = 1e-10;

struct BaResult {
  ConditionalKernel kernel;
  ReproductionDistribution py;
  double distortion = 0.0;
  double rate = 0.0;  // nats
  std::size_t iterations = 0;
  bool converged = false;
};

// Blahut-Arimoto at slope `lambda`, warm-started from `py` (updated in place).
// Stops once |log c(y)| < tol on the support and no clamped letter has c(y) > 1.
BaResult blahut_arimoto(const InstanceSpec& instance, double lambda, ReproductionDistribution& py,
                        const SolverOptions& opts) {
  const auto& px = instance.px();
  const std::size_t m = px.size();
  const std::size_t n = instance.reproduction_size();
  std::vector<double> log_z(m);
  std::vector<double> terms(n);
  std::vector<double> c(n);

  auto normalizers = [&] {
    for (std::size_t x = 0; x < m; ++x) {
      terms.clear();
      for (std::size_t y = 0; y < n; ++y)
        if (py[y] > 0.0) terms.push_back(std::log(py[y]) - lambda * instance.dist(x, y));
      log_z[x] = log_sum_exp(terms);
    }
  };

  BaResult res;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    normalizers();
    for (std::size_t y = 0; y < n; ++y) {
      c[y] = 0.0;
      for (std::size_t x = 0; x < m; ++x)
        c[y] += px[x] * std::exp(-lambda * instance.dist(x, y) - log_z[x]);
    }
    // Fixed point: c(y) = 1 on the support and c(y) <= 1 off it. Letters
    // clamped at an earlier slope come back only when c(y) > 1.
    double worst = 0.0;
    bool revived = false;
    for (std::size_t y = 0; y < n; ++y) {
      if (py[y] > 0.0)
        worst = std::max(worst, std::abs(std::log(c[y])));
      else if (c[y] > 1.0 + opts.tol)
        revived = true;
    }
    if (!revived && worst < opts.tol) {
      res.converged = true;
      break;
    }
    double total = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (py[y] > 0.0) {
        py.py[y] *= c[y];
        if (py.py[y] < opts.support_floor) py.py[y] = 0.0;
      } else if (c[y] > 1.0 + opts.tol) {
        py.py[y] = kRevivedMass;
      }
      total += py.py[y];
    }
    for (double& v : py.py) v /= total;
  }

  normalizers();
  res.kernel.rows = RealMatrix(m, n);
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (py[y] > 0.0)
        res.kernel.rows(x, y) = std::exp(std::log(py[y]) - lambda * instance.dist(x, y) - log_z[x]);
  res.py = res.kernel.marginal(px);
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < n; ++y)
      res.distortion += px[x] * res.kernel(x, y) * instance.dist(x, y);
  res.rate = mutual_information(px, res.kernel).nats();
  return res;
}

double min_distortion(const InstanceSpec& instance) {
  double s = 0.0;
  for (std::size_t x = 0; x < instance.source_size(); ++x) {
    const auto r = instance.dist().row(x);
    s += instance.px()[x] * *std::min_element(r.begin(), r.end());
  }
  return s;
}

// Smallest distortion reachable at zero rate, and the letter achieving it.
std::pair<double, std::size_t> zero_rate_distortion(const InstanceSpec& instance) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t y = 0; y < instance.reproduction_size(); ++y) {
    double s = 0.0;
    for (std::size_t x = 0; x < instance.source_size(); ++x)
      s += instance.px()[x] * instance.dist(x, y);
    if (s < best) {
      best = s;
      arg = y;
    }
  }
  return {best, arg};
}

struct CurvePoint {
  BaResult ba;
  double lambda = 0.0;
  bool converged = true;
};

// Bisection on lambda so the Blahut-Arimoto distortion meets d from below.
CurvePoint solve_at(const InstanceSpec& instance, double d, const SolverOptions& opts) {
  const auto [d_max, y0] = zero_rate_distortion(instance);
  CurvePoint out;
  if (d >= d_max) {
    out.ba.kernel.rows = RealMatrix(instance.source_size(), instance.reproduction_size());
    for (std::size_t x = 0; x < instance.source_size(); ++x) out.ba.kernel.rows(x, y0) = 1.0;
    out.ba.py = out.ba.kernel.marginal(instance.px());
    out.ba.distortion = d_max;
    return out;
  }

  ReproductionDistribution py = ReproductionDistribution::uniform(instance.reproduction_size());
  double lo = 0.0;
  double hi = 1.0;
  BaResult at_hi = blahut_arimoto(instance, hi, py, opts);
  out.converged = at_hi.converged;
  while (at_hi.distortion > d) {
    lo = hi;
    hi *= 2.0;
    at_hi = blahut_arimoto(instance, hi, py, opts);
    out.converged = out.converged && at_hi.converged;
    if (hi > 1e8) break;
  }
  const double scale = std::max(1.0, instance.max_distortion());
  for (int i = 0; i < 200; ++i) {
    if (hi - lo <= 1e-13 * hi || std::abs(at_hi.distortion - d) <= 1e-14 * scale) break;
    const double mid = 0.5 * (lo + hi);
    ReproductionDistribution trial = at_hi.py;
    BaResult r = blahut_arimoto(instance, mid, trial, opts);
    out.converged = out.converged && r.converged;
    if (r.distortion > d) {
      lo = mid;
    } else {
      hi = mid;
      at_hi = std::move(r);
    }
  }
  out.ba = std::move(at_hi);
  out.lambda = hi;
  return out;
}

}  // namespace

ProxySolution solve_r_expected(const InstanceSpec& instance, double d, const SolverOptions& opts) {
  const double d_min = min_distortion(instance);
  if (!(d > d_min))
    throw DminViolation("expected-distortion target " + std::to_string(d) +
                        " does not exceed d_min = " + std::to_string(d_min));

  CurvePoint at = solve_at(instance, d, opts);

  ProxySolution sol;
  sol.kind = ProxyKind::expected;
  sol.d = d;
  sol.kernel = at.ba.kernel;
  sol.py = at.ba.py;
  sol.value = mutual_information(instance.px(), sol.kernel);
  sol.proxy_objective = sol.value;
  sol.distortion = at.ba.distortion;
  sol.iterations = at.ba.iterations;
  sol.lambda_parametric = at.lambda;
  sol.alpha = AlphaProfile::ones(instance.source_size());

  // Two-sided secant on the rate-distortion curve, one-sided near d_min.
  const auto [d_max, y0] = zero_rate_distortion(instance);
  (void)y0;
  if (d >= d_max) {
    sol.lambda_star = 0.0;
  } else {
    const double h = std::min(1e-4 * std::max(d_max - d_min, 1e-12), 0.5 * (d - d_min));
    const CurvePoint up = solve_at(instance, d + h, opts);
    const CurvePoint down = solve_at(instance, d - h, opts);
    at.converged = at.converged && up.converged && down.converged;
    sol.lambda_star = (down.ba.rate - up.ba.rate) / (2.0 * h);
  }
  sol.residual = csiszar_residual(instance, sol);
  sol.converged = at.converged;
  if (!sol.converged) throw NotConverged(std::move(sol));
  return sol;
}

double csiszar_residual(const InstanceSpec& instance, const ProxySolution& solution) {
  const auto& px = instance.px();
  const auto marginal = solution.kernel.marginal(px);
  const double lambda = solution.lambda_star;
  const double d = solution.d;
  double worst = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    const auto row = instance.dist().row(x);
    const double tilted = tilted_information(marginal.py, row, lambda, d);
    for (std::size_t y = 0; y < marginal.size(); ++y) {
      const double k = solution.kernel(x, y);
      if (k <= 0.0) continue;
      const double rhs = tilted - lambda * row[y] + lambda * d;
      worst = std::max(worst, std::abs(std::log(k / marginal[y]) - rhs));
    }
  }
  return worst;
}

}  // namespace qproxy
