#include "qproxy/proxies.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace qproxy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// P_Y(B_d(x)), pinned to exactly 1 when nothing lies outside the ball.
double ball_mass(const BallTable& ball, std::size_t x, const ReproductionDistribution& py) {
  if (ball.complement_mass(x, py.py) <= 0.0) return 1.0;
  return std::min(ball.mass(x, py.py), 1.0);
}

std::vector<double> ball_masses(const BallTable& ball, const ReproductionDistribution& py) {
  std::vector<double> b(ball.source_size());
  for (std::size_t x = 0; x < b.size(); ++x) b[x] = ball_mass(ball, x, py);
  return b;
}

// Uniform over reproduction letters inside at least one supported ball, so
// every nonempty ball starts with positive mass.
ReproductionDistribution initial_py(const BallTable& ball, std::span<const double> px) {
  const std::size_t n = ball.reproduction_size();
  std::vector<double> py(n, 0.0);
  std::size_t count = 0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < px.size(); ++x)
      if (px[x] > 0.0 && ball.contains(x, y)) {
        py[y] = 1.0;
        ++count;
        break;
      }
  }
  if (count == 0) return ReproductionDistribution::uniform(n);
  for (double& v : py) v /= static_cast<double>(count);
  return {std::move(py)};
}

// Zero out entries below `floor` and renormalize; returns the mass removed.
double clamp_support(ReproductionDistribution& p, double floor) {
  double removed = 0.0;
  for (double& v : p.py)
    if (v > 0.0 && v < floor) {
      removed += v;
      v = 0.0;
    }
  const double total = std::accumulate(p.py.begin(), p.py.end(), 0.0);
  for (double& v : p.py) v /= total;
  return removed;
}

double optimality_residual(ProxyKind kind, std::span<const double> px, const BallTable& ball,
                           const ConditionalKernel& kernel, const ReproductionDistribution& marginal,
                           const AlphaProfile& alpha, std::span<const double> eps_profile) {
  double worst = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    if (px[x] == 0.0) continue;
    const double b = ball_mass(ball, x, marginal);
    const double bc = ball.complement_mass(x, marginal.py);
    double a = 1.0;
    if (kind == ProxyKind::cond) a = std::max(1.0 - eps_profile[x], b);
    if (kind == ProxyKind::excess) a = alpha.alpha[x];
    const double rhs_in = std::log(a / b);
    const double rhs_out = std::log((1.0 - a) / bc);
    for (std::size_t y = 0; y < marginal.size(); ++y) {
      const double k = kernel(x, y);
      if (k <= 0.0) continue;
      const double rhs = ball.contains(x, y) ? rhs_in : rhs_out;
      if (!std::isfinite(rhs)) return kInf;
      worst = std::max(worst, std::abs(std::log(k / marginal[y]) - rhs));
    }
  }
  return worst;
}

struct AlternatingProblem {
  ProxyKind kind;
  std::function<AlphaProfile(const ReproductionDistribution&)> alpha_rule;
  std::function<ConditionalKernel(const ReproductionDistribution&, const AlphaProfile&)> kernel;
  std::function<double(const ReproductionDistribution&, const AlphaProfile&)> objective;
  std::vector<double> eps_profile;
};

double objective_at(const AlternatingProblem& prob, const ReproductionDistribution& py) {
  try {
    return prob.objective(py, prob.alpha_rule(py));
  } catch (const Error&) {
    return kInf;
  }
}

// Line search along the last update direction, doubling the step while the
// objective keeps falling. Near a flat optimal face the plain iteration
// creeps in sublinearly; the objective is convex in P_Y, so overshooting is
// caught by the comparison and the plain update is kept.
ReproductionDistribution extrapolate(const AlternatingProblem& prob,
                                     const ReproductionDistribution& from,
                                     const ReproductionDistribution& to, double f_to) {
  ReproductionDistribution best = to;
  double f_best = f_to;
  for (double t = 2.0; t <= 1048576.0; t *= 2.0) {
    ReproductionDistribution trial = to;
    double total = 0.0;
    for (std::size_t y = 0; y < trial.size(); ++y)
      total += (trial.py[y] = std::max(0.0, from[y] + t * (to[y] - from[y])));
    if (!(total > 0.0)) break;
    for (double& v : trial.py) v /= total;
    const double f = objective_at(prob, trial);
    if (!(f < f_best)) break;
    best = std::move(trial);
    f_best = f;
  }
  return best;
}

// From the current P_Y: pick alpha, build the optimal kernel, re-marginalize.
// Each pass minimizes D(P_{Y|X} || P_Y | P_X) over one argument with the
// other fixed, so the objective cannot increase.
ProxySolution run_alternating(const AlternatingProblem& prob, const InstanceSpec& instance,
                              const BallTable& ball, const SolverOptions& opts) {
  const auto& px = instance.px();
  ProxySolution sol;
  sol.kind = prob.kind;
  sol.d = ball.threshold();
  sol.eps_profile = prob.eps_profile;

  ReproductionDistribution current = initial_py(ball, px);
  double previous = kInf;
  ConditionalKernel kernel;
  ReproductionDistribution marginal;
  AlphaProfile alpha;

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    alpha = prob.alpha_rule(current);
    const double objective = prob.objective(current, alpha);
    if (opts.objective_trace) opts.objective_trace->push_back(objective);
    kernel = prob.kernel(current, alpha);
    marginal = kernel.marginal(px);
    sol.iterations = it;
    sol.residual =
        optimality_residual(prob.kind, px, ball, kernel, marginal, alpha, prob.eps_profile);
    const double change = std::isinf(previous) ? kInf : std::abs(previous - objective);
    previous = objective;
    if (change < opts.tol && sol.residual < opts.tol) {
      sol.converged = true;
      break;
    }
    current = extrapolate(prob, current, marginal, objective_at(prob, marginal));
    sol.clamped_mass += clamp_support(current, opts.support_floor);
  }

  sol.kernel = std::move(kernel);
  sol.alpha = std::move(alpha);
  sol.py = marginal;
  sol.value = mutual_information(px, sol.kernel);
  sol.proxy_objective = InfoValue::from_nats(prob.objective(marginal, prob.alpha_rule(marginal)));
  if (!sol.converged) throw NotConverged(std::move(sol));
  return sol;
}

}  // namespace

std::string_view to_string(ProxyKind kind) {
  switch (kind) {
    case ProxyKind::guaranteed: return "guaranteed";
    case ProxyKind::cond: return "cond-excess";
    case ProxyKind::excess: return "excess";
    case ProxyKind::expected: return "expected";
  }
  return "unknown";
}

ConditionalKernel construct_kernel_guaranteed(const ReproductionDistribution& py,
                                              const BallTable& ball) {
  ConditionalKernel k{RealMatrix(ball.source_size(), py.size())};
  for (std::size_t x = 0; x < ball.source_size(); ++x) {
    const double b = ball.mass(x, py.py);
    if (b <= 0.0) throw ZeroBallMass(x);
    for (std::size_t y = 0; y < py.size(); ++y)
      if (ball.contains(x, y)) k.rows(x, y) = py[y] / b;
  }
  return k;
}

ConditionalKernel construct_kernel_cond(const ReproductionDistribution& py, const BallTable& ball,
                                        const AlphaProfile& alpha) {
  ConditionalKernel k{RealMatrix(ball.source_size(), py.size())};
  for (std::size_t x = 0; x < ball.source_size(); ++x) {
    const double a = alpha.alpha[x];
    const double b = ball.mass(x, py.py);
    const double bc = ball.complement_mass(x, py.py);
    if (a > 0.0 && b <= 0.0) throw ZeroBallMass(x);
    if (a < 1.0 && bc <= 0.0) throw ZeroComplementMass(x);
    for (std::size_t y = 0; y < py.size(); ++y) {
      if (py[y] == 0.0) continue;
      k.rows(x, y) = ball.contains(x, y) ? a * py[y] / b : (1.0 - a) * py[y] / bc;
    }
  }
  return k;
}

InfoValue guaranteed_objective(std::span<const double> px, const BallTable& ball,
                               const ReproductionDistribution& py) {
  double v = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    if (px[x] == 0.0) continue;
    const double b = ball.mass(x, py.py);
    if (b <= 0.0) return InfoValue::infinity();
    v -= px[x] * std::log(b);
  }
  return InfoValue::from_nats(std::max(v, 0.0));
}

InfoValue alpha_objective(std::span<const double> px, const BallTable& ball,
                          const ReproductionDistribution& py, const AlphaProfile& alpha) {
  double v = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    if (px[x] == 0.0) continue;
    const double b = ball_mass(ball, x, py);
    const double dx = binary_divergence(std::clamp(alpha.alpha[x], 0.0, 1.0), b).nats();
    if (std::isinf(dx)) return InfoValue::infinity();
    v += px[x] * dx;
  }
  return InfoValue::from_nats(v);
}

AlphaProfile alpha_cond(const ReproductionDistribution& py, const BallTable& ball,
                        std::span<const double> eps_profile) {
  AlphaProfile a;
  a.alpha.resize(ball.source_size());
  for (std::size_t x = 0; x < a.alpha.size(); ++x)
    a.alpha[x] = std::max(1.0 - eps_profile[x], ball_mass(ball, x, py));
  return a;
}

InfoValue cond_objective(std::span<const double> px, const BallTable& ball,
                         const ReproductionDistribution& py, std::span<const double> eps_profile) {
  return alpha_objective(px, ball, py, alpha_cond(py, ball, eps_profile));
}

AlphaProfile alpha_threshold(const ReproductionDistribution& py, const BallTable& ball,
                             std::span<const double> px, double eps) {
  const std::size_t m = px.size();
  const auto b = ball_masses(ball, py);
  const double target = 1.0 - eps;
  if (eps <= 0.0) return AlphaProfile::ones(m);

  // E[alpha] when every letter with B >= q is made typical.
  auto coverage = [&](double q) {
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) s += px[x] * (b[x] >= q ? 1.0 : b[x]);
    return s;
  };

  std::vector<double> candidates(b.begin(), b.end());
  candidates.push_back(0.0);
  candidates.push_back(1.0);
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  AlphaProfile out;
  out.alpha.assign(m, 1.0);
  bool found = false;
  for (double q : candidates) {
    if (coverage(q) >= target) {
      out.q = q;
      found = true;
      break;
    }
  }
  if (!found) throw InfeasibleBudget("no threshold meets the coverage budget");

  for (std::size_t x = 0; x < m; ++x) out.alpha[x] = b[x] >= out.q ? 1.0 : b[x];

  // Rounding can leave the budget a hair short; top it up on the atypical
  // letters nearest the threshold.
  double shortfall = target - out.expectation(px);
  if (shortfall > 0.0) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return b[i] > b[j]; });
    for (auto x : order) {
      if (shortfall <= 0.0 || px[x] == 0.0 || out.alpha[x] >= 1.0) continue;
      const double raise = std::min(1.0 - out.alpha[x], shortfall / px[x]);
      out.alpha[x] += raise;
      shortfall -= raise * px[x];
    }
  }
  return out;
}

AlphaProfile alpha_optimal(const ReproductionDistribution& py, const BallTable& ball,
                           std::span<const double> px, double eps) {
  const std::size_t m = px.size();
  const auto b = ball_masses(ball, py);
  const double target = 1.0 - eps;

  AlphaProfile out;
  out.q = alpha_threshold(py, ball, px, std::min(std::max(eps, 0.0), 1.0)).q;

  double base = 0.0;
  double reachable = 0.0;
  for (std::size_t x = 0; x < m; ++x) {
    base += px[x] * std::min(b[x], 1.0);
    if (b[x] > 0.0) reachable += px[x];
  }
  if (base >= target) {
    out.alpha.assign(b.begin(), b.end());
    for (double& a : out.alpha) a = std::min(a, 1.0);
    return out;
  }
  if (reachable < target * (1.0 - 1e-15))
    throw InfeasibleBudget("reproduction distribution cannot reach the coverage budget");

  // Stationarity: logit(alpha(x)) = logit(B(x)) + mu, with mu >= 0 set by the
  // budget. Letters with B = 0 cannot help and B = 1 letters stay at 1.
  auto alpha_at = [&](std::size_t x, double mu) {
    if (b[x] <= 0.0) return 0.0;
    if (b[x] >= 1.0) return 1.0;
    return 1.0 / (1.0 + (1.0 - b[x]) / b[x] * std::exp(-mu));
  };
  auto mean_at = [&](double mu) {
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) s += px[x] * alpha_at(x, mu);
    return s;
  };

  double lo = 0.0;
  double hi = 1.0;
  while (mean_at(hi) < target && hi < 1e4) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) >= target ? hi : lo) = mid;
  }
  out.alpha.resize(m);
  for (std::size_t x = 0; x < m; ++x) out.alpha[x] = alpha_at(x, hi);
  return out;
}

ProxySolution solve_r_guaranteed(const InstanceSpec& instance, double d, const SolverOptions& opts) {
  const BallTable ball = ball_table(instance, d);
  require_feasible(ball, instance.px(), FidelityMode::guaranteed);
  const auto& px = instance.px();
  AlternatingProblem prob{
      ProxyKind::guaranteed,
      [&](const ReproductionDistribution&) { return AlphaProfile::ones(px.size()); },
      [&](const ReproductionDistribution& p, const AlphaProfile&) {
        return construct_kernel_guaranteed(p, ball);
      },
      [&](const ReproductionDistribution& p, const AlphaProfile&) {
        return guaranteed_objective(px, ball, p).nats();
      },
      {}};
  return run_alternating(prob, instance, ball, opts);
}

ProxySolution solve_r_cond_excess(const InstanceSpec& instance, double d,
                                  std::span<const double> eps_profile, const SolverOptions& opts) {
  const auto& px = instance.px();
  if (eps_profile.size() != px.size())
    throw std::invalid_argument("eps profile length does not match the source alphabet");
  for (double e : eps_profile)
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("eps profile entries must lie in [0, 1]");

  const BallTable ball = ball_table(instance, d);
  // Letters with an empty ball need eps(x) = 1.
  std::vector<std::size_t> bad;
  for (std::size_t x = 0; x < px.size(); ++x)
    if (ball.ball_size(x) == 0 && eps_profile[x] < 1.0) bad.push_back(x);
  if (!bad.empty()) {
    std::string msg = "cond-excess constraint infeasible at d=" + std::to_string(d) +
                      "; empty balls at letters";
    for (auto x : bad) msg += " " + std::to_string(x);
    throw InfeasibleError(msg, std::move(bad));
  }

  AlternatingProblem prob{
      ProxyKind::cond,
      [&](const ReproductionDistribution& p) { return alpha_cond(p, ball, eps_profile); },
      [&](const ReproductionDistribution& p, const AlphaProfile& a) {
        return construct_kernel_cond(p, ball, a);
      },
      [&](const ReproductionDistribution& p, const AlphaProfile& a) {
        return alpha_objective(px, ball, p, a).nats();
      },
      std::vector<double>(eps_profile.begin(), eps_profile.end())};
  return run_alternating(prob, instance, ball, opts);
}

ProxySolution solve_r_cond_excess(const InstanceSpec& instance, double d, double eps,
                                  const SolverOptions& opts) {
  const std::vector<double> profile(instance.source_size(), eps);
  return solve_r_cond_excess(instance, d, profile, opts);
}

ProxySolution solve_r_excess(const InstanceSpec& instance, double d, double eps,
                             const SolverOptions& opts, double oracle_step) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in [0, 1]");
  const BallTable ball = ball_table(instance, d);
  require_feasible(ball, instance.px(), FidelityMode::excess, eps);
  const auto& px = instance.px();

  AlternatingProblem prob{
      ProxyKind::excess,
      [&](const ReproductionDistribution& p) { return alpha_optimal(p, ball, px, eps); },
      [&](const ReproductionDistribution& p, const AlphaProfile& a) {
        return construct_kernel_cond(p, ball, a);
      },
      [&](const ReproductionDistribution& p, const AlphaProfile& a) {
        return alpha_objective(px, ball, p, a).nats();
      },
      {}};
  ProxySolution sol = run_alternating(prob, instance, ball, opts);
  sol.eps = eps;
  sol.threshold_rule_objective =
      alpha_objective(px, ball, sol.py, alpha_threshold(sol.py, ball, px, eps));
  if (oracle_step > 0.0 && instance.reproduction_size() <= 4) {
    sol.oracle_value = oracle_grid_min(instance, d, eps, ProxyKind::excess, oracle_step);
    sol.oracle_mismatch = sol.value.nats() > sol.oracle_value->nats() + opts.tol;
  }
  return sol;
}

OptimalityReport verify_optimality(ProxyKind kind, std::span<const double> px,
                                   const ProxySolution& solution, const BallTable& ball) {
  if (kind == ProxyKind::expected)
    throw std::invalid_argument("use csiszar_residual for the expected-distortion solver");
  OptimalityReport rep;
  const auto marginal = solution.kernel.marginal(px);
  for (std::size_t y = 0; y < marginal.size(); ++y)
    rep.marginal_defect =
        std::max(rep.marginal_defect, std::abs(marginal[y] - solution.py[y]));
  rep.residual = optimality_residual(kind, px, ball, solution.kernel, marginal, solution.alpha,
                                     solution.eps_profile);
  if (kind == ProxyKind::excess) {
    for (std::size_t x = 0; x < px.size(); ++x)
      if (px[x] > 0.0 && solution.alpha.alpha[x] < ball.mass(x, marginal.py) - 1e-9)
        rep.alpha_feasible = false;
    if (solution.alpha.expectation(px) < 1.0 - solution.eps - 1e-12) rep.alpha_feasible = false;
  }
  return rep;
}

double markov_min_gap(const InstanceSpec& instance, const BallTable& ball,
                      const ReproductionDistribution& py, std::span<const double> lambdas) {
  double worst = kInf;
  for (std::size_t x = 0; x < instance.source_size(); ++x) {
    const double b = ball.mass(x, py.py);
    const double lhs = b > 0.0 ? -std::log(b) : kInf;
    for (double lambda : lambdas) {
      const double t = tilted_information(py.py, instance.dist().row(x), lambda, ball.threshold());
      worst = std::min(worst, lhs - t);
    }
  }
  return worst;
}

}  // namespace qproxy
