#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qproxy/errors.hpp"
#include "qproxy/infotheory.hpp"
#include "qproxy/model.hpp"

namespace qproxy {

enum class ProxyKind { guaranteed, cond, excess, expected };

std::string_view to_string(ProxyKind kind);

struct SolverOptions {
  double tol = 1e-10;             // nats, on objective change and on the fixed-point residual
  std::size_t max_iter = 100000;
  double support_floor = 1e-14;   // P_Y entries below this are clamped to zero
  // Optional per-iteration record of the proxy objective (nats), for diagnostics.
  std::vector<double>* objective_trace = nullptr;
};

/// Output of the alternating-minimization proxy solvers.
///
/// `value` is I(X;Y) of `kernel`; `proxy_objective` is the expectation-form
/// objective at `py`. At a fixed point the two agree, which is the numerical
/// face of the minimal-information characterization.
struct ProxySolution {
  ProxyKind kind = ProxyKind::guaranteed;
  double d = 0.0;
  InfoValue value;
  InfoValue proxy_objective;
  ReproductionDistribution py;
  ConditionalKernel kernel;
  AlphaProfile alpha;
  std::vector<double> eps_profile;  // per-letter tolerances (cond); empty otherwise
  double eps = 0.0;                 // excess budget
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double clamped_mass = 0.0;

  // Excess only: objective the threshold rule would reach at `py`, and
  // the grid-oracle cross-check when one was requested.
  std::optional<InfoValue> threshold_rule_objective;
  std::optional<InfoValue> oracle_value;
  bool oracle_mismatch = false;

  // Expected-distortion solver only.
  double lambda_star = 0.0;        // secant estimate of -R'(d)
  double lambda_parametric = 0.0;  // slope parameter of the final Blahut-Arimoto run
  double distortion = 0.0;         // E d(X, Y) under `kernel`
};

class NotConverged : public Error {
 public:
  explicit NotConverged(ProxySolution best)
      : Error("solver did not converge within the iteration limit"), best_(std::move(best)) {}
  const ProxySolution& best() const { return best_; }

 private:
  ProxySolution best_;
};

// Kernel constructions from a fixed P_Y.
ConditionalKernel construct_kernel_guaranteed(const ReproductionDistribution& py,
                                              const BallTable& ball);
ConditionalKernel construct_kernel_cond(const ReproductionDistribution& py, const BallTable& ball,
                                        const AlphaProfile& alpha);

// Expectation-form objectives, in nats.
InfoValue guaranteed_objective(std::span<const double> px, const BallTable& ball,
                               const ReproductionDistribution& py);
InfoValue cond_objective(std::span<const double> px, const BallTable& ball,
                         const ReproductionDistribution& py, std::span<const double> eps_profile);
InfoValue alpha_objective(std::span<const double> px, const BallTable& ball,
                          const ReproductionDistribution& py, const AlphaProfile& alpha);

// alpha(x) = max(1 - eps(x), P_Y(B_d(x))).
AlphaProfile alpha_cond(const ReproductionDistribution& py, const BallTable& ball,
                        std::span<const double> eps_profile);

/// Typical/atypical split: alpha = 1 where P_Y(B_d(x)) >= q, the ball mass
/// elsewhere, with q the largest candidate keeping E[alpha] >= 1 - eps.
AlphaProfile alpha_threshold(const ReproductionDistribution& py, const BallTable& ball,
                             std::span<const double> px, double eps);

/// Minimizer of E[d(alpha(X) || P_Y(B_d(X)))] subject to E[alpha] >= 1 - eps
/// for fixed P_Y. `q` carries the threshold of alpha_threshold at the same P_Y.
AlphaProfile alpha_optimal(const ReproductionDistribution& py, const BallTable& ball,
                           std::span<const double> px, double eps);

ProxySolution solve_r_guaranteed(const InstanceSpec& instance, double d,
                                 const SolverOptions& opts = {});
ProxySolution solve_r_cond_excess(const InstanceSpec& instance, double d,
                                  std::span<const double> eps_profile,
                                  const SolverOptions& opts = {});
ProxySolution solve_r_cond_excess(const InstanceSpec& instance, double d, double eps,
                                  const SolverOptions& opts = {});
// `oracle_step` > 0 enables the grid-oracle cross-check (n <= 4 only).
ProxySolution solve_r_excess(const InstanceSpec& instance, double d, double eps,
                             const SolverOptions& opts = {}, double oracle_step = 0.0);
ProxySolution solve_r_expected(const InstanceSpec& instance, double d,
                               const SolverOptions& opts = {});

struct OptimalityReport {
  double residual = 0.0;        // max |log dP_{Y|X=x}/dP_Y (y) - rhs(x, y)|
  bool alpha_feasible = true;   // excess: alpha >= ball mass, E[alpha] >= 1 - eps
  double marginal_defect = 0.0; // max |solution.py - induced marginal|
};

// Deviation from the kernel optimality condition of the given kind, against
// the marginal the kernel induces.
OptimalityReport verify_optimality(ProxyKind kind, std::span<const double> px,
                                   const ProxySolution& solution, const BallTable& ball);

// |log dP_{Y|X=x}/dP_Y (y) - (Lambda_Y(x, l) - l dist(x, y) + l d)| maximized, l = lambda_star.
double csiszar_residual(const InstanceSpec& instance, const ProxySolution& solution);

// min over x and the given lambdas of log(1 / P_Y(B_d(x))) - Lambda_Y(x, lambda).
double markov_min_gap(const InstanceSpec& instance, const BallTable& ball,
                      const ReproductionDistribution& py, std::span<const double> lambdas);

/// Exhaustive minimum of the expectation-form objective over the simplex grid
/// of P_Y with spacing `step` (n <= 4). Excess mode minimizes over alpha via
/// the concave dual in one scalar, evaluated by golden-section search.
InfoValue oracle_grid_min(const InstanceSpec& instance, double d, double eps, ProxyKind mode,
                          double step);

}  // namespace qproxy
