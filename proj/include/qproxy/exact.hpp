#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qproxy/infotheory.hpp"
#include "qproxy/model.hpp"

namespace qproxy {

// Enumeration budget shared by the exhaustive searches.
inline constexpr double kMaxSearchSize = 1e7;

/// Minimum (or upper bound on the minimum) output entropy of a feasible quantizer.
struct QuantizerSolution {
  InfoValue value;
  ConditionalKernel kernel;
  ReproductionDistribution py;  // induced output distribution
  bool exact = false;           // true: proven minimum by exhaustion
};

// Minimum H(f(X)) over deterministic f with f(x) in B_d(x).
QuantizerSolution exact_h_guaranteed(const InstanceSpec& instance, double d);

// Minimum H(Y) over kernels with P[dist(x, Y) > d | X = x] <= eps for every x.
// H(P_Y) is concave in the kernel and each row ranges over a polytope, so the
// minimum sits at a vertex: a point mass inside the ball, or 1 - eps on a
// ball letter with eps on a letter outside.
QuantizerSolution exact_h_cond_excess(const InstanceSpec& instance, double d, double eps);

// Upper bound on the minimum H(Y) with P[dist(X, Y) > d] <= eps: feasible
// deterministic quantizers with greedy give-up redirection of the budget, and
// the conditional-excess vertex optimum when it is small enough to enumerate.
QuantizerSolution upper_h_excess(const InstanceSpec& instance, double d, double eps);

enum class SandwichMode { guaranteed, excess_family };

struct SandwichVerdict {
  bool lower_ok = true;    // r <= h (skipped, and true, when h is only an upper bound)
  bool upper_ok = true;    // h <= r + log2(r + c1) + c0
  bool lower_checked = true;
  double lower_slack = 0.0;  // h - r, bits
  double upper_slack = 0.0;  // bound - h, bits
  double upper_bound = 0.0;  // bits
  bool pass() const { return lower_ok && upper_ok; }
};

// guaranteed:    r <= h <= r + log2(r + 1) + log2 e             (bits)
// excess_family: r <= h <= r + log2(r + 2) + 1 + log2 e         (bits)
// `slack` absorbs floating-point error in the comparisons.
SandwichVerdict sandwich_check(InfoValue h, InfoValue r, SandwichMode mode, bool h_exact = true,
                               double slack = 1e-9);

}  // namespace qproxy
