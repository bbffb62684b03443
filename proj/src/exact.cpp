#include "qproxy/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "qproxy/errors.hpp"

namespace qproxy {

namespace {

// A kernel row with at most two atoms.
struct Vertex {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight_b = 0.0;  // mass on b; 1 - weight_b on a
};

double search_size(const std::vector<std::size_t>& radices) {
  double s = 1.0;
  for (auto r : radices) s *= static_cast<double>(r);
  return s;
}

// Odometer over mixed-radix digits in lexicographic order; returns false once exhausted.
bool advance(std::vector<std::size_t>& digits, const std::vector<std::size_t>& radices) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    if (++digits[i] < radices[i]) return true;
    digits[i] = 0;
  }
  return false;
}

QuantizerSolution from_rows(const InstanceSpec& instance, const std::vector<Vertex>& rows, bool exact) {
  QuantizerSolution out;
  out.kernel.rows = RealMatrix(instance.source_size(), instance.reproduction_size());
  for (std::size_t x = 0; x < rows.size(); ++x) {
    out.kernel.rows(x, rows[x].a) += 1.0 - rows[x].weight_b;
    out.kernel.rows(x, rows[x].b) += rows[x].weight_b;
  }
  out.py = out.kernel.marginal(instance.px());
  out.value = entropy(out.py.py);
  out.exact = exact;
  return out;
}

// Exhaustive min of H(P_Y) over one vertex per row, ties to the lexicographically first.
QuantizerSolution minimize_over_vertices(const InstanceSpec& instance,
                                         const std::vector<std::vector<Vertex>>& options) {
  std::vector<std::size_t> radices;
  for (const auto& o : options) radices.push_back(o.size());
  if (search_size(radices) > kMaxSearchSize)
    throw SearchTooLarge("vertex enumeration exceeds " + std::to_string(kMaxSearchSize) + " combinations");

  const auto& px = instance.px();
  std::vector<std::size_t> digits(options.size(), 0);
  std::vector<double> py(instance.reproduction_size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_digits = digits;
  do {
    std::fill(py.begin(), py.end(), 0.0);
    for (std::size_t x = 0; x < digits.size(); ++x) {
      const Vertex& v = options[x][digits[x]];
      py[v.a] += px[x] * (1.0 - v.weight_b);
      py[v.b] += px[x] * v.weight_b;
    }
    const double h = entropy(py).nats();
    if (h < best - 1e-12) {
      best = h;
      best_digits = digits;
    }
  } while (advance(digits, radices));

  std::vector<Vertex> rows;
  for (std::size_t x = 0; x < digits.size(); ++x) rows.push_back(options[x][best_digits[x]]);
  return from_rows(instance, rows, true);
}

double entropy_nats(const std::vector<double>& p) { return entropy(p).nats(); }

}  // namespace

QuantizerSolution exact_h_guaranteed(const InstanceSpec& instance, double d) {
  const BallTable ball = ball_table(instance, d);
  require_feasible(ball, instance.px(), FidelityMode::guaranteed);
  std::vector<std::vector<Vertex>> options(instance.source_size());
  for (std::size_t x = 0; x < options.size(); ++x)
    for (std::size_t y = 0; y < instance.reproduction_size(); ++y)
      if (ball.contains(x, y)) options[x].push_back({y, y, 0.0});
  return minimize_over_vertices(instance, options);
}

QuantizerSolution exact_h_cond_excess(const InstanceSpec& instance, double d, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in [0, 1]");
  const BallTable ball = ball_table(instance, d);
  require_feasible(ball, instance.px(), FidelityMode::cond_excess, eps);
  const std::size_t n = instance.reproduction_size();
  std::vector<std::vector<Vertex>> options(instance.source_size());
  for (std::size_t x = 0; x < options.size(); ++x) {
    auto& opt = options[x];
    if (eps >= 1.0) {
      // Every row is feasible; the vertices are all point masses.
      for (std::size_t y = 0; y < n; ++y) opt.push_back({y, y, 0.0});
      continue;
    }
    for (std::size_t y = 0; y < n; ++y)
      if (ball.contains(x, y)) opt.push_back({y, y, 0.0});
    if (eps > 0.0)
      for (std::size_t in = 0; in < n; ++in) {
        if (!ball.contains(x, in)) continue;
        for (std::size_t out = 0; out < n; ++out)
          if (!ball.contains(x, out)) opt.push_back({in, out, eps});
      }
  }
  return minimize_over_vertices(instance, options);
}

QuantizerSolution upper_h_excess(const InstanceSpec& instance, double d, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in [0, 1]");
  const BallTable ball = ball_table(instance, d);
  const auto verdict = check_feasibility(ball, instance.px(), FidelityMode::excess, eps);
  if (!verdict.feasible)
    throw InfeasibleError("excess constraint infeasible: empty balls carry more than eps",
                          verdict.offending);

  const auto& px = instance.px();
  const std::size_t m = px.size();
  const std::size_t n = instance.reproduction_size();

  // Base maps: every feasible deterministic quantizer when enumerable, else the
  // greedy map sending each letter to the ball member covering the most mass.
  std::vector<std::size_t> radices(m, 1);
  std::vector<std::vector<std::size_t>> choices(m);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < n; ++y)
      if (ball.contains(x, y)) choices[x].push_back(y);
    if (choices[x].empty()) choices[x].push_back(n);  // sentinel: must give up
    radices[x] = choices[x].size();
  }
  if (search_size(radices) > 1e5) {
    for (std::size_t x = 0; x < m; ++x) {
      if (choices[x].front() == n) continue;
      std::size_t best_y = choices[x].front();
      double best_cover = -1.0;
      for (auto y : choices[x]) {
        double cover = 0.0;
        for (std::size_t z = 0; z < m; ++z)
          if (ball.contains(z, y)) cover += px[z];
        if (cover > best_cover) {
          best_cover = cover;
          best_y = y;
        }
      }
      choices[x] = {best_y};
      radices[x] = 1;
    }
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<Vertex> best_rows;
  std::vector<std::size_t> digits(m, 0);
  std::vector<double> py(n);
  std::vector<double> moved(m);
  do {
    for (std::size_t target = 0; target < n; ++target) {
      std::fill(py.begin(), py.end(), 0.0);
      std::fill(moved.begin(), moved.end(), 0.0);
      double budget = eps;
      std::vector<std::size_t> base(m);
      for (std::size_t x = 0; x < m; ++x) {
        base[x] = choices[x][digits[x]];
        if (base[x] == n) {
          base[x] = target;
          moved[x] = px[x];
          budget -= px[x];
        }
        py[base[x]] += px[x];
      }
      if (budget < -1e-15) continue;
      budget = std::max(budget, 0.0);

      // Greedy: repeatedly apply the single redirection toward `target` that
      // lowers H(Y) the most, until none helps.
      double h = entropy_nats(py);
      for (;;) {
        std::size_t pick = m;
        double pick_amount = 0.0;
        double pick_h = h;
        for (std::size_t x = 0; x < m; ++x) {
          if (base[x] == target) continue;
          const double left = px[x] - moved[x];
          if (left <= 0.0) continue;
          const bool free_move = ball.contains(x, target);
          const double amount = free_move ? left : std::min(left, budget);
          if (amount <= 0.0) continue;
          py[base[x]] -= amount;
          py[target] += amount;
          const double trial = entropy_nats(py);
          py[base[x]] += amount;
          py[target] -= amount;
          if (trial < pick_h - 1e-15) {
            pick = x;
            pick_amount = amount;
            pick_h = trial;
          }
        }
        if (pick == m) break;
        py[base[pick]] -= pick_amount;
        py[target] += pick_amount;
        moved[pick] += pick_amount;
        if (!ball.contains(pick, target)) budget -= pick_amount;
        h = pick_h;
      }
      if (h < best - 1e-12) {
        best = h;
        best_rows.assign(m, {});
        for (std::size_t x = 0; x < m; ++x)
          best_rows[x] = {base[x], target, std::min(moved[x] / px[x], 1.0)};
      }
    }
  } while (advance(digits, radices));

  QuantizerSolution out = from_rows(instance, best_rows, false);

  // Any conditional-excess feasible kernel is excess feasible.
  try {
    QuantizerSolution cond = exact_h_cond_excess(instance, d, eps);
    if (cond.value.nats() < out.value.nats()) {
      out = std::move(cond);
      out.exact = false;
    }
  } catch (const SearchTooLarge&) {
  } catch (const InfeasibleError&) {
  }
  return out;
}

SandwichVerdict sandwich_check(InfoValue h, InfoValue r, SandwichMode mode, bool h_exact,
                               double slack) {
  const double hb = h.bits();
  const double rb = r.bits();
  SandwichVerdict v;
  v.upper_bound = mode == SandwichMode::guaranteed ? rb + std::log2(rb + 1.0) + kLog2E
                                                   : rb + std::log2(rb + 2.0) + 1.0 + kLog2E;
  v.upper_slack = v.upper_bound - hb;
  v.upper_ok = v.upper_slack >= -slack;
  v.lower_slack = hb - rb;
  v.lower_checked = h_exact;
  v.lower_ok = !h_exact || v.lower_slack >= -slack;
  return v;
}

}  // namespace qproxy
