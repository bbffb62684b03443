// Property suite behind `qproxy verify`. Every check becomes one row of the
// verdict table.
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cli_internal.hpp"
#include "qproxy/codebook.hpp"
#include "qproxy/codes.hpp"
#include "qproxy/errors.hpp"
#include "qproxy/exact.hpp"

namespace qproxy::cli::detail {

namespace {

constexpr double kChainSlack = 1e-9;          // nats
constexpr double kOracleTolBits = 1e-3;
constexpr double kExcessOracleTolBits = 1e-2; // coarser grid for the excess dual
constexpr double kEqualityTolBits = 1e-6;

std::string params(double d, std::optional<double> eps = std::nullopt) {
  std::ostringstream os;
  os << "d=" << format_number(d);
  if (eps) os << " eps=" << format_number(*eps);
  return os.str();
}

std::vector<double> default_d_grid(const InstanceSpec& instance) {
  // Distinct distortion values at which every letter has a nonempty ball.
  double floor = 0.0;
  for (std::size_t x = 0; x < instance.source_size(); ++x) {
    const auto r = instance.dist().row(x);
    floor = std::max(floor, *std::min_element(r.begin(), r.end()));
  }
  std::set<double> values;
  for (double v : instance.dist().data())
    if (v >= floor) values.insert(v);
  std::vector<double> all(values.begin(), values.end());
  if (all.size() <= 6) return all;
  std::vector<double> picked;
  for (std::size_t i = 0; i < 6; ++i) picked.push_back(all[i * (all.size() - 1) / 5]);
  return picked;
}

std::vector<double> lambda_grid(const InstanceSpec& instance) {
  const double scale = std::max(instance.max_distortion(), 1e-9);
  std::vector<double> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(20.0 * i / (49.0 * scale));
  return grid;
}

double oracle_step(std::size_t n) { return n <= 3 ? 1e-3 : 2e-3; }

class Suite {
 public:
  Suite(const InstanceSpec& instance, const RunConfig& cfg)
      : inst_(instance), cfg_(cfg), opts_{cfg.tol, cfg.max_iter}, lambdas_(lambda_grid(instance)) {}

  std::vector<VerifyRow> run() {
    const auto ds = cfg_.d_spec.empty() ? default_d_grid(inst_) : parse_grid(cfg_.d_spec);
    const auto eps_grid =
        cfg_.eps_spec.empty() ? std::vector<double>{0.05, 0.1, 0.25} : parse_grid(cfg_.eps_spec);

    std::vector<double> r_by_d;
    for (double d : ds) {
      const auto r = check_threshold(d, eps_grid);
      if (r) r_by_d.push_back(*r);
    }
    for (std::size_t i = 1; i < r_by_d.size(); ++i)
      add("guaranteed.monotone_in_d", "grid index " + std::to_string(i), r_by_d[i] - r_by_d[i - 1],
          kChainSlack, r_by_d[i] <= r_by_d[i - 1] + kChainSlack);

    check_expected();
    check_codes();
    if (!ds.empty()) check_simulation(ds.front());
    return std::move(rows_);
  }

 private:
  void add(std::string check, std::string p, double value, double bound, bool pass) {
    rows_.push_back({std::move(check), std::move(p), value, bound, pass});
  }

  template <typename F>
  std::optional<ProxySolution> solve(const std::string& name, const std::string& p, F&& f) {
    try {
      auto s = f();
      add(name + ".converged", p, static_cast<double>(s.iterations),
          static_cast<double>(opts_.max_iter), true);
      return s;
    } catch (const NotConverged& e) {
      add(name + ".converged", p, static_cast<double>(e.best().iterations),
          static_cast<double>(opts_.max_iter), false);
      return e.best();
    } catch (const InfeasibleError&) {
      add(name + ".feasible", p, 0.0, 0.0, true);
      return std::nullopt;
    }
  }

  void check_solution(const std::string& name, const std::string& p, ProxyKind kind,
                      const ProxySolution& s, const BallTable& ball) {
    const auto rep = verify_optimality(kind, inst_.px(), s, ball);
    add(name + ".residual", p, rep.residual, 10.0 * opts_.tol, rep.residual <= 10.0 * opts_.tol);
    if (kind == ProxyKind::excess)
      add(name + ".alpha_feasible", p, s.alpha.expectation(inst_.px()), 1.0 - s.eps,
          rep.alpha_feasible);
    const double gap = std::abs(s.value.bits() - s.proxy_objective.bits());
    add(name + ".minimal_information_equality", p, gap, kEqualityTolBits, gap <= kEqualityTolBits);
    const double markov = markov_min_gap(inst_, ball, s.py, lambdas_);
    add(name + ".markov_relation", p, markov, 0.0, markov >= -1e-12);
  }

  void check_oracle(const std::string& name, const std::string& p, ProxyKind kind, double d,
                    double eps, double value_bits) {
    if (inst_.reproduction_size() > 4) return;
    const bool excess = kind == ProxyKind::excess;
    const double step = excess ? 1e-2 : oracle_step(inst_.reproduction_size());
    const double tol = excess ? kExcessOracleTolBits : kOracleTolBits;
    const double oracle = oracle_grid_min(inst_, d, eps, kind, step).bits();
    const double diff = oracle - value_bits;
    add(name + ".oracle_match", p, diff, tol, diff >= -1e-6 && diff <= tol);
  }

  std::optional<double> check_threshold(double d, const std::vector<double>& eps_grid) {
    const BallTable ball = ball_table(inst_, d);
    const auto pd = params(d);
    auto g = solve("guaranteed", pd, [&] { return solve_r_guaranteed(inst_, d, opts_); });
    if (!g) return std::nullopt;
    check_solution("guaranteed", pd, ProxyKind::guaranteed, *g, ball);
    check_oracle("guaranteed", pd, ProxyKind::guaranteed, d, 0.0, g->value.bits());

    std::optional<QuantizerSolution> hg;
    try {
      hg = exact_h_guaranteed(inst_, d);
      const auto v = sandwich_check(hg->value, g->value, SandwichMode::guaranteed);
      add("guaranteed.sandwich_lower", pd, v.lower_slack, 0.0, v.lower_ok);
      add("guaranteed.sandwich_upper", pd, v.upper_slack, 0.0, v.upper_ok);
    } catch (const SearchTooLarge&) {
    }

    if (auto c0 = solve("cond", params(d, 0.0), [&] { return solve_r_cond_excess(inst_, d, 0.0, opts_); })) {
      const double diff = std::abs(c0->value.bits() - g->value.bits());
      add("cond.eps0_matches_guaranteed", pd, diff, kEqualityTolBits, diff <= kEqualityTolBits);
    }

    double prev_c = g->value.nats();
    double prev_e = g->value.nats();
    double prev_hc = hg ? hg->value.nats() : 0.0;
    for (double eps : eps_grid) {
      const auto p = params(d, eps);
      auto c = solve("cond", p, [&] { return solve_r_cond_excess(inst_, d, eps, opts_); });
      auto e = solve("excess", p, [&] { return solve_r_excess(inst_, d, eps, opts_); });
      if (!c || !e) continue;
      check_solution("cond", p, ProxyKind::cond, *c, ball);
      check_solution("excess", p, ProxyKind::excess, *e, ball);
      check_oracle("cond", p, ProxyKind::cond, d, eps, c->value.bits());
      check_oracle("excess", p, ProxyKind::excess, d, eps, e->value.bits());

      const double cv = c->value.nats();
      const double ev = e->value.nats();
      add("chain.cond_le_guaranteed", p, cv - g->value.nats(), kChainSlack,
          cv <= g->value.nats() + kChainSlack);
      add("chain.excess_le_cond", p, ev - cv, kChainSlack, ev <= cv + kChainSlack);
      add("cond.monotone_in_eps", p, cv - prev_c, kChainSlack, cv <= prev_c + kChainSlack);
      add("excess.monotone_in_eps", p, ev - prev_e, kChainSlack, ev <= prev_e + kChainSlack);
      prev_c = cv;
      prev_e = ev;
      if (e->threshold_rule_objective) {
        const double gap = e->threshold_rule_objective->nats() - e->proxy_objective.nats();
        add("excess.threshold_rule_not_better", p, gap, -kChainSlack, gap >= -kChainSlack);
      }

      try {
        const auto hc = exact_h_cond_excess(inst_, d, eps);
        const auto v = sandwich_check(hc.value, c->value, SandwichMode::excess_family);
        add("cond.sandwich_lower", p, v.lower_slack, 0.0, v.lower_ok);
        add("cond.sandwich_upper", p, v.upper_slack, 0.0, v.upper_ok);
        if (hg) {
          add("cond.entropy_monotone_in_eps", p, hc.value.nats() - prev_hc, 1e-12,
              hc.value.nats() <= prev_hc + 1e-12);
          prev_hc = hc.value.nats();
        }
        const auto he = upper_h_excess(inst_, d, eps);
        const auto ve = sandwich_check(he.value, e->value, SandwichMode::excess_family, false);
        add("excess.sandwich_upper", p, ve.upper_slack, 0.0, ve.upper_ok);
        add("excess.upper_le_cond_entropy", p, he.value.nats() - hc.value.nats(), 1e-12,
            he.value.nats() <= hc.value.nats() + 1e-12);
      } catch (const SearchTooLarge&) {
      }
    }
    return g->value.nats();
  }

  void check_expected() {
    double d_min = 0.0;
    for (std::size_t x = 0; x < inst_.source_size(); ++x) {
      const auto r = inst_.dist().row(x);
      d_min += inst_.px()[x] * *std::min_element(r.begin(), r.end());
    }
    double d_max = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < inst_.reproduction_size(); ++y) {
      double s = 0.0;
      for (std::size_t x = 0; x < inst_.source_size(); ++x) s += inst_.px()[x] * inst_.dist(x, y);
      d_max = std::min(d_max, s);
    }
    if (!(d_max > d_min)) return;
    for (double f : {0.25, 0.5, 0.75}) {
      const double d = d_min + f * (d_max - d_min);
      const auto p = params(d);
      auto s = solve("expected", p, [&] { return solve_r_expected(inst_, d, opts_); });
      if (!s) continue;
      add("expected.csiszar_residual", p, s->residual, 1e-4, s->residual <= 1e-4);
      const double markov = markov_min_gap(inst_, ball_table(inst_, d), s->py, lambdas_);
      add("expected.markov_relation", p, markov, 0.0, markov >= -1e-12);
    }
  }

  void check_codes() {
    const auto v = lossless_sandwich_check(inst_.px());
    add("codes.one_to_one_lower", "px", v.one_to_one_lower_slack, 0.0, v.one_to_one_lower_slack >= -1e-12);
    add("codes.one_to_one_upper", "px", v.one_to_one_upper_slack, 0.0, v.one_to_one_upper_slack >= -1e-12);
    add("codes.prefix_lower", "px", v.prefix_lower_slack, 0.0, v.prefix_lower_slack >= -1e-12);
    add("codes.prefix_upper", "px", v.prefix_upper_slack, 0.0, v.prefix_upper_slack >= -1e-12);
  }

  void check_simulation(double d) {
    std::optional<ProxySolution> g;
    try {
      g = solve_r_guaranteed(inst_, d, opts_);
    } catch (const NotConverged& e) {
      g = e.best();
    } catch (const InfeasibleError&) {
      return;
    }
    const std::size_t trials = std::min<std::size_t>(cfg_.trials, 20000);
    const auto rep = simulate(inst_, d, g->py, AlphaProfile::ones(inst_.source_size()), trials,
                              cfg_.codebook_len, cfg_.seed);
    const auto p = params(d) + " trials=" + std::to_string(trials);
    const double lhs = rep.mean_log_w - 3.0 * rep.mean_log_w_se;
    add("simulate.mean_log_w_bound", p, lhs, rep.bound_ball_codelength,
        lhs <= rep.bound_ball_codelength);
    const double h = rep.entropy_w - 3.0 * rep.mean_log_w_se;
    add("simulate.entropy_chain", p, h, rep.entropy_chain_rhs, h <= rep.entropy_chain_rhs);
    add("simulate.exhaustion", p, rep.exhaustion_rate, 1e-3, !rep.insufficient_length);
    add("simulate.no_excess", p, rep.excess_rate, 0.0, rep.excess_rate == 0.0);
  }

  const InstanceSpec& inst_;
  const RunConfig& cfg_;
  SolverOptions opts_;
  std::vector<double> lambdas_;
  std::vector<VerifyRow> rows_;
};

}  // namespace

std::vector<VerifyRow> run_verify_suite(const InstanceSpec& instance, const RunConfig& config) {
  return Suite(instance, config).run();
}

}  // namespace qproxy::cli::detail
