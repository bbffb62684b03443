#include "qproxy/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cli_internal.hpp"
#include "qproxy/codebook.hpp"
#include "qproxy/errors.hpp"
#include "qproxy/exact.hpp"

namespace qproxy::cli {

using detail::Json;
using detail::number;
using detail::Table;

namespace {

double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

Json json_vector(std::span<const double> v) {
  Json arr = Json::array();
  for (double e : v) arr.push_back(number(e));
  return arr;
}

Json json_kernel(const ConditionalKernel& k) {
  Json rows = Json::array();
  for (std::size_t x = 0; x < k.source_size(); ++x) rows.push_back(json_vector(k.rows.row(x)));
  return rows;
}

double single_value(const std::string& spec, const char* name, double fallback) {
  if (spec.empty()) return fallback;
  const auto grid = parse_grid(spec);
  if (grid.size() != 1)
    throw std::invalid_argument(std::string(name) + " must be a single value for this command");
  return grid.front();
}

ProxySolution solve_mode(const InstanceSpec& instance, ProxyKind mode, double d, double eps,
                         const SolverOptions& opts) {
  switch (mode) {
    case ProxyKind::guaranteed: return solve_r_guaranteed(instance, d, opts);
    case ProxyKind::cond: return solve_r_cond_excess(instance, d, eps, opts);
    case ProxyKind::excess: return solve_r_excess(instance, d, eps, opts);
    case ProxyKind::expected: return solve_r_expected(instance, d, opts);
  }
  throw std::logic_error("unknown mode");
}

Json solution_json(const ProxySolution& s, double eps, Units units) {
  Json j;
  j["mode"] = std::string(to_string(s.kind));
  j["d"] = number(s.d);
  j["eps"] = number(eps);
  j["units"] = std::string(to_string(units));
  j["value"] = number(s.value.in(units));
  j["proxy_objective"] = number(s.proxy_objective.in(units));
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["residual"] = number(s.residual);
  j["py"] = json_vector(s.py.py);
  j["kernel"] = json_kernel(s.kernel);
  if (s.kind == ProxyKind::cond || s.kind == ProxyKind::excess) {
    j["alpha"] = json_vector(s.alpha.alpha);
  }
  if (s.kind == ProxyKind::excess) {
    j["q"] = number(s.alpha.q);
    if (s.threshold_rule_objective)
      j["threshold_rule_objective"] = number(s.threshold_rule_objective->in(units));
  }
  if (s.kind == ProxyKind::expected) {
    j["distortion"] = number(s.distortion);
    j["lambda_star"] = number(s.lambda_star);
    j["lambda_parametric"] = number(s.lambda_parametric);
  }
  return j;
}

std::string render_solution(const ProxySolution& s, double eps, const RunConfig& cfg) {
  if (cfg.format == OutputFormat::json) return solution_json(s, eps, cfg.units).dump(2) + "\n";
  Table t{{"mode", "d", "eps", "R", "proxy_objective", "residual", "iterations", "converged"}, {}};
  t.rows.push_back({std::string(to_string(s.kind)), number(s.d), number(eps),
                    number(s.value.in(cfg.units)), number(s.proxy_objective.in(cfg.units)),
                    number(s.residual), s.iterations, s.converged});
  return detail::render_table(t, cfg.format);
}

struct Outcome {
  std::string text;
  int code = kExitOk;
};

Outcome do_compute(const InstanceSpec& instance, const RunConfig& cfg) {
  const double d = single_value(cfg.d_spec, "--d", 0.0);
  const double eps = single_value(cfg.eps_spec, "--eps", 0.0);
  const SolverOptions opts{cfg.tol, cfg.max_iter};
  try {
    const auto sol = solve_mode(instance, cfg.mode, d, eps, opts);
    return {render_solution(sol, eps, cfg), kExitOk};
  } catch (const NotConverged& e) {
    return {render_solution(e.best(), eps, cfg), kExitNotConverged};
  }
}

Outcome do_exact(const InstanceSpec& instance, const RunConfig& cfg) {
  const double d = single_value(cfg.d_spec, "--d", 0.0);
  const double eps = single_value(cfg.eps_spec, "--eps", 0.0);
  QuantizerSolution q;
  switch (cfg.mode) {
    case ProxyKind::guaranteed: q = exact_h_guaranteed(instance, d); break;
    case ProxyKind::cond: q = exact_h_cond_excess(instance, d, eps); break;
    case ProxyKind::excess: q = upper_h_excess(instance, d, eps); break;
    case ProxyKind::expected:
      throw std::invalid_argument("exact has no expected-distortion mode");
  }
  if (cfg.format == OutputFormat::csv) {
    Table t{{"mode", "d", "eps", "H", "exact"}, {}};
    t.rows.push_back({std::string(to_string(cfg.mode)), number(d), number(eps),
                      number(q.value.in(cfg.units)), q.exact});
    return {detail::render_table(t, cfg.format), kExitOk};
  }
  Json j;
  j["mode"] = std::string(to_string(cfg.mode));
  j["d"] = number(d);
  j["eps"] = number(eps);
  j["units"] = std::string(to_string(cfg.units));
  j["value"] = number(q.value.in(cfg.units));
  j["exact"] = q.exact;
  j["py"] = json_vector(q.py.py);
  j["kernel"] = json_kernel(q.kernel);
  return {j.dump(2) + "\n", kExitOk};
}

struct SweepRow {
  std::vector<Json> cells;
  int code = kExitOk;
};

SweepRow sweep_point(const InstanceSpec& instance, const RunConfig& cfg, double d, double eps) {
  const SolverOptions opts{cfg.tol, cfg.max_iter};
  SweepRow row;
  const Json na = "na";
  ProxySolution sol;
  try {
    sol = solve_mode(instance, cfg.mode, d, eps, opts);
  } catch (const NotConverged& e) {
    sol = e.best();
    row.code = kExitNotConverged;
  } catch (const InfeasibleError&) {
    row.cells = {number(d), number(eps), "infeasible", na, na, na, na, 0};
    row.code = kExitInfeasible;
    return row;
  } catch (const DminViolation&) {
    row.cells = {number(d), number(eps), "infeasible", na, na, na, na, 0};
    row.code = kExitInfeasible;
    return row;
  }

  Json h = na;
  Json lower = na;
  Json upper = na;
  if (cfg.mode != ProxyKind::expected) {
    try {
      QuantizerSolution q;
      if (cfg.mode == ProxyKind::guaranteed) q = exact_h_guaranteed(instance, d);
      if (cfg.mode == ProxyKind::cond) q = exact_h_cond_excess(instance, d, eps);
      if (cfg.mode == ProxyKind::excess) q = upper_h_excess(instance, d, eps);
      const auto v = sandwich_check(q.value, sol.value,
                                    cfg.mode == ProxyKind::guaranteed ? SandwichMode::guaranteed
                                                                      : SandwichMode::excess_family,
                                    q.exact);
      h = number(q.value.in(cfg.units));
      lower = v.lower_checked ? Json(v.lower_ok) : na;
      upper = v.upper_ok;
      if (!v.pass() && row.code == kExitOk) row.code = kExitVerifyFailed;
    } catch (const SearchTooLarge&) {
    }
  }
  row.cells = {number(d),          number(eps), number(sol.value.in(cfg.units)), h, lower, upper,
               number(sol.residual), sol.iterations};
  return row;
}

Outcome do_sweep(const InstanceSpec& instance, const RunConfig& cfg) {
  if (cfg.d_spec.empty()) throw std::invalid_argument("sweep needs --d");
  const auto ds = parse_grid(cfg.d_spec);
  const auto eps_grid = cfg.eps_spec.empty() ? std::vector<double>{0.0} : parse_grid(cfg.eps_spec);

  std::vector<std::pair<double, double>> points;
  for (double d : ds)
    for (double eps : eps_grid) points.emplace_back(d, eps);

  Table t{{"d", "eps", "R", "H_or_bound", "sandwich_lower_ok", "sandwich_upper_ok", "residual",
           "iterations"},
          {}};
  int code = kExitOk;
  // Points run in batches of at most one per hardware thread; rows keep grid order.
  const std::size_t width = std::max(1U, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < points.size(); begin += width) {
    std::vector<std::future<SweepRow>> jobs;
    for (std::size_t i = begin; i < std::min(points.size(), begin + width); ++i)
      jobs.push_back(std::async(std::launch::async, sweep_point, std::cref(instance),
                                std::cref(cfg), points[i].first, points[i].second));
    for (auto& job : jobs) {
      auto row = job.get();
      code = std::max(code, row.code);
      t.rows.push_back(std::move(row.cells));
    }
  }
  return {detail::render_table(t, cfg.format), code};
}

Outcome do_simulate(const InstanceSpec& instance, const RunConfig& cfg) {
  const double d = single_value(cfg.d_spec, "--d", 0.0);
  const double eps = single_value(cfg.eps_spec, "--eps", 0.0);
  const SolverOptions opts{cfg.tol, cfg.max_iter};
  if (cfg.mode == ProxyKind::expected)
    throw std::invalid_argument("simulate supports guaranteed, cond-excess and excess modes");

  ProxySolution sol;
  int code = kExitOk;
  try {
    sol = solve_mode(instance, cfg.mode, d, eps, opts);
  } catch (const NotConverged& e) {
    sol = e.best();
    code = kExitNotConverged;
  }
  AlphaProfile alpha = AlphaProfile::ones(instance.source_size());
  if (cfg.mode != ProxyKind::guaranteed) alpha = sol.alpha;
  if (cfg.alpha_rule == AlphaRule::threshold && cfg.mode != ProxyKind::guaranteed)
    alpha = alpha_threshold(sol.py, ball_table(instance, d), instance.px(), eps);

  const auto rep = simulate(instance, d, sol.py, alpha, cfg.trials, cfg.codebook_len, cfg.seed);

  Json j;
  j["mode"] = std::string(to_string(cfg.mode));
  j["d"] = number(d);
  j["eps"] = number(eps);
  j["trials"] = rep.trials;
  j["seed"] = rep.seed;
  j["generator"] = rep.generator_id;
  j["codebook_len"] = rep.codebook_len;
  j["py"] = json_vector(sol.py.py);
  j["alpha"] = json_vector(alpha.alpha);
  j["mean_log2_w"] = number(rep.mean_log_w);
  j["mean_log2_w_se"] = number(rep.mean_log_w_se);
  j["mean_gamma_length"] = number(rep.mean_gamma_length);
  j["mean_gamma_length_se"] = number(rep.mean_gamma_length_se);
  j["entropy_w"] = number(rep.entropy_w);
  j["excess_rate"] = number(rep.excess_rate);
  j["excess_rate_se"] = number(rep.excess_rate_se);
  j["bound_ball_codelength"] = number(rep.bound_ball_codelength);
  j["bound_giveup"] = number(rep.bound_giveup);
  j["bound_divergence_form"] = number(rep.bound_divergence_form);
  j["entropy_chain_rhs"] = number(rep.entropy_chain_rhs);
  j["exhausted_trials"] = rep.exhausted_trials;
  j["exhaustion_rate"] = number(rep.exhaustion_rate);
  j["insufficient_length"] = rep.insufficient_length;
  j["dropped_trials"] = rep.dropped_trials;
  Json letters = Json::array();
  for (const auto& s : rep.letters) {
    Json l;
    l["trials"] = s.trials;
    l["alpha"] = number(s.alpha);
    l["excess_rate"] = number(s.excess_rate);
    l["excess_rate_se"] = number(s.excess_se);
    letters.push_back(l);
  }
  j["letters"] = letters;

  if (cfg.format == OutputFormat::json) return {j.dump(2) + "\n", code};
  Table t{{"metric", "value"}, {}};
  for (const auto& [key, value] : j.items()) {
    if (value.is_array()) continue;
    t.rows.push_back({key, value});
  }
  return {detail::render_table(t, cfg.format), code};
}

Outcome do_verify(const InstanceSpec& instance, const RunConfig& cfg) {
  const auto rows = detail::run_verify_suite(instance, cfg);
  Table t{{"check", "params", "value", "bound", "pass"}, {}};
  bool ok = true;
  for (const auto& r : rows) {
    t.rows.push_back({r.check, r.params, number(r.value), number(r.bound), r.pass});
    ok = ok && r.pass;
  }
  return {detail::render_table(t, cfg.format), ok ? kExitOk : kExitVerifyFailed};
}

}  // namespace

namespace detail {

Json number(double v) {
  if (!std::isfinite(v)) return format_number(v);
  return std::stod(format_number(v));
}

std::string render_table(const Table& table, OutputFormat format) {
  if (format == OutputFormat::json) {
    Json arr = Json::array();
    for (const auto& row : table.rows) {
      Json obj;
      for (std::size_t i = 0; i < table.columns.size(); ++i) obj[table.columns[i]] = row[i];
      arr.push_back(obj);
    }
    return arr.dump(2) + "\n";
  }
  auto cell = [](const Json& v) -> std::string {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return format_number(v.get<double>());
    return v.dump();
  };
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out += (i ? "," : "") + table.columns[i];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell(row[i]);
    out += "\n";
  }
  return out;
}

}  // namespace detail

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    const auto parts = split(spec, ':');
    if (parts.size() != 3) throw std::invalid_argument("grid must be start:stop:step");
    const double start = parse_real(parts[0]);
    const double stop = parse_real(parts[1]);
    const double step = parse_real(parts[2]);
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
    if (stop < start) throw std::invalid_argument("grid is empty: stop < start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  for (const auto& part : split(spec, ',')) out.push_back(parse_real(part));
  if (out.empty()) throw std::invalid_argument("grid is empty");
  return out;
}

std::optional<Command> parse_command(const std::string& s) {
  if (s == "compute") return Command::compute;
  if (s == "exact") return Command::exact;
  if (s == "sweep") return Command::sweep;
  if (s == "simulate") return Command::simulate;
  if (s == "verify") return Command::verify;
  return std::nullopt;
}

std::optional<ProxyKind> parse_mode(const std::string& s) {
  if (s == "guaranteed") return ProxyKind::guaranteed;
  if (s == "cond-excess") return ProxyKind::cond;
  if (s == "excess") return ProxyKind::excess;
  if (s == "expected") return ProxyKind::expected;
  return std::nullopt;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("QPROXY_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
  }
  return 42;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (!(config.tol > 0.0)) {
    err << "error: --tol must be positive\n";
    return kExitInvalid;
  }
  Outcome outcome;
  try {
    const InstanceSpec instance = load_instance(config.instance_path);
    switch (config.command) {
      case Command::compute: outcome = do_compute(instance, config); break;
      case Command::exact: outcome = do_exact(instance, config); break;
      case Command::sweep: outcome = do_sweep(instance, config); break;
      case Command::simulate: outcome = do_simulate(instance, config); break;
      case Command::verify: outcome = do_verify(instance, config); break;
    }
  } catch (const ValidationError& e) {
    err << "error: " << config.instance_path << ": " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DminViolation& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ZeroBallMass& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NotConverged& e) {
    err << "not converged: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  if (config.output.empty() || config.output == "-") {
    out << outcome.text;
  } else {
    std::ofstream file(config.output, std::ios::binary);
    if (!file) {
      err << "error: cannot write " << config.output << "\n";
      return kExitInvalid;
    }
    file << outcome.text;
  }
  return outcome.code;
}

}  // namespace qproxy::cli
