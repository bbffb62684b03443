#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qproxy/infotheory.hpp"
#include "qproxy/proxies.hpp"

namespace qproxy::cli {

enum class Command { compute, exact, sweep, simulate, verify };
enum class OutputFormat { json, csv };
enum class AlphaRule { solver, threshold };

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitVerifyFailed = 3;
inline constexpr int kExitNotConverged = 4;

struct RunConfig {
  Command command = Command::compute;
  ProxyKind mode = ProxyKind::guaranteed;
  std::string instance_path;
  std::string d_spec;    // "0.5", "0:1:0.25" or "0.1,0.2"
  std::string eps_spec;  // same grammar; empty means the command default
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  std::size_t trials = 100000;
  std::size_t codebook_len = 1 << 16;
  std::uint64_t seed = 42;
  Units units = Units::bits;
  OutputFormat format = OutputFormat::json;
  std::string output;  // empty or "-" writes to the output stream
  AlphaRule alpha_rule = AlphaRule::solver;
};

// Inclusive grid "start:stop:step", a comma list, or one number. Throws
// std::invalid_argument on malformed or empty grids.
std::vector<double> parse_grid(const std::string& spec);

std::optional<Command> parse_command(const std::string& s);
std::optional<ProxyKind> parse_mode(const std::string& s);

// Seed from QPROXY_SEED when set and parseable, else 42.
std::uint64_t default_seed();

// Formats with 12 significant digits; non-finite values as "inf"/"-inf"/"nan".
std::string format_number(double v);

int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace qproxy::cli
