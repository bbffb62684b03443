#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "qproxy/cli.hpp"

int main(int argc, char** argv) {
  using namespace qproxy;
  using namespace qproxy::cli;

  CLI::App app{"Minimum-information proxies for quantizer entropy on finite alphabets"};
  app.require_subcommand(1);

  RunConfig cfg;
  cfg.seed = default_seed();
  std::string mode = "guaranteed";
  std::string units = "bits";
  std::string format = "json";
  std::string alpha_rule = "solver";

  const std::map<std::string, Command> commands{
      {"compute", Command::compute}, {"exact", Command::exact}, {"sweep", Command::sweep},
      {"simulate", Command::simulate}, {"verify", Command::verify}};
  const std::map<std::string, std::string> help{
      {"compute", "Solve one proxy and print the solution"},
      {"exact", "Minimum quantizer entropy by exhaustive search (upper bound for excess)"},
      {"sweep", "Proxy, quantizer entropy and sandwich verdicts over a (d, eps) grid"},
      {"simulate", "Monte Carlo waiting-time encoder against its codelength bounds"},
      {"verify", "Run the property suite on an instance"}};

  for (const auto& [name, command] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("instance", cfg.instance_path, "Instance JSON file")->required();
    sub->add_option("--mode", mode, "guaranteed | cond-excess | excess | expected")
        ->check(CLI::IsMember({"guaranteed", "cond-excess", "excess", "expected"}));
    sub->add_option("--d", cfg.d_spec, "Distortion threshold, or grid start:stop:step");
    sub->add_option("--eps", cfg.eps_spec, "Excess probability, or grid start:stop:step");
    sub->add_option("--tol", cfg.tol, "Convergence tolerance in nats")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", cfg.max_iter, "Iteration limit");
    sub->add_option("--trials", cfg.trials, "Simulation trials");
    sub->add_option("--codebook-len", cfg.codebook_len, "Nominal codebook length");
    sub->add_option("--seed", cfg.seed, "Simulation seed (default from QPROXY_SEED, else 42)");
    sub->add_option("--units", units, "bits | nats")->check(CLI::IsMember({"bits", "nats"}));
    sub->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("-o,--output", cfg.output, "Output path (default stdout)");
    sub->add_option("--alpha-rule", alpha_rule, "simulate: solver | threshold")
        ->check(CLI::IsMember({"solver", "threshold"}));
    sub->callback([&cfg, command = command] { cfg.command = command; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  cfg.mode = *parse_mode(mode);
  cfg.units = units == "nats" ? Units::nats : Units::bits;
  cfg.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
  cfg.alpha_rule = alpha_rule == "threshold" ? AlphaRule::threshold : AlphaRule::solver;
  return run(cfg, std::cout, std::cerr);
}
