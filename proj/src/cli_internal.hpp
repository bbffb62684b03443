#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qproxy/cli.hpp"
#include "qproxy/model.hpp"

namespace qproxy::cli::detail {

using Json = nlohmann::ordered_json;

// A number rounded to 12 significant digits, or a string for non-finite values.
Json number(double v);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
};

std::string render_table(const Table& table, OutputFormat format);

struct VerifyRow {
  std::string check;
  std::string params;
  double value = 0.0;
  double bound = 0.0;
  bool pass = true;
};

std::vector<VerifyRow> run_verify_suite(const InstanceSpec& instance, const RunConfig& config);

}  // namespace qproxy::cli::detail
