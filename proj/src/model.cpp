#include "qproxy/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "qproxy/errors.hpp"

namespace qproxy {

namespace {

using nlohmann::json;

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  return pos == std::string_view::npos ? 0 : line_of_offset(text, pos);
}

std::string with_line(const std::string& msg, std::size_t line) {
  return line == 0 ? msg : "line " + std::to_string(line) + ": " + msg;
}

}  // namespace

std::string_view to_string(FidelityMode mode) {
  switch (mode) {
    case FidelityMode::guaranteed: return "guaranteed";
    case FidelityMode::cond_excess: return "cond-excess";
    case FidelityMode::excess: return "excess";
  }
  return "unknown";
}

bool is_probability_vector(std::span<const double> p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

InstanceSpec InstanceSpec::create(ProbVector px, RealMatrix dist,
                                  std::vector<std::string> labels_x,
                                  std::vector<std::string> labels_y) {
  const std::size_t m = px.size();
  if (m == 0) throw ValidationError("px must have at least one entry");
  if (dist.rows() != m)
    throw ValidationError("dist has " + std::to_string(dist.rows()) + " rows but px has " +
                          std::to_string(m) + " entries");
  if (dist.cols() == 0) throw ValidationError("dist must have at least one column");
  if (!labels_x.empty() && labels_x.size() != m)
    throw ValidationError("labels_x length does not match px");
  if (!labels_y.empty() && labels_y.size() != dist.cols())
    throw ValidationError("labels_y length does not match dist columns");

  double sum = 0.0;
  for (std::size_t x = 0; x < m; ++x) {
    if (!std::isfinite(px[x]) || px[x] < 0.0)
      throw ValidationError("px[" + std::to_string(x) + "] is negative or not finite");
    sum += px[x];
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "px sums to " << sum << ", not 1";
    throw ValidationError(os.str());
  }
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < dist.cols(); ++y)
      if (!std::isfinite(dist(x, y)) || dist(x, y) < 0.0)
        throw ValidationError("dist[" + std::to_string(x) + "][" + std::to_string(y) +
                              "] is negative or not finite");

  InstanceSpec out;
  std::vector<std::size_t> kept;
  for (std::size_t x = 0; x < m; ++x)
    if (px[x] > 0.0) kept.push_back(x);

  out.dist_ = RealMatrix(kept.size(), dist.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.px_.push_back(px[kept[i]] / sum);
    for (std::size_t y = 0; y < dist.cols(); ++y) out.dist_(i, y) = dist(kept[i], y);
    if (!labels_x.empty()) out.labels_x_.push_back(std::move(labels_x[kept[i]]));
  }
  out.labels_y_ = std::move(labels_y);
  out.source_index_ = std::move(kept);
  return out;
}

double InstanceSpec::max_distortion() const {
  const auto& v = dist_.data();
  return *std::max_element(v.begin(), v.end());
}

InstanceSpec parse_instance(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t line = e.byte == 0 ? 0 : line_of_offset(text, e.byte - 1);
    throw ValidationError(with_line(std::string("malformed JSON: ") + e.what(), line), line);
  }
  if (!doc.is_object()) throw ValidationError("instance must be a JSON object", 1);

  auto read_reals = [&](const json& arr, const char* key) {
    const std::size_t line = line_of_key(text, key);
    if (!arr.is_array())
      throw ValidationError(with_line(std::string(key) + " must be an array", line), line);
    std::vector<double> out;
    for (const auto& v : arr) {
      if (!v.is_number())
        throw ValidationError(with_line(std::string(key) + " entries must be numbers", line), line);
      out.push_back(v.get<double>());
    }
    return out;
  };
  auto read_labels = [&](const char* key) {
    std::vector<std::string> out;
    if (!doc.contains(key)) return out;
    const std::size_t line = line_of_key(text, key);
    const auto& arr = doc.at(key);
    if (!arr.is_array())
      throw ValidationError(with_line(std::string(key) + " must be an array", line), line);
    for (const auto& v : arr) {
      if (!v.is_string())
        throw ValidationError(with_line(std::string(key) + " entries must be strings", line), line);
      out.push_back(v.get<std::string>());
    }
    return out;
  };

  for (const char* key : {"px", "dist"})
    if (!doc.contains(key)) throw ValidationError(std::string("missing required key \"") + key + "\"");

  auto px = read_reals(doc.at("px"), "px");
  const std::size_t dist_line = line_of_key(text, "dist");
  const auto& dist_json = doc.at("dist");
  if (!dist_json.is_array())
    throw ValidationError(with_line("dist must be an array of rows", dist_line), dist_line);
  std::vector<std::vector<double>> rows;
  for (const auto& row : dist_json) rows.push_back(read_reals(row, "dist"));

  RealMatrix dist;
  try {
    dist = RealMatrix::from_rows(rows);
  } catch (const std::invalid_argument&) {
    throw ValidationError(with_line("dist rows have different lengths", dist_line), dist_line);
  }

  try {
    return InstanceSpec::create(std::move(px), std::move(dist), read_labels("labels_x"),
                                read_labels("labels_y"));
  } catch (const ValidationError& e) {
    if (e.line() != 0) throw;
    const std::string msg = e.what();
    std::size_t line = 0;
    for (const char* key : {"labels_x", "labels_y", "px", "dist"})
      if (msg.find(key) != std::string::npos) {
        line = line_of_key(text, key);
        break;
      }
    throw ValidationError(with_line(msg, line), line);
  }
}

InstanceSpec load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_instance(buf.str());
}

std::string instance_to_json(const InstanceSpec& instance) {
  json doc;
  doc["px"] = instance.px();
  json rows = json::array();
  for (std::size_t x = 0; x < instance.source_size(); ++x) {
    const auto r = instance.dist().row(x);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["dist"] = rows;
  if (!instance.labels_x().empty()) doc["labels_x"] = instance.labels_x();
  if (!instance.labels_y().empty()) doc["labels_y"] = instance.labels_y();
  return doc.dump(2);
}

BallTable::BallTable(const InstanceSpec& instance, double d)
    : d_(d),
      incidence_(instance.source_size(), instance.reproduction_size()),
      sizes_(instance.source_size(), 0) {
  for (std::size_t x = 0; x < instance.source_size(); ++x)
    for (std::size_t y = 0; y < instance.reproduction_size(); ++y)
      if (instance.dist(x, y) <= d) {
        incidence_(x, y) = 1;
        ++sizes_[x];
      }
}

double BallTable::mass(std::size_t x, std::span<const double> py) const {
  double s = 0.0;
  for (std::size_t y = 0; y < py.size(); ++y)
    if (contains(x, y)) s += py[y];
  return s;
}

double BallTable::complement_mass(std::size_t x, std::span<const double> py) const {
  double s = 0.0;
  for (std::size_t y = 0; y < py.size(); ++y)
    if (!contains(x, y)) s += py[y];
  return s;
}

BallTable ball_table(const InstanceSpec& instance, double d) {
  if (!(d >= 0.0)) throw std::invalid_argument("distortion threshold must be nonnegative");
  return BallTable(instance, d);
}

FeasibilityVerdict check_feasibility(const BallTable& ball, std::span<const double> px,
                                     FidelityMode mode, double eps) {
  FeasibilityVerdict v;
  for (std::size_t x = 0; x < px.size(); ++x)
    if (px[x] > 0.0 && ball.ball_size(x) == 0) {
      v.offending.push_back(x);
      v.empty_ball_mass += px[x];
    }
  switch (mode) {
    case FidelityMode::guaranteed:
      v.feasible = v.offending.empty();
      break;
    case FidelityMode::cond_excess:
      v.feasible = v.offending.empty() || eps >= 1.0;
      break;
    case FidelityMode::excess:
      v.feasible = v.empty_ball_mass <= eps;
      break;
  }
  return v;
}

void require_feasible(const BallTable& ball, std::span<const double> px, FidelityMode mode,
                      double eps) {
  auto v = check_feasibility(ball, px, mode, eps);
  if (v.feasible) return;
  std::string msg = std::string(to_string(mode)) + " constraint infeasible at d=" +
                    std::to_string(ball.threshold()) + "; empty balls at letters";
  for (auto x : v.offending) msg += " " + std::to_string(x);
  throw InfeasibleError(msg, std::move(v.offending));
}

ReproductionDistribution ReproductionDistribution::uniform(std::size_t n) {
  return {ProbVector(n, 1.0 / static_cast<double>(n))};
}

ReproductionDistribution ConditionalKernel::marginal(std::span<const double> px) const {
  ProbVector py(rows.cols(), 0.0);
  for (std::size_t x = 0; x < rows.rows(); ++x) {
    if (px[x] == 0.0) continue;
    for (std::size_t y = 0; y < rows.cols(); ++y) py[y] += px[x] * rows(x, y);
  }
  return {std::move(py)};
}

double ConditionalKernel::max_row_defect() const {
  double worst = 0.0;
  for (std::size_t x = 0; x < rows.rows(); ++x) {
    const auto r = rows.row(x);
    worst = std::max(worst, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
  }
  return worst;
}

AlphaProfile AlphaProfile::ones(std::size_t m) { return {std::vector<double>(m, 1.0), 0.0}; }

std::vector<double> AlphaProfile::eps_profile() const {
  std::vector<double> eps(alpha.size());
  std::transform(alpha.begin(), alpha.end(), eps.begin(), [](double a) { return 1.0 - a; });
  return eps;
}

double AlphaProfile::expectation(std::span<const double> px) const {
  double s = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) s += px[x] * alpha[x];
  return s;
}

}  // namespace qproxy
