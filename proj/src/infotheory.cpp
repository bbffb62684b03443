#include "qproxy/infotheory.hpp"

#include <algorithm>
#include <stdexcept>

namespace qproxy {

namespace {

// x log(x / y) with the usual conventions.
double xlogxy(double x, double y) {
  if (x == 0.0) return 0.0;
  if (y == 0.0) return std::numeric_limits<double>::infinity();
  return x * std::log(x / y);
}

}  // namespace

std::string_view to_string(Units units) { return units == Units::bits ? "bits" : "nats"; }

InfoValue entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return InfoValue::from_nats(std::max(h, 0.0));
}

InfoValue binary_divergence(double alpha, double q) {
  if (alpha < 0.0 || alpha > 1.0 || q < 0.0 || q > 1.0)
    throw std::domain_error("binary_divergence arguments must lie in [0, 1]");
  const double v = xlogxy(alpha, q) + xlogxy(1.0 - alpha, 1.0 - q);
  return InfoValue::from_nats(std::max(v, 0.0));
}

InfoValue binary_entropy(double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::domain_error("binary_entropy argument must lie in [0, 1]");
  const double p[2] = {alpha, 1.0 - alpha};
  return entropy(p);
}

InfoValue divergence(std::span<const double> p, std::span<const double> q) {
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) v += xlogxy(p[i], q[i]);
  return InfoValue::from_nats(std::max(v, 0.0));
}

InfoValue conditional_divergence(std::span<const double> px, const ConditionalKernel& kernel,
                                 const ReproductionDistribution& q) {
  if (kernel.source_size() != px.size() || kernel.reproduction_size() != q.size())
    throw std::invalid_argument("dimension mismatch in conditional_divergence");
  InfoValue total;
  for (std::size_t x = 0; x < px.size(); ++x) {
    if (px[x] == 0.0) continue;
    const InfoValue dx = divergence(kernel.rows.row(x), q.py);
    if (dx.is_infinite()) return InfoValue::infinity();
    total += InfoValue::from_nats(px[x] * dx.nats());
  }
  return total;
}

InfoValue mutual_information(std::span<const double> px, const ConditionalKernel& kernel) {
  if (kernel.source_size() != px.size())
    throw std::invalid_argument("dimension mismatch in mutual_information");
  return conditional_divergence(px, kernel, kernel.marginal(px));
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(v.begin(), v.end());
  if (std::isinf(top)) return top;
  double s = 0.0;
  for (double e : v) s += std::exp(e - top);
  return top + std::log(s);
}

double tilted_information(std::span<const double> py, std::span<const double> dist_row,
                          double lambda, double d) {
  if (lambda < 0.0) throw std::domain_error("tilted_information requires lambda >= 0");
  // log py(y) + lambda (d - dist(x, y)) over the support of py.
  std::vector<double> terms;
  terms.reserve(py.size());
  for (std::size_t y = 0; y < py.size(); ++y)
    if (py[y] > 0.0) terms.push_back(std::log(py[y]) + lambda * (d - dist_row[y]));
  return -log_sum_exp(terms);
}

}  // namespace qproxy
