#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>

#include "qproxy/model.hpp"

namespace qproxy {

enum class Units { bits, nats };

std::string_view to_string(Units units);

// An information quantity stored in nats. +inf is a legal value.
class InfoValue {
 public:
  constexpr InfoValue() = default;

  static constexpr InfoValue from_nats(double nats) { return InfoValue(nats); }
  static constexpr InfoValue from_bits(double bits) { return InfoValue(bits * std::numbers::ln2); }
  static constexpr InfoValue infinity() {
    return InfoValue(std::numeric_limits<double>::infinity());
  }

  constexpr double nats() const { return nats_; }
  constexpr double bits() const { return nats_ / std::numbers::ln2; }
  constexpr double in(Units u) const { return u == Units::bits ? bits() : nats(); }
  bool is_infinite() const { return std::isinf(nats_); }

  friend constexpr InfoValue operator+(InfoValue a, InfoValue b) { return InfoValue(a.nats_ + b.nats_); }
  constexpr InfoValue& operator+=(InfoValue o) {
    nats_ += o.nats_;
    return *this;
  }
  friend constexpr auto operator<=>(InfoValue, InfoValue) = default;

 private:
  constexpr explicit InfoValue(double nats) : nats_(nats) {}
  double nats_ = 0.0;
};

// log2(e), the additive constant in the quantizer-entropy bounds.
inline constexpr double kLog2E = std::numbers::log2e;

InfoValue entropy(std::span<const double> p);

// d(alpha || q) with 0 log 0 = 0; +inf where the support condition fails.
InfoValue binary_divergence(double alpha, double q);

InfoValue binary_entropy(double alpha);

// D(p || q); +inf when p puts mass where q has none.
InfoValue divergence(std::span<const double> p, std::span<const double> q);

InfoValue mutual_information(std::span<const double> px, const ConditionalKernel& kernel);

InfoValue conditional_divergence(std::span<const double> px, const ConditionalKernel& kernel,
                                 const ReproductionDistribution& q);

// Lambda_Y(x, lambda) = -log sum_y py(y) exp(lambda d - lambda dist(x, y)), in nats.
double tilted_information(std::span<const double> py, std::span<const double> dist_row,
                          double lambda, double d);

// log(sum exp(v)) with the max shifted out; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> v);

}  // namespace qproxy
