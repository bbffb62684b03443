#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qproxy/model.hpp"

namespace qproxy::testing {

inline InstanceSpec binary_hamming(double p0 = 0.5) {
  return InstanceSpec::create({p0, 1.0 - p0}, RealMatrix::from_rows({{0, 1}, {1, 0}}));
}

inline InstanceSpec triangle() {
  return InstanceSpec::create({1.0 / 3, 1.0 / 3, 1.0 / 3},
                              RealMatrix::from_rows({{0, 1, 2}, {2, 0, 1}, {1, 2, 0}}));
}

// Uniform draw in [0, 1) from raw generator bits, so results do not depend on
// the standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t m) {
  std::vector<double> p(m);
  double total = 0.0;
  for (double& v : p) total += (v = 0.05 + unit(rng));
  for (double& v : p) v /= total;
  return p;
}

// Random instance with distortions on a 0.1 grid in [0, 1] and d strictly
// between the feasibility threshold and the largest distortion.
struct RandomCase {
  InstanceSpec instance;
  double d;
};

inline RandomCase random_case(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  for (;;) {
    RealMatrix dist(m, n);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = 0; y < n; ++y) dist(x, y) = std::floor(unit(rng) * 11.0) / 10.0;
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      double row_min = dist(x, 0);
      for (std::size_t y = 0; y < n; ++y) {
        row_min = std::min(row_min, dist(x, y));
        hi = std::max(hi, dist(x, y));
      }
      lo = std::max(lo, row_min);
    }
    if (hi - lo < 0.1) continue;
    const double d = lo + std::floor(unit(rng) * std::round((hi - lo) * 10.0)) / 10.0;
    return {InstanceSpec::create(random_distribution(rng, m), std::move(dist)), d};
  }
}

}  // namespace qproxy::testing
