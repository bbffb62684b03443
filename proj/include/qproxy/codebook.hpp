#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qproxy/model.hpp"

namespace qproxy {

// Counter-based generator: every draw is a pure function of
// (seed, stream, slot, counter), so trials can be replayed in any order.
inline constexpr const char* kGeneratorId = "splitmix64-counter-v1";

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t slot,
                           std::uint64_t counter);
// Uniform on [0, 1) with 53 random bits.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t slot,
                       std::uint64_t counter);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t slot)
      : seed_(seed), stream_(stream), slot_(slot) {}
  double uniform() { return counter_uniform(seed_, stream_, slot_, counter_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t slot_;
  std::uint64_t counter_ = 0;
};

// Inverse-CDF draw from a probability vector; never returns a zero-mass index.
std::size_t sample_index(std::span<const double> p, double u);

/// Prefix of an i.i.d. codeword sequence Y_1, Y_2, ... ~ P_Y.
class Codebook {
 public:
  static Codebook draw(const ReproductionDistribution& py, std::size_t length, std::uint64_t seed,
                       std::uint64_t stream = 0);

  // Lengthens the codebook; existing entries are unchanged.
  void extend(std::size_t length);

  const std::vector<std::size_t>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::string generator_id() const { return kGeneratorId; }

 private:
  Codebook() = default;

  ReproductionDistribution py_;
  std::vector<std::size_t> entries_;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
};

// Index (1-based) of the first codeword inside B_d(x).
std::uint64_t encode_waiting(std::size_t x, const Codebook& codebook, const BallTable& ball);

// With probability alpha_x the waiting-time index, otherwise 1.
std::uint64_t encode_giveup(std::size_t x, const Codebook& codebook, const BallTable& ball,
                            double alpha_x, CounterRng& rng);

// floor(log2 w) zeros followed by the binary expansion of w.
std::string elias_gamma(std::uint64_t w);

struct LetterStats {
  std::size_t trials = 0;
  double excess_rate = 0.0;
  double excess_se = 0.0;
  double alpha = 1.0;
};

struct SimulationReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::string generator_id = kGeneratorId;
  std::size_t codebook_len = 0;

  double mean_log_w = 0.0;  // E[floor(log2 W)], bits
  double mean_log_w_se = 0.0;
  double mean_gamma_length = 0.0;  // bits
  double mean_gamma_length_se = 0.0;
  double entropy_w = 0.0;  // plug-in estimate, bits
  double excess_rate = 0.0;
  double excess_rate_se = 0.0;
  std::vector<LetterStats> letters;

  double bound_ball_codelength = 0.0;  // E[-log2 P_Y(B_d(X))]
  double bound_giveup = 0.0;           // E[alpha(X) log2 (1 / P_Y(B_d(X)))]
  double bound_divergence_form = 0.0;  // E[d(alpha(X) || P_Y(B_d(X))) + h(alpha(X))], bits
  double entropy_chain_rhs = 0.0;      // E[L] + log2(1 + E[L]) + log2 e

  std::size_t exhausted_trials = 0;  // trials needing more than codebook_len codewords
  double exhaustion_rate = 0.0;
  bool insufficient_length = false;  // exhaustion_rate >= 1e-3
  std::size_t dropped_trials = 0;    // no match even after extension
};

SimulationReport simulate(const InstanceSpec& instance, double d, const ReproductionDistribution& py,
                          const AlphaProfile& alpha, std::size_t trials, std::size_t codebook_len,
                          std::uint64_t seed);

}  // namespace qproxy
