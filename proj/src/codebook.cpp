#include "qproxy/codebook.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "qproxy/errors.hpp"
#include "qproxy/infotheory.hpp"

namespace qproxy {

namespace {

constexpr std::uint64_t kSlotSource = 0;
constexpr std::uint64_t kSlotGiveUp = 1;
constexpr std::uint64_t kSlotCodebook = 2;

// Extension stops once a codebook reaches this many entries.
constexpr std::size_t kMaxCodebookLen = std::size_t{1} << 26;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
  }
  double mean(std::size_t n) const { return sum / static_cast<double>(n); }
  double se(std::size_t n) const {
    if (n < 2) return 0.0;
    const double mu = mean(n);
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * mu * mu) /
                                         static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

double proportion_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t slot,
                           std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ slot);
  return splitmix64(h ^ counter);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t slot,
                       std::uint64_t counter) {
  return static_cast<double>(counter_hash(seed, stream, slot, counter) >> 11) * 0x1.0p-53;
}

std::size_t sample_index(std::span<const double> p, double u) {
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    cum += p[i];
    if (u < cum) return i;
  }
  return last;
}

Codebook Codebook::draw(const ReproductionDistribution& py, std::size_t length, std::uint64_t seed,
                        std::uint64_t stream) {
  Codebook cb;
  cb.py_ = py;
  cb.seed_ = seed;
  cb.stream_ = stream;
  cb.extend(length);
  return cb;
}

void Codebook::extend(std::size_t length) {
  entries_.reserve(length);
  for (std::size_t i = entries_.size(); i < length; ++i)
    entries_.push_back(sample_index(py_.py, counter_uniform(seed_, stream_, kSlotCodebook, i)));
}

std::uint64_t encode_waiting(std::size_t x, const Codebook& codebook, const BallTable& ball) {
  const auto& e = codebook.entries();
  for (std::size_t i = 0; i < e.size(); ++i)
    if (ball.contains(x, e[i])) return i + 1;
  throw CodebookExhausted("no codeword within distortion of letter " + std::to_string(x) +
                          " among " + std::to_string(e.size()) + " entries");
}

std::uint64_t encode_giveup(std::size_t x, const Codebook& codebook, const BallTable& ball,
                            double alpha_x, CounterRng& rng) {
  if (!(alpha_x >= 0.0 && alpha_x <= 1.0)) throw std::invalid_argument("alpha_x must lie in [0, 1]");
  if (rng.uniform() >= alpha_x) return 1;
  return encode_waiting(x, codebook, ball);
}

std::string elias_gamma(std::uint64_t w) {
  if (w == 0) throw std::invalid_argument("Elias gamma is defined for w >= 1");
  const int bits = std::bit_width(w);
  std::string out(static_cast<std::size_t>(bits - 1), '0');
  for (int i = bits - 1; i >= 0; --i) out.push_back(((w >> i) & 1U) ? '1' : '0');
  return out;
}

SimulationReport simulate(const InstanceSpec& instance, double d, const ReproductionDistribution& py,
                          const AlphaProfile& alpha, std::size_t trials, std::size_t codebook_len,
                          std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("simulate needs at least one trial");
  if (codebook_len == 0) throw std::invalid_argument("codebook length must be positive");
  const auto& px = instance.px();
  const std::size_t m = px.size();
  if (py.size() != instance.reproduction_size() || alpha.alpha.size() != m)
    throw std::invalid_argument("dimension mismatch in simulate");

  const BallTable ball = ball_table(instance, d);
  std::vector<double> mass(m);
  std::vector<std::size_t> bad;
  for (std::size_t x = 0; x < m; ++x) {
    mass[x] = ball.mass(x, py.py);
    if (alpha.alpha[x] > 0.0 && mass[x] <= 0.0) bad.push_back(x);
  }
  if (!bad.empty())
    throw InfeasibleError("reproduction distribution gives zero mass to a ball that must be hit",
                          std::move(bad));

  SimulationReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.codebook_len = codebook_len;

  Moments log_w;
  Moments gamma;
  std::size_t excess = 0;
  std::size_t counted = 0;
  std::map<std::uint64_t, std::size_t> histogram;
  std::vector<std::size_t> letter_trials(m, 0);
  std::vector<std::size_t> letter_excess(m, 0);

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t x = sample_index(px, counter_uniform(seed, t, kSlotSource, 0));
    CounterRng giveup(seed, t, kSlotGiveUp);
    std::size_t len = std::min<std::size_t>(64, codebook_len);
    Codebook cb = Codebook::draw(py, len, seed, t);
    std::uint64_t w = 0;
    bool dropped = false;
    for (;;) {
      try {
        CounterRng replay = giveup;
        w = encode_giveup(x, cb, ball, alpha.alpha[x], replay);
        break;
      } catch (const CodebookExhausted&) {
        if (len >= kMaxCodebookLen) {
          dropped = true;
          break;
        }
        len *= 2;
        cb.extend(len);
      }
    }
    if (len > codebook_len) ++rep.exhausted_trials;
    if (dropped) {
      ++rep.dropped_trials;
      continue;
    }
    ++counted;
    const auto l = static_cast<double>(std::bit_width(w) - 1);
    log_w.add(l);
    gamma.add(2.0 * l + 1.0);
    ++histogram[w];
    ++letter_trials[x];
    if (!ball.contains(x, cb.entries()[w - 1])) {
      ++excess;
      ++letter_excess[x];
    }
  }

  if (counted > 0) {
    rep.mean_log_w = log_w.mean(counted);
    rep.mean_log_w_se = log_w.se(counted);
    rep.mean_gamma_length = gamma.mean(counted);
    rep.mean_gamma_length_se = gamma.se(counted);
    rep.excess_rate = static_cast<double>(excess) / static_cast<double>(counted);
    rep.excess_rate_se = proportion_se(rep.excess_rate, counted);
    std::vector<double> freq;
    for (const auto& [w, c] : histogram)
      freq.push_back(static_cast<double>(c) / static_cast<double>(counted));
    rep.entropy_w = entropy(freq).bits();
  }

  rep.letters.resize(m);
  for (std::size_t x = 0; x < m; ++x) {
    auto& s = rep.letters[x];
    s.trials = letter_trials[x];
    s.alpha = alpha.alpha[x];
    if (s.trials > 0) {
      s.excess_rate = static_cast<double>(letter_excess[x]) / static_cast<double>(s.trials);
      s.excess_se = proportion_se(s.excess_rate, s.trials);
    }
    const double a = alpha.alpha[x];
    const double b = std::min(mass[x], 1.0);
    const double ideal = b > 0.0 ? -std::log2(b) : std::numeric_limits<double>::infinity();
    rep.bound_ball_codelength += px[x] * ideal;
    rep.bound_giveup += a > 0.0 ? px[x] * a * ideal : 0.0;
    rep.bound_divergence_form +=
        px[x] * (binary_divergence(a, b).bits() + binary_entropy(a).bits());
  }
  rep.entropy_chain_rhs = rep.mean_log_w + std::log2(1.0 + rep.mean_log_w) + kLog2E;
  rep.exhaustion_rate = static_cast<double>(rep.exhausted_trials) / static_cast<double>(trials);
  rep.insufficient_length = rep.exhaustion_rate >= 1e-3;
  return rep;
}

}  // namespace qproxy
