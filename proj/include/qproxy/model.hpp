#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qproxy/matrix.hpp"

namespace qproxy {

// Tolerance for "sums to one" on probability vectors and kernel rows.
inline constexpr double kProbTolerance = 1e-12;

enum class FidelityMode { guaranteed, cond_excess, excess };

std::string_view to_string(FidelityMode mode);

/// Finite source distribution with a distortion matrix.
///
/// Letters with zero probability are dropped on construction and the remaining
/// probabilities are renormalized once; `source_index()` maps back to the
/// letter numbering of the input.
class InstanceSpec {
 public:
  static InstanceSpec create(ProbVector px, RealMatrix dist,
                             std::vector<std::string> labels_x = {},
                             std::vector<std::string> labels_y = {});

  std::size_t source_size() const { return px_.size(); }
  std::size_t reproduction_size() const { return dist_.cols(); }

  const ProbVector& px() const { return px_; }
  const RealMatrix& dist() const { return dist_; }
  double dist(std::size_t x, std::size_t y) const { return dist_(x, y); }
  const std::vector<std::string>& labels_x() const { return labels_x_; }
  const std::vector<std::string>& labels_y() const { return labels_y_; }
  const std::vector<std::size_t>& source_index() const { return source_index_; }

  double max_distortion() const;

 private:
  InstanceSpec() = default;

  ProbVector px_;
  RealMatrix dist_;
  std::vector<std::string> labels_x_;
  std::vector<std::string> labels_y_;
  std::vector<std::size_t> source_index_;
};

// Parses the JSON instance format. Parse and validation failures raise
// ValidationError with the offending line when one can be identified.
InstanceSpec parse_instance(std::string_view json_text);
InstanceSpec load_instance(const std::filesystem::path& path);
std::string instance_to_json(const InstanceSpec& instance);

/// Incidence of the distortion balls B_d(x) = {y : dist(x, y) <= d}.
class BallTable {
 public:
  BallTable(const InstanceSpec& instance, double d);

  double threshold() const { return d_; }
  std::size_t source_size() const { return incidence_.rows(); }
  std::size_t reproduction_size() const { return incidence_.cols(); }

  bool contains(std::size_t x, std::size_t y) const { return incidence_(x, y) != 0; }
  std::size_t ball_size(std::size_t x) const { return sizes_[x]; }
  const std::vector<std::size_t>& ball_sizes() const { return sizes_; }
  const Matrix<std::uint8_t>& incidence() const { return incidence_; }

  // P_Y(B_d(x)) and P_Y(B_d^c(x)), each summed directly.
  double mass(std::size_t x, std::span<const double> py) const;
  double complement_mass(std::size_t x, std::span<const double> py) const;

 private:
  double d_;
  Matrix<std::uint8_t> incidence_;
  std::vector<std::size_t> sizes_;
};

BallTable ball_table(const InstanceSpec& instance, double d);

struct FeasibilityVerdict {
  bool feasible = true;
  std::vector<std::size_t> offending;  // supported letters with an empty ball
  double empty_ball_mass = 0.0;        // P_X of those letters
};

FeasibilityVerdict check_feasibility(const BallTable& ball, std::span<const double> px,
                                     FidelityMode mode, double eps = 0.0);

// Throws InfeasibleError carrying the verdict's offending letters.
void require_feasible(const BallTable& ball, std::span<const double> px, FidelityMode mode,
                      double eps = 0.0);

struct ReproductionDistribution {
  ProbVector py;

  static ReproductionDistribution uniform(std::size_t n);
  std::size_t size() const { return py.size(); }
  double operator[](std::size_t y) const { return py[y]; }
};

/// Row-stochastic matrix P_{Y|X}.
struct ConditionalKernel {
  RealMatrix rows;

  std::size_t source_size() const { return rows.rows(); }
  std::size_t reproduction_size() const { return rows.cols(); }
  double operator()(std::size_t x, std::size_t y) const { return rows(x, y); }

  // Y marginal of P_X P_{Y|X}.
  ReproductionDistribution marginal(std::span<const double> px) const;
  // Largest |row sum - 1| over all rows.
  double max_row_defect() const;
};

/// Per-letter success probabilities alpha(x) = 1 - eps(x) with threshold q.
struct AlphaProfile {
  std::vector<double> alpha;
  double q = 0.0;

  static AlphaProfile ones(std::size_t m);
  std::vector<double> eps_profile() const;
  double expectation(std::span<const double> px) const;
};

bool is_probability_vector(std::span<const double> p, double tol = kProbTolerance);

}  // namespace qproxy
