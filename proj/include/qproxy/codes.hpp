#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qproxy {

struct LosslessCode {
  std::vector<std::size_t> lengths;     // indexed by source letter
  std::vector<std::string> codewords;   // '0'/'1' strings, indexed by source letter
  double expected_length = 0.0;         // bits
  bool prefix_free = false;
};

// The k-th binary string in shortlex order, k >= 1: "", "0", "1", "00", ...
std::string shortlex_string(std::size_t k);

// Optimal injective (not necessarily prefix-free) code: the k-th most likely
// letter gets the k-th shortest string. Ties keep the lower letter index first.
LosslessCode one_to_one_optimal(std::span<const double> p);

// Huffman code; merges break ties by (probability, node id) with leaves
// numbered by letter index and internal nodes after them in creation order.
LosslessCode huffman(std::span<const double> p);

double kraft_sum(std::span<const std::size_t> lengths);

struct LosslessVerdict {
  double entropy_bits = 0.0;
  double one_to_one_length = 0.0;
  double huffman_length = 0.0;
  // Each slack is (larger side - smaller side) of one inequality; >= 0 passes.
  double one_to_one_lower_slack = 0.0;  // L* - (H - log2(H + 1) - log2 e)
  double one_to_one_upper_slack = 0.0;  // H - L*
  double prefix_lower_slack = 0.0;      // L_huffman - H
  double prefix_upper_slack = 0.0;      // H + 1 - L_huffman
  bool pass(double tol = 1e-12) const {
    return one_to_one_lower_slack >= -tol && one_to_one_upper_slack >= -tol &&
           prefix_lower_slack >= -tol && prefix_upper_slack >= -tol;
  }
};

LosslessVerdict lossless_sandwich_check(std::span<const double> p);

}  // namespace qproxy
