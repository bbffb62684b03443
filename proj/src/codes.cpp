#include "qproxy/codes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

#include "qproxy/infotheory.hpp"

namespace qproxy {

std::string shortlex_string(std::size_t k) {
  // Binary expansion of k with the leading one dropped.
  const int width = std::bit_width(k);
  std::string s;
  for (int i = width - 2; i >= 0; --i) s.push_back(((k >> i) & 1U) ? '1' : '0');
  return s;
}

LosslessCode one_to_one_optimal(std::span<const double> p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] > p[b]; });

  LosslessCode code;
  code.lengths.resize(p.size());
  code.codewords.resize(p.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t x = order[rank];
    code.codewords[x] = shortlex_string(rank + 1);
    code.lengths[x] = code.codewords[x].size();
    code.expected_length += p[x] * static_cast<double>(code.lengths[x]);
  }
  code.prefix_free = p.size() <= 1;
  return code;
}

LosslessCode huffman(std::span<const double> p) {
  const std::size_t m = p.size();
  LosslessCode code;
  code.lengths.assign(m, 0);
  code.codewords.assign(m, "");
  code.prefix_free = true;
  if (m <= 1) return code;

  struct Node {
    std::size_t left = 0;
    std::size_t right = 0;
  };
  std::vector<Node> nodes(m);
  using Entry = std::tuple<double, std::size_t>;  // (probability, node id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::size_t x = 0; x < m; ++x) heap.emplace(p[x], x);
  while (heap.size() > 1) {
    const auto [pa, a] = heap.top();
    heap.pop();
    const auto [pb, b] = heap.top();
    heap.pop();
    nodes.push_back({a, b});
    heap.emplace(pa + pb, nodes.size() - 1);
  }

  // Walk from the root assigning 0 to the first-merged child.
  std::vector<std::pair<std::size_t, std::string>> stack{{nodes.size() - 1, ""}};
  while (!stack.empty()) {
    auto [id, prefix] = std::move(stack.back());
    stack.pop_back();
    if (id < m) {
      code.codewords[id] = prefix;
      code.lengths[id] = prefix.size();
      continue;
    }
    stack.emplace_back(nodes[id].right, prefix + "1");
    stack.emplace_back(nodes[id].left, prefix + "0");
  }
  for (std::size_t x = 0; x < m; ++x)
    code.expected_length += p[x] * static_cast<double>(code.lengths[x]);
  return code;
}

double kraft_sum(std::span<const std::size_t> lengths) {
  double s = 0.0;
  for (auto l : lengths) s += std::ldexp(1.0, -static_cast<int>(l));
  return s;
}

LosslessVerdict lossless_sandwich_check(std::span<const double> p) {
  LosslessVerdict v;
  v.entropy_bits = entropy(p).bits();
  v.one_to_one_length = one_to_one_optimal(p).expected_length;
  v.huffman_length = huffman(p).expected_length;
  const double h = v.entropy_bits;
  v.one_to_one_lower_slack = v.one_to_one_length - (h - std::log2(h + 1.0) - kLog2E);
  v.one_to_one_upper_slack = h - v.one_to_one_length;
  v.prefix_lower_slack = v.huffman_length - h;
  v.prefix_upper_slack = h + 1.0 - v.huffman_length;
  return v;
}

}  // namespace qproxy
