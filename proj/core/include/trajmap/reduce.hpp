#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace trajmap {

/// Elements per reduction chunk. Each chunk is summed left to right.
inline constexpr std::size_t kReduceChunk = 4096;

/// Combines chunk partials in chunk-index order with a binary-counter pairwise tree.
/// The tree shape depends only on the number of partials pushed, so any producer that
/// feeds the same partials in the same order gets the same bits.
class PairwiseAccumulator {
 public:
  void push(double partial);
  double result() const;
  bool empty() const noexcept { return stack_.empty(); }

 private:
  std::vector<std::pair<unsigned, double>> stack_;  // (level, value)
};

/// Chunked deterministic inner product of equal-length spans.
double chunked_dot(std::span<const double> a, std::span<const double> b);
double chunked_norm2(std::span<const double> a);  // squared norm

/// Runs fn(i) for i in [0, n) across `threads` workers with a static block partition.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace trajmap
