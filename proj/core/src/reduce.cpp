#include "trajmap/reduce.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "trajmap/error.hpp"

namespace trajmap {

void PairwiseAccumulator::push(double partial) {
  unsigned level = 0;
  double value = partial;
  while (!stack_.empty() && stack_.back().first == level) {
    value = stack_.back().second + value;
    stack_.pop_back();
    ++level;
  }
  stack_.emplace_back(level, value);
}

double PairwiseAccumulator::result() const {
  if (stack_.empty()) return 0.0;
  double acc = stack_.back().second;
  for (auto it = stack_.rbegin() + 1; it != stack_.rend(); ++it) acc = it->second + acc;
  return acc;
}

double chunked_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidSpec, "chunked_dot: length mismatch");
  PairwiseAccumulator acc;
  for (std::size_t begin = 0; begin < a.size(); begin += kReduceChunk) {
    const std::size_t end = std::min(a.size(), begin + kReduceChunk);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += a[i] * b[i];
    acc.push(s);
  }
  return acc.result();
}

double chunked_norm2(std::span<const double> a) { return chunked_dot(a, a); }

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace trajmap
