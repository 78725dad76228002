#pragma once

#include <array>
#include <cstdint>

namespace trajmap {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

/// Derives an independent seed for sub-stream `tag` of `seed`.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// xoshiro256** seeded from SplitMix64, with Box-Muller normals.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  double uniform() noexcept;        // [0, 1), 53 bits
  double uniform_open0() noexcept;  // (0, 1]
  double gaussian() noexcept;       // standard normal; pairs come from one Box-Muller draw
  std::uint64_t below(std::uint64_t bound) noexcept;  // uniform in [0, bound), unbiased
  double rademacher() noexcept;     // +1 or -1

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace trajmap
