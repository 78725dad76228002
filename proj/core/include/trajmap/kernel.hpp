#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajmap/ckptstore.hpp"

namespace trajmap {

/// Relative cosines are undefined for vectors whose norm is at or below this.
inline constexpr double kNormEpsilon = 1e-30;

struct OriginSpec {
  enum class Kind { Absolute, CheckpointIndex, External };

  Kind kind = Kind::Absolute;
  std::size_t tau = 0;  // store position, for CheckpointIndex
  std::shared_ptr<const TrajectoryStore> external;  // one-checkpoint store, for External

  static OriginSpec absolute() { return {}; }
  static OriginSpec checkpoint(std::size_t tau) { return {Kind::CheckpointIndex, tau, nullptr}; }
  static OriginSpec external_point(std::shared_ptr<const TrajectoryStore> point) {
    return {Kind::External, 0, std::move(point)};
  }
  std::string describe() const;
};

/// Dense symmetric matrix, row-major.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t n() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  /// Sets (i, j) and (j, i) to the same bits.
  void set_sym(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }
  std::span<const double> data() const noexcept { return values_; }

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

struct GramMatrix {
  SymMatrix values;
  std::vector<double> norms;  // ||theta_i - origin||
  OriginSpec origin;
  std::vector<std::string> point_labels;
  std::vector<std::size_t> point_positions;  // store positions of the rows
  std::size_t dim = 0;  // selected parameter count

  std::size_t n() const noexcept { return values.n(); }
};

struct CosineMap {
  SymMatrix values;
  OriginSpec origin;
  std::vector<std::string> point_labels;
  std::vector<std::size_t> point_positions;
  std::size_t dim = 0;

  std::size_t n() const noexcept { return values.n(); }
};

struct KernelOptions {
  unsigned threads = 1;
  std::size_t slab_chunks = 64;  // reduction chunks read per point per pass
};

/// Pairwise inner products of (theta_i - origin). A trajectory-point origin drops its own row.
GramMatrix compute_gram(const TrajectoryStore& store, const OriginSpec& origin, const SelectionSpec& sel,
                        const KernelOptions& options = {});

/// Throws DegenerateVector when a norm is at or below kNormEpsilon.
CosineMap compute_cosine_map(const GramMatrix& gram);

CosineMap trajectory_map(const TrajectoryStore& store, const SelectionSpec& sel, const KernelOptions& options = {});

CosineMap relative_trajectory_map(const TrajectoryStore& store, std::size_t tau, const SelectionSpec& sel,
                                  const KernelOptions& options = {});

using SelectionGroup = std::pair<std::string, SelectionSpec>;

std::vector<std::pair<std::string, CosineMap>> layerwise_maps(const TrajectoryStore& store,
                                                              std::span<const SelectionGroup> groups,
                                                              const KernelOptions& options = {});

/// Label used for store position i in matrix headers.
std::string point_label(const TrajectoryStore& store, std::size_t i);

}  // namespace trajmap
