#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajmap/ckptstore.hpp"
#include "trajmap/kernel.hpp"

namespace trajmap {

enum class AngularMeasure {
  ConsecutiveUpdates,            // ang(th[t+1]-th[t], th[t]-th[t-1])
  LaggedUpdates,                 // ang(th[t+k]-th[t], th[t]-th[t-k])
  ApexAtInit,                    // ang(th[t]-th[0], th[1]-th[0])
  ApexAtOrigin,                  // ang(th[t], th[0])
  UpdateVsPosition,              // ang(th[t+1]-th[t], th[t])
  UpdateVsTotalDisplacement,     // ang(th[t+1]-th[t], th[T]-th[0])
  ProgressVsTotalDisplacement,   // ang(th[t]-th[0], th[T]-th[0])
  UpdateVsDisplacementFromInit,  // ang(th[t+1]-th[t], th[t]-th[0])
};

enum class NormMeasure {
  ParamNorm,     // ||th[t]||
  DistFromInit,  // ||th[t]-th[0]||
  UpdateNorm,    // ||th[t+k]-th[t]||
};

inline constexpr AngularMeasure kAllAngularMeasures[] = {
    AngularMeasure::ConsecutiveUpdates,        AngularMeasure::LaggedUpdates,
    AngularMeasure::ApexAtInit,                AngularMeasure::ApexAtOrigin,
    AngularMeasure::UpdateVsPosition,          AngularMeasure::UpdateVsTotalDisplacement,
    AngularMeasure::ProgressVsTotalDisplacement, AngularMeasure::UpdateVsDisplacementFromInit,
};
inline constexpr NormMeasure kAllNormMeasures[] = {NormMeasure::ParamNorm, NormMeasure::DistFromInit,
                                                   NormMeasure::UpdateNorm};

std::string_view measure_name(AngularMeasure m) noexcept;
std::string_view measure_name(NormMeasure m) noexcept;
std::optional<AngularMeasure> parse_angular_measure(std::string_view name);
std::optional<NormMeasure> parse_norm_measure(std::string_view name);

enum class SeriesUnits { Degrees, L2Norm, Dimensionless };
std::string_view units_name(SeriesUnits u) noexcept;

struct SeriesPoint {
  std::size_t t = 0;  // store position
  double value = 0.0;
};

struct ScalarSeries {
  std::string measure_id;
  std::size_t k = 1;
  SeriesUnits units = SeriesUnits::Dimensionless;
  std::vector<SeriesPoint> points;
  std::vector<std::size_t> degenerate_t;  // positions skipped because an argument vector was zero
};

struct MdsResult {
  double omega = 0.0;
  OriginSpec origin;
  std::size_t n = 0;
};

/// Mean of all n^2 entries, diagonal included.
MdsResult mds(const CosineMap& cosmap);

MdsResult mds_relative(const TrajectoryStore& store, std::size_t tau, const SelectionSpec& sel,
                       const KernelOptions& options = {});

struct SeriesOptions {
  std::size_t k = 1;
  /// When set, a zero-norm argument throws DegenerateVector instead of being listed in degenerate_t.
  bool strict = false;
};

/// Angles in degrees. Throws InsufficientPoints if the measure has no defined t for this store.
ScalarSeries angular_series(const TrajectoryStore& store, AngularMeasure measure, const SelectionSpec& sel,
                            const SeriesOptions& options = {});

ScalarSeries norm_series(const TrajectoryStore& store, NormMeasure measure, const SelectionSpec& sel,
                         const SeriesOptions& options = {});

/// Range [first, last] of t for which the measure is defined on n points, or nullopt.
std::optional<std::pair<std::size_t, std::size_t>> defined_range(AngularMeasure m, std::size_t n, std::size_t k);
std::optional<std::pair<std::size_t, std::size_t>> defined_range(NormMeasure m, std::size_t n, std::size_t k);

/// Angle in degrees between two vectors from their inner product and norms; clamps the cosine.
double angle_degrees(double dot, double norm_a, double norm_b);

/// Angle in degrees as 2 atan2(|a/|a| - b/|b||, |a/|a| + b/|b||); exact 0 for parallel, 180 for antipodal vectors.
double angle_between_degrees(std::span<const double> a, std::span<const double> b, double norm_a, double norm_b);

}  // namespace trajmap
