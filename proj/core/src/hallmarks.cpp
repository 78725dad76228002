#include "trajmap/hallmarks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "trajmap/error.hpp"
#include "trajmap/reduce.hpp"

namespace trajmap {
namespace {

using Vec = std::vector<double>;

// Keeps only the flattened checkpoints still needed by a forward sweep over t.
class PointCache {
 public:
  PointCache(const TrajectoryStore& store, const ResolvedSelection& sel) : store_(store), sel_(sel) {}

  const Vec& get(std::size_t i) {
    auto it = cache_.find(i);
    if (it == cache_.end()) it = cache_.emplace(i, store_.flatten(i, sel_)).first;
    return it->second;
  }
  void pin(std::size_t i) { pinned_.push_back(i); }
  void evict_below(std::size_t lo) {
    for (auto it = cache_.begin(); it != cache_.end();) {
      const bool keep = it->first >= lo || std::find(pinned_.begin(), pinned_.end(), it->first) != pinned_.end();
      it = keep ? std::next(it) : cache_.erase(it);
    }
  }

 private:
  const TrajectoryStore& store_;
  const ResolvedSelection& sel_;
  std::map<std::size_t, Vec> cache_;
  std::vector<std::size_t> pinned_;
};

Vec diff(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

std::string lagged_id(std::string_view base, std::size_t k) { return std::string(base) + "_k" + std::to_string(k); }

}  // namespace

std::string_view measure_name(AngularMeasure m) noexcept {
  switch (m) {
    case AngularMeasure::ConsecutiveUpdates: return "consecutive_updates";
    case AngularMeasure::LaggedUpdates: return "lagged_updates";
    case AngularMeasure::ApexAtInit: return "apex_at_init";
    case AngularMeasure::ApexAtOrigin: return "apex_at_origin";
    case AngularMeasure::UpdateVsPosition: return "update_vs_position";
    case AngularMeasure::UpdateVsTotalDisplacement: return "update_vs_total_displacement";
    case AngularMeasure::ProgressVsTotalDisplacement: return "progress_vs_total_displacement";
    case AngularMeasure::UpdateVsDisplacementFromInit: return "update_vs_displacement_from_init";
  }
  return "?";
}

std::string_view measure_name(NormMeasure m) noexcept {
  switch (m) {
    case NormMeasure::ParamNorm: return "param_norm";
    case NormMeasure::DistFromInit: return "dist_from_init";
    case NormMeasure::UpdateNorm: return "update_norm";
  }
  return "?";
}

std::optional<AngularMeasure> parse_angular_measure(std::string_view name) {
  for (auto m : kAllAngularMeasures) {
    if (measure_name(m) == name) return m;
  }
  return std::nullopt;
}

std::optional<NormMeasure> parse_norm_measure(std::string_view name) {
  for (auto m : kAllNormMeasures) {
    if (measure_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view units_name(SeriesUnits u) noexcept {
  switch (u) {
    case SeriesUnits::Degrees: return "degrees";
    case SeriesUnits::L2Norm: return "l2norm";
    case SeriesUnits::Dimensionless: return "dimensionless";
  }
  return "?";
}

MdsResult mds(const CosineMap& cosmap) {
  const std::size_t n = cosmap.n();
  // Row sums first, then across rows, keeps the double loop order fixed.
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += cosmap.values(i, j);
    total += row;
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  // The mean of unit vectors has a non-negative squared norm; rounding may dip a hair below 0.
  return {n == 0 ? 0.0 : std::max(0.0, total / nn), cosmap.origin, n};
}

MdsResult mds_relative(const TrajectoryStore& store, std::size_t tau, const SelectionSpec& sel,
                       const KernelOptions& options) {
  return mds(relative_trajectory_map(store, tau, sel, options));
}

double angle_degrees(double dot, double norm_a, double norm_b) {
  const double c = std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
  return std::acos(c) * (180.0 / std::numbers::pi);
}

double angle_between_degrees(std::span<const double> a, std::span<const double> b, double norm_a, double norm_b) {
  Vec minus(a.size());
  Vec plus(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ua = a[i] / norm_a;
    const double ub = b[i] / norm_b;
    minus[i] = ua - ub;
    plus[i] = ua + ub;
  }
  const double theta = 2.0 * std::atan2(std::sqrt(chunked_norm2(minus)), std::sqrt(chunked_norm2(plus)));
  return theta * (180.0 / std::numbers::pi);
}

std::optional<std::pair<std::size_t, std::size_t>> defined_range(AngularMeasure m, std::size_t n, std::size_t k) {
  if (n == 0) return std::nullopt;
  const std::size_t last = n - 1;  // T
  auto range = [](std::size_t lo, long long hi) -> std::optional<std::pair<std::size_t, std::size_t>> {
    if (hi < 0 || static_cast<long long>(lo) > hi) return std::nullopt;
    return std::pair{lo, static_cast<std::size_t>(hi)};
  };
  const auto T = static_cast<long long>(last);
  switch (m) {
    case AngularMeasure::ConsecutiveUpdates: return range(1, T - 1);
    case AngularMeasure::LaggedUpdates: return range(k, T - static_cast<long long>(k));
    case AngularMeasure::ApexAtInit: return range(1, T);
    case AngularMeasure::ApexAtOrigin: return range(0, T);
    case AngularMeasure::UpdateVsPosition: return range(0, T - 1);
    case AngularMeasure::UpdateVsTotalDisplacement: return range(0, T - 1);
    case AngularMeasure::ProgressVsTotalDisplacement: return range(1, T);
    case AngularMeasure::UpdateVsDisplacementFromInit: return range(1, T - 1);
  }
  return std::nullopt;
}

std::optional<std::pair<std::size_t, std::size_t>> defined_range(NormMeasure m, std::size_t n, std::size_t k) {
  if (n == 0) return std::nullopt;
  const auto T = static_cast<long long>(n - 1);
  switch (m) {
    case NormMeasure::ParamNorm:
    case NormMeasure::DistFromInit:
      return std::pair<std::size_t, std::size_t>{0, n - 1};
    case NormMeasure::UpdateNorm:
      if (T - static_cast<long long>(k) < 0) return std::nullopt;
      return std::pair<std::size_t, std::size_t>{0, n - 1 - k};
  }
  return std::nullopt;
}

ScalarSeries angular_series(const TrajectoryStore& store, AngularMeasure measure, const SelectionSpec& sel,
                            const SeriesOptions& options) {
  if (options.k < 1) throw Error(ErrorCode::InvalidSpec, "lag k must be >= 1");
  const std::size_t k = measure == AngularMeasure::ConsecutiveUpdates ? 1 : options.k;
  const auto range = defined_range(measure, store.n_points(), k);
  if (!range) {
    throw Error(ErrorCode::InsufficientPoints, std::string(measure_name(measure)) + " needs more than " +
                                                   std::to_string(store.n_points()) + " checkpoints");
  }
  const auto resolved = store.resolve(sel);
  const std::size_t T = store.n_points() - 1;

  ScalarSeries out;
  out.measure_id = measure == AngularMeasure::LaggedUpdates ? lagged_id(measure_name(measure), k)
                                                           : std::string(measure_name(measure));
  out.k = k;
  out.units = SeriesUnits::Degrees;

  PointCache cache(store, resolved);
  cache.pin(0);
  cache.pin(1);
  cache.pin(T);

  for (std::size_t t = range->first; t <= range->second; ++t) {
    Vec a;
    Vec b;
    switch (measure) {
      case AngularMeasure::ConsecutiveUpdates:
      case AngularMeasure::LaggedUpdates:
        a = diff(cache.get(t + k), cache.get(t));
        b = diff(cache.get(t), cache.get(t - k));
        break;
      case AngularMeasure::ApexAtInit:
        a = diff(cache.get(t), cache.get(0));
        b = diff(cache.get(1), cache.get(0));
        break;
      case AngularMeasure::ApexAtOrigin:
        a = cache.get(t);
        b = cache.get(0);
        break;
      case AngularMeasure::UpdateVsPosition:
        a = diff(cache.get(t + 1), cache.get(t));
        b = cache.get(t);
        break;
      case AngularMeasure::UpdateVsTotalDisplacement:
        a = diff(cache.get(t + 1), cache.get(t));
        b = diff(cache.get(T), cache.get(0));
        break;
      case AngularMeasure::ProgressVsTotalDisplacement:
        a = diff(cache.get(t), cache.get(0));
        b = diff(cache.get(T), cache.get(0));
        break;
      case AngularMeasure::UpdateVsDisplacementFromInit:
        a = diff(cache.get(t + 1), cache.get(t));
        b = diff(cache.get(t), cache.get(0));
        break;
    }
    const double na = std::sqrt(chunked_norm2(a));
    const double nb = std::sqrt(chunked_norm2(b));
    if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
      if (options.strict) {
        throw Error(ErrorCode::DegenerateVector,
                    std::string(measure_name(measure)) + " at t=" + std::to_string(t) + ": zero-length argument");
      }
      out.degenerate_t.push_back(t);
    } else {
      out.points.push_back({t, angle_between_degrees(a, b, na, nb)});
    }
    if (t >= k) cache.evict_below(t - k + 1);
  }
  return out;
}

ScalarSeries norm_series(const TrajectoryStore& store, NormMeasure measure, const SelectionSpec& sel,
                         const SeriesOptions& options) {
  if (options.k < 1) throw Error(ErrorCode::InvalidSpec, "lag k must be >= 1");
  const std::size_t k = options.k;
  const auto range = defined_range(measure, store.n_points(), k);
  if (!range) {
    throw Error(ErrorCode::InsufficientPoints, std::string(measure_name(measure)) + " needs more than " +
                                                   std::to_string(store.n_points()) + " checkpoints");
  }
  const auto resolved = store.resolve(sel);
  ScalarSeries out;
  out.measure_id = measure == NormMeasure::UpdateNorm ? lagged_id(measure_name(measure), k)
                                                      : std::string(measure_name(measure));
  out.k = k;
  out.units = SeriesUnits::L2Norm;

  PointCache cache(store, resolved);
  cache.pin(0);
  for (std::size_t t = range->first; t <= range->second; ++t) {
    double value = 0.0;
    switch (measure) {
      case NormMeasure::ParamNorm: value = std::sqrt(chunked_norm2(cache.get(t))); break;
      case NormMeasure::DistFromInit: value = std::sqrt(chunked_norm2(diff(cache.get(t), cache.get(0)))); break;
      case NormMeasure::UpdateNorm: value = std::sqrt(chunked_norm2(diff(cache.get(t + k), cache.get(t)))); break;
    }
    out.points.push_back({t, value});
    cache.evict_below(t + 1);
  }
  return out;
}

}  // namespace trajmap
