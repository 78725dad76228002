#include "trajmap/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "trajmap/error.hpp"
#include "trajmap/reduce.hpp"

namespace trajmap {

std::string OriginSpec::describe() const {
  switch (kind) {
    case Kind::Absolute: return "absolute";
    case Kind::CheckpointIndex: return "ckpt:" + std::to_string(tau);
    case Kind::External: return "external";
  }
  return "?";
}

std::string point_label(const TrajectoryStore& store, std::size_t i) {
  const auto& p = store.points()[i];
  return p.label.empty() ? std::to_string(p.index) : p.label;
}

GramMatrix compute_gram(const TrajectoryStore& store, const OriginSpec& origin, const SelectionSpec& sel,
                        const KernelOptions& options) {
  const auto resolved = store.resolve(sel);

  std::vector<std::size_t> rows;
  const TrajectoryStore* origin_store = nullptr;
  std::size_t origin_pos = 0;
  switch (origin.kind) {
    case OriginSpec::Kind::Absolute:
      for (std::size_t i = 0; i < store.n_points(); ++i) rows.push_back(i);
      break;
    case OriginSpec::Kind::CheckpointIndex:
      if (origin.tau >= store.n_points()) {
        throw Error(ErrorCode::OriginOutOfRange,
                    "origin " + std::to_string(origin.tau) + " with " + std::to_string(store.n_points()) + " points");
      }
      for (std::size_t i = 0; i < store.n_points(); ++i) {
        if (i != origin.tau) rows.push_back(i);
      }
      origin_store = &store;
      origin_pos = origin.tau;
      break;
    case OriginSpec::Kind::External:
      if (!origin.external || origin.external->n_points() != 1) {
        throw Error(ErrorCode::OriginOutOfRange, "external origin must be a one-checkpoint store");
      }
      if (origin.external->layout() != store.layout()) {
        throw Error(ErrorCode::LayoutMismatch, "external origin layout differs from the trajectory");
      }
      for (std::size_t i = 0; i < store.n_points(); ++i) rows.push_back(i);
      origin_store = origin.external.get();
      break;
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyTrajectory, "no points remain after omitting the origin row");

  const std::size_t n = rows.size();
  const std::size_t p = resolved.dim;
  const std::size_t slab = std::max<std::size_t>(1, options.slab_chunks) * kReduceChunk;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<PairwiseAccumulator> acc(pairs.size());
  std::vector<std::vector<double>> buf(n);
  std::vector<double> origin_buf;

  for (std::size_t begin = 0; begin < p; begin += slab) {
    const std::size_t len = std::min(slab, p - begin);
    if (origin_store) {
      origin_buf.resize(len);
      origin_store->read_slice(origin_pos, resolved, begin, origin_buf);
    }
    parallel_for(n, options.threads, [&](std::size_t r) {
      auto& b = buf[r];
      b.resize(len);
      store.read_slice(rows[r], resolved, begin, b);
      if (origin_store) {
        for (std::size_t k = 0; k < len; ++k) b[k] -= origin_buf[k];
      }
    });
    parallel_for(pairs.size(), options.threads, [&](std::size_t q) {
      const auto& a = buf[pairs[q].first];
      const auto& b = buf[pairs[q].second];
      for (std::size_t c = 0; c < len; c += kReduceChunk) {
        const std::size_t end = std::min(len, c + kReduceChunk);
        double s = 0.0;
        for (std::size_t k = c; k < end; ++k) s += a[k] * b[k];
        acc[q].push(s);
      }
    });
  }

  GramMatrix g;
  g.values = SymMatrix(n);
  for (std::size_t q = 0; q < pairs.size(); ++q) g.values.set_sym(pairs[q].first, pairs[q].second, acc[q].result());
  g.norms.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.norms[i] = std::sqrt(std::max(0.0, g.values(i, i)));
  g.origin = origin;
  g.point_positions = rows;
  for (auto r : rows) g.point_labels.push_back(point_label(store, r));
  g.dim = p;
  return g;
}

CosineMap compute_cosine_map(const GramMatrix& gram) {
  const std::size_t n = gram.n();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(gram.norms[i] > kNormEpsilon)) {
      throw Error(ErrorCode::DegenerateVector,
                  "point " + (i < gram.point_labels.size() ? gram.point_labels[i] : std::to_string(i)) +
                      " has zero norm relative to origin " + gram.origin.describe());
    }
  }
  CosineMap c;
  c.values = SymMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double kk = gram.values(i, i) * gram.values(j, j);
      const double denom = std::isnormal(kk) ? std::sqrt(kk) : gram.norms[i] * gram.norms[j];
      const double v = gram.values(i, j) / denom;
      c.values.set_sym(i, j, std::clamp(v, -1.0, 1.0));
    }
  }
  c.origin = gram.origin;
  c.point_labels = gram.point_labels;
  c.point_positions = gram.point_positions;
  c.dim = gram.dim;
  return c;
}

CosineMap trajectory_map(const TrajectoryStore& store, const SelectionSpec& sel, const KernelOptions& options) {
  return compute_cosine_map(compute_gram(store, OriginSpec::absolute(), sel, options));
}

CosineMap relative_trajectory_map(const TrajectoryStore& store, std::size_t tau, const SelectionSpec& sel,
                                  const KernelOptions& options) {
  if (store.n_points() < 2) throw Error(ErrorCode::EmptyTrajectory, "relative map needs at least two checkpoints");
  return compute_cosine_map(compute_gram(store, OriginSpec::checkpoint(tau), sel, options));
}

std::vector<std::pair<std::string, CosineMap>> layerwise_maps(const TrajectoryStore& store,
                                                              std::span<const SelectionGroup> groups,
                                                              const KernelOptions& options) {
  std::vector<std::pair<std::string, CosineMap>> out;
  out.reserve(groups.size());
  for (const auto& [name, sel] : groups) {
    try {
      out.emplace_back(name, trajectory_map(store, sel, options));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptySelection) {
        throw Error(ErrorCode::EmptySelection, "group " + name + " selects no tensors");
      }
      throw;
    }
  }
  return out;
}

}  // namespace trajmap
