#include "trajmap/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajmap/error.hpp"
#include "trajmap/reduce.hpp"
#include "trajmap/rng.hpp"

namespace trajmap {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

DenseVector DenseMatrix::apply(std::span<const double> v) const {
  DenseVector out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (*this)(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

double QuadraticSpec::eta_at(std::size_t step) const {
  if (eta.empty()) throw Error(ErrorCode::InvalidSpec, "empty learning-rate schedule");
  return eta[std::min(step, eta.size()) - 1];
}

void QuadraticSpec::validate() const {
  if (eigenvalues.empty()) throw Error(ErrorCode::InvalidSpec, "dimension must be >= 1");
  if (!std::is_sorted(eigenvalues.begin(), eigenvalues.end(), std::greater<>())) {
    throw Error(ErrorCode::InvalidSpec, "eigenvalues must be sorted descending");
  }
  if (!(alpha >= 0.0) || !(mu >= 0.0)) throw Error(ErrorCode::InvalidSpec, "alpha and mu must be >= 0");
  if (eta.empty() || !std::all_of(eta.begin(), eta.end(), [](double e) { return e > 0.0; })) {
    throw Error(ErrorCode::InvalidSpec, "learning rates must be > 0");
  }
  if (theta_init.size() != eigenvalues.size()) {
    throw Error(ErrorCode::InvalidSpec, "theta_init has length " + std::to_string(theta_init.size()) +
                                            ", expected " + std::to_string(eigenvalues.size()));
  }
}

DenseMatrix rotation_basis(std::size_t d, std::uint64_t seed) {
  DenseMatrix q{d, std::vector<double>(d * d, 0.0)};
  if (seed == 0) {
    for (std::size_t i = 0; i < d; ++i) q(i, i) = 1.0;
    return q;
  }
  Xoshiro256ss rng(seed);
  for (auto& v : q.values) v = rng.gaussian();
  // Modified Gram-Schmidt over columns.
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double r = 0.0;
      for (std::size_t i = 0; i < d; ++i) r += q(i, k) * q(i, j);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= r * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw Error(ErrorCode::InvalidSpec, "rotation basis is rank deficient");
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
  }
  return q;
}

DenseMatrix build_hessian(const QuadraticSpec& spec) {
  const std::size_t d = spec.dim();
  const auto q = rotation_basis(d, spec.rotation_seed);
  DenseMatrix m{d, std::vector<double>(d * d, 0.0)};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += q(i, k) * spec.eigenvalues[k] * q(j, k);
      m(i, j) = s;
    }
  }
  // Exactly symmetric.
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) m(j, i) = m(i, j);
  }
  return m;
}

QuadraticTrace simulate_quadratic(const QuadraticSpec& spec, std::size_t steps) {
  spec.validate();
  if (steps < 2) throw Error(ErrorCode::InvalidSpec, "need at least two steps");
  const std::size_t d = spec.dim();
  auto a = build_hessian(spec);  // becomes M + alpha I
  for (std::size_t i = 0; i < d; ++i) a(i, i) += spec.alpha;

  QuadraticTrace trace;
  trace.thetas.reserve(steps + 1);
  trace.thetas.push_back(spec.theta_init);
  DenseVector prev_grad;  // (M + alpha I) theta_{t-1} from the first step of the current pair
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto& cur = trace.thetas.back();
    const double eta = spec.eta_at(s);
    auto grad = a.apply(cur);
    DenseVector next(d);
    if (s % 2 == 1) {
      for (std::size_t i = 0; i < d; ++i) next[i] = cur[i] - eta * grad[i];
    } else {
      const double coeff = spec.mu * spec.eta_at(s - 1);
      for (std::size_t i = 0; i < d; ++i) next[i] = cur[i] - eta * (grad[i] - coeff * prev_grad[i]);
    }
    if (!all_finite(next)) {
      throw Error(ErrorCode::NonFiniteIterate, "iterate " + std::to_string(s) + " is not finite");
    }
    DenseVector delta(d);
    for (std::size_t i = 0; i < d; ++i) delta[i] = next[i] - cur[i];
    trace.deltas.push_back(std::move(delta));
    trace.thetas.push_back(std::move(next));
    prev_grad = std::move(grad);
    if (s % 2 == 0) {
      trace.pair_first_step.push_back(s - 1);
      trace.inner_products.push_back(dot(trace.deltas[s - 2], trace.deltas[s - 1]));
    }
  }
  return trace;
}

double z_eigenvalue(double lambda, double alpha, double mu, double eta) noexcept {
  const double shifted = lambda + alpha;
  return (1.0 - mu * eta - eta * alpha - eta * lambda) * shifted * shifted;
}

bool LemmaBoundReport::all_satisfied() const {
  return std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.z_satisfied; });
}

LemmaBoundReport evaluate_lemma_bounds(const QuadraticSpec& spec, const QuadraticTrace& trace) {
  spec.validate();
  LemmaBoundReport report;
  const double lambda_1 = spec.eigenvalues.front();
  const double lambda_d = spec.eigenvalues.back();
  for (std::size_t k = 0; k < trace.inner_products.size(); ++k) {
    const std::size_t t = trace.pair_first_step[k];
    const double eta_t = spec.eta_at(t);
    const double eta_next = spec.eta_at(t + 1);
    const auto& start = trace.thetas[t - 1];
    const double scale = eta_t * eta_next * dot(start, start);

    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (double lambda : spec.eigenvalues) {
      const double g = z_eigenvalue(lambda, spec.alpha, spec.mu, eta_t);
      g_min = std::min(g_min, g);
      g_max = std::max(g_max, g);
    }
    LemmaPairBound b;
    b.t = t;
    b.observed = trace.inner_products[k];
    b.z_lower = scale * g_min;
    b.z_upper = scale * g_max;
    b.paper_lower = scale * z_eigenvalue(lambda_1, spec.alpha, spec.mu, eta_t);
    b.paper_upper = scale * z_eigenvalue(lambda_d, spec.alpha, spec.mu, eta_t);
    const double tol = 1e-9 * (1.0 + std::fabs(b.observed));
    b.z_satisfied = b.z_lower - tol <= b.observed && b.observed <= b.z_upper + tol;
    auto close = [](double x, double y) { return std::fabs(x - y) <= 1e-12 * (1.0 + std::fabs(y)); };
    b.paper_matches_z = close(b.paper_lower, b.z_lower) && close(b.paper_upper, b.z_upper);
    report.pairs.push_back(b);
  }
  return report;
}

LemmaBoundReport lemma_bounds(const QuadraticSpec& spec, const QuadraticTrace& trace) {
  auto report = evaluate_lemma_bounds(spec, trace);
  for (const auto& p : report.pairs) {
    if (!p.z_satisfied) {
      throw Error(ErrorCode::BoundViolation, "pair at t=" + std::to_string(p.t) + ": observed " +
                                                 std::to_string(p.observed) + " outside [" +
                                                 std::to_string(p.z_lower) + ", " + std::to_string(p.z_upper) + "]");
    }
  }
  return report;
}

std::vector<EosPoint> eos_angle_sweep(const QuadraticSpec& base, std::span<const double> eta_grid,
                                      std::size_t steps, unsigned threads) {
  if (eta_grid.empty()) throw Error(ErrorCode::InvalidSpec, "empty learning-rate grid");
  std::vector<double> grid(eta_grid.begin(), eta_grid.end());
  std::sort(grid.begin(), grid.end());
  std::vector<EosPoint> out(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t g) {
    out[g].eta = grid[g];
    auto spec = base;
    spec.eta = {grid[g]};
    try {
      const auto trace = simulate_quadratic(spec, steps);
      double sum = 0.0;
      std::size_t count = 0;
      // Angles between deltas[s-1] and deltas[s] for the second half of the run.
      for (std::size_t s = std::max<std::size_t>(1, steps / 2); s < steps; ++s) {
        const auto& a = trace.deltas[s - 1];
        const auto& b = trace.deltas[s];
        const double na = std::sqrt(dot(a, a));
        const double nb = std::sqrt(dot(b, b));
        if (!(na > 0.0) || !(nb > 0.0)) continue;
        const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
        sum += std::acos(c) * (180.0 / std::numbers::pi);
        ++count;
      }
      if (count == 0) {
        out[g].error = std::string(error_code_name(ErrorCode::DegenerateVector));
      } else {
        out[g].mean_angle_deg = sum / static_cast<double>(count);
      }
    } catch (const Error& e) {
      out[g].error = std::string(error_code_name(e.code()));
    }
  });
  return out;
}

void WidthSpec::validate() const {
  if (widths.empty()) throw Error(ErrorCode::InvalidSpec, "no widths");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 2) throw Error(ErrorCode::InvalidSpec, "widths must be >= 2");
    if (i > 0 && widths[i] <= widths[i - 1]) throw Error(ErrorCode::InvalidSpec, "widths must increase strictly");
  }
  if (steps < 1) throw Error(ErrorCode::InvalidSpec, "steps must be >= 1");
  if (!(init_std_scale > 0.0)) throw Error(ErrorCode::InvalidSpec, "init_std_scale must be > 0");
}

AlignmentCurve width_alignment(const WidthSpec& spec) {
  spec.validate();
  AlignmentCurve curve;
  for (std::size_t width : spec.widths) {
    const auto n = width;
    const double eta = spec.eta_scale / static_cast<double>(n);
    const double init_std = spec.init_std_scale / std::sqrt(static_cast<double>(n));

    // Update vectors first from their own stream so W0 can be streamed row by row.
    Xoshiro256ss update_rng(mix_seed(spec.seed, 2 * n + 1));
    std::vector<DenseVector> xs(spec.steps, DenseVector(n));
    std::vector<DenseVector> dhs(spec.steps, DenseVector(n));
    for (std::size_t s = 0; s < spec.steps; ++s) {
      for (auto& v : xs[s]) v = update_rng.gaussian();
      for (auto& v : dhs[s]) v = update_rng.rademacher();
    }

    Xoshiro256ss init_rng(mix_seed(spec.seed, 2 * n));
    PairwiseAccumulator cross;
    PairwiseAccumulator init_sq;
    PairwiseAccumulator final_sq;
    DenseVector w0(n);
    DenseVector wt(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        w0[j] = init_std * init_rng.gaussian();
        double w = w0[j];
        for (std::size_t s = 0; s < spec.steps; ++s) w -= eta * dhs[s][i] * xs[s][j];
        wt[j] = w;
      }
      cross.push(dot(w0, wt));
      init_sq.push(dot(w0, w0));
      final_sq.push(dot(wt, wt));
    }
    const double a2 = init_sq.result();
    const double b2 = final_sq.result();
    if (!(a2 > 0.0) || !(b2 > 0.0)) {
      throw Error(ErrorCode::DegenerateVector, "zero weight matrix at width " + std::to_string(n));
    }
    const double c = std::clamp(cross.result() / std::sqrt(a2 * b2), -1.0, 1.0);
    curve.points.push_back({n, c, 1.0 - c});
  }

  std::vector<double> lx;
  std::vector<double> ly;
  bool fit_ok = curve.points.size() >= 2;
  for (const auto& p : curve.points) {
    if (!(p.one_minus_cos > 0.0)) fit_ok = false;
    lx.push_back(std::log(static_cast<double>(p.width)));
    ly.push_back(std::log(p.one_minus_cos));
  }
  curve.fitted_loglog_slope = fit_ok ? least_squares_slope(lx, ly) : std::numeric_limits<double>::quiet_NaN();
  return curve;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace trajmap
