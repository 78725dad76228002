#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trajmap {

using DenseVector = std::vector<double>;

/// Row-major d x d matrix.
struct DenseMatrix {
  std::size_t d = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * d + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * d + j]; }
  DenseVector apply(std::span<const double> v) const;
};

/// Regularized quadratic 0.5 th'M th + 0.5 alpha |th|^2 with M = Q diag(eigenvalues) Q'.
struct QuadraticSpec {
  std::vector<double> eigenvalues;  // descending
  std::uint64_t rotation_seed = 0;  // 0: identity basis
  double alpha = 0.0;
  double mu = 0.0;
  std::vector<double> eta;  // per step; the last entry repeats past its end
  DenseVector theta_init;

  std::size_t dim() const noexcept { return eigenvalues.size(); }
  double eta_at(std::size_t step) const;  // step is 1-based
  void validate() const;
};

/// Orthogonal basis from modified Gram-Schmidt on a seeded Gaussian matrix (columns are basis vectors).
DenseMatrix rotation_basis(std::size_t d, std::uint64_t seed);
DenseMatrix build_hessian(const QuadraticSpec& spec);  // M, without alpha

struct QuadraticTrace {
  std::vector<DenseVector> thetas;  // theta_0 .. theta_S
  std::vector<DenseVector> deltas;  // deltas[s-1] = theta_s - theta_{s-1}
  std::vector<std::size_t> pair_first_step;  // t of each momentum pair (t, t+1), 1-based
  std::vector<double> inner_products;        // <Delta_t, Delta_{t+1}> per pair
};

/// Gradient descent with one-step momentum, reset every two steps. Throws NonFiniteIterate.
QuadraticTrace simulate_quadratic(const QuadraticSpec& spec, std::size_t steps);

struct LemmaPairBound {
  std::size_t t = 0;
  double observed = 0.0;
  double z_lower = 0.0;
  double z_upper = 0.0;
  double paper_lower = 0.0;  // closed form at lambda_1
  double paper_upper = 0.0;  // closed form at lambda_d
  bool z_satisfied = false;
  bool paper_matches_z = false;
};

struct LemmaBoundReport {
  std::vector<LemmaPairBound> pairs;
  bool all_satisfied() const;
};

/// (1 - mu eta - eta alpha - eta lambda)(lambda + alpha)^2
double z_eigenvalue(double lambda, double alpha, double mu, double eta) noexcept;

/// Computes every bound without throwing.
LemmaBoundReport evaluate_lemma_bounds(const QuadraticSpec& spec, const QuadraticTrace& trace);
/// As evaluate_lemma_bounds, but throws BoundViolation if any observed value leaves the Z bounds.
LemmaBoundReport lemma_bounds(const QuadraticSpec& spec, const QuadraticTrace& trace);

struct EosPoint {
  double eta = 0.0;
  std::optional<double> mean_angle_deg;
  std::string error;  // error code name when the run failed
};

/// Mean angle between consecutive updates over the last half of `steps`, per constant learning rate.
std::vector<EosPoint> eos_angle_sweep(const QuadraticSpec& base, std::span<const double> eta_grid,
                                      std::size_t steps, unsigned threads = 1);

struct WidthSpec {
  std::vector<std::size_t> widths;
  double eta_scale = 1.0;  // eta = eta_scale / width
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  double init_std_scale = 1.0;

  void validate() const;
};

struct AlignmentPoint {
  std::size_t width = 0;
  double cos_sim = 1.0;
  double one_minus_cos = 0.0;
};

struct AlignmentCurve {
  std::vector<AlignmentPoint> points;
  double fitted_loglog_slope = 0.0;  // NaN when some 1-cos is not positive
};

AlignmentCurve width_alignment(const WidthSpec& spec);

/// Least-squares slope of y on x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace trajmap
