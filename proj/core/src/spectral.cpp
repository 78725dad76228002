#include "trajmap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "trajmap/error.hpp"

namespace trajmap {

std::string_view spectrum_matrix_name(SpectrumMatrix m) noexcept {
  switch (m) {
    case SpectrumMatrix::K: return "K";
    case SpectrumMatrix::K0: return "K0";
    case SpectrumMatrix::C: return "C";
    case SpectrumMatrix::C0: return "C0";
  }
  return "?";
}

double frobenius_norm(const SymMatrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double trace(const SymMatrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) s += m(i, i);
  return s;
}

SpectralSummary symmetric_eigenvalues(const SymMatrix& m, const JacobiOptions& options) {
  const std::size_t n = m.n();
  if (n == 0) throw Error(ErrorCode::InvalidSpec, "empty matrix");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!(std::fabs(m(i, j) - m(j, i)) <= options.symmetry_tolerance)) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") differs from its transpose by " << std::fabs(m(i, j) - m(j, i));
        throw Error(ErrorCode::NotSymmetric, os.str());
      }
    }
  }

  // Work on the symmetrized copy.
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5 * (m(i, j) + m(j, i));
  }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += at(i, j) * at(i, j);
      }
    }
    return std::sqrt(s);
  };

  const double target = options.relative_tolerance * frobenius_norm(m);
  SpectralSummary out;
  out.n = n;
  std::size_t sweep = 0;
  while (off_norm() > target) {
    if (sweep == options.max_sweeps) {
      throw Error(ErrorCode::NoConvergence, "Jacobi did not converge in " + std::to_string(sweep) + " sweeps");
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that zeroes a(p,q); t is the smaller root of t^2 + 2 theta t - 1 = 0.
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
      }
    }
  }
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.eigenvalues[i] = at(i, i);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), std::greater<>());
  return out;
}

void clamp_gram_spectrum(SpectralSummary& summary) {
  if (summary.eigenvalues.empty()) return;
  const double lambda_max = summary.eigenvalues.front();
  const double floor = -kGramClampRelative * std::max(lambda_max, 0.0);
  for (double& v : summary.eigenvalues) {
    if (v >= 0.0) continue;
    if (v > floor) {
      v = 0.0;
    } else {
      std::ostringstream os;
      os.precision(17);
      os << spectrum_matrix_name(summary.matrix_id) << " eigenvalue " << v << " below " << floor;
      throw Error(ErrorCode::NegativeGramEigenvalue, os.str());
    }
  }
}

std::array<SpectralSummary, 4> trajectory_spectra(const TrajectoryStore& store, const SelectionSpec& sel,
                                                  const KernelOptions& options) {
  const auto k = compute_gram(store, OriginSpec::absolute(), sel, options);
  const auto k0 = compute_gram(store, OriginSpec::checkpoint(0), sel, options);
  const auto c = compute_cosine_map(k);
  const auto c0 = compute_cosine_map(k0);

  std::array<SpectralSummary, 4> out;
  out[0] = symmetric_eigenvalues(k.values);
  out[0].matrix_id = SpectrumMatrix::K;
  clamp_gram_spectrum(out[0]);
  out[1] = symmetric_eigenvalues(k0.values);
  out[1].matrix_id = SpectrumMatrix::K0;
  clamp_gram_spectrum(out[1]);
  out[2] = symmetric_eigenvalues(c.values);
  out[2].matrix_id = SpectrumMatrix::C;
  out[3] = symmetric_eigenvalues(c0.values);
  out[3].matrix_id = SpectrumMatrix::C0;
  return out;
}

}  // namespace trajmap
