#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "trajmap/ckptstore.hpp"
#include "trajmap/kernel.hpp"

namespace trajmap {

enum class SpectrumMatrix { K, K0, C, C0 };
std::string_view spectrum_matrix_name(SpectrumMatrix m) noexcept;

struct SpectralSummary {
  SpectrumMatrix matrix_id = SpectrumMatrix::K;
  std::vector<double> eigenvalues;  // descending
  std::size_t n = 0;
  std::size_t sweeps = 0;
};

struct JacobiOptions {
  double relative_tolerance = 1e-12;  // on off-diagonal Frobenius norm vs ||m||_F
  std::size_t max_sweeps = 100;
  double symmetry_tolerance = 1e-10;
};

/// Cyclic Jacobi eigenvalues of a dense symmetric matrix. Throws NotSymmetric or NoConvergence.
SpectralSummary symmetric_eigenvalues(const SymMatrix& m, const JacobiOptions& options = {});

/// Gram eigenvalues in (-clamp * lambda_max, 0) become 0; anything lower is NegativeGramEigenvalue.
inline constexpr double kGramClampRelative = 1e-8;
void clamp_gram_spectrum(SpectralSummary& summary);

/// Spectra of K, K0, C and C0 (origin 0 with its row omitted), in that order.
std::array<SpectralSummary, 4> trajectory_spectra(const TrajectoryStore& store, const SelectionSpec& sel,
                                                  const KernelOptions& options = {});

double frobenius_norm(const SymMatrix& m);
double trace(const SymMatrix& m);

}  // namespace trajmap
