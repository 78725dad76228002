#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "trajmap/error.hpp"
#include "trajmap/spectral.hpp"

using namespace trajmap;
using trajmap::testing::random_points;
using trajmap::testing::store_from_points;

namespace {

SymMatrix from_rows(const oracle::Mat& rows) {
  SymMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

oracle::Mat to_rows(const SymMatrix& m) {
  oracle::Mat rows(m.n(), oracle::Vec(m.n()));
  for (std::size_t i = 0; i < m.n(); ++i) {
    for (std::size_t j = 0; j < m.n(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

SymMatrix random_symmetric(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 2.0);
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) m.set_sym(i, j, normal(rng));
  }
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("identity and the classic 2x2") {
  SymMatrix id(4);
  for (std::size_t i = 0; i < 4; ++i) id(i, i) = 1.0;
  CHECK(symmetric_eigenvalues(id).eigenvalues == std::vector<double>{1, 1, 1, 1});
  const auto two = symmetric_eigenvalues(from_rows({{2, 1}, {1, 2}})).eigenvalues;
  CHECK(two[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("power iteration oracle agrees with a hand-solvable matrix") {
  const auto ev = oracle::power_eigenvalues({{2, 1, 0}, {1, 2, 0}, {0, 0, -4}});
  CHECK(ev[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev[2] == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("random symmetric matrices match the power-iteration oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    const auto m = random_symmetric(rng, n);
    const auto s = symmetric_eigenvalues(m);
    const auto ref = oracle::power_eigenvalues(to_rows(m));
    REQUIRE(s.eigenvalues.size() == n);
    CHECK(s.n == n);
    CHECK(std::is_sorted(s.eigenvalues.rbegin(), s.eigenvalues.rend()));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(s.eigenvalues[i] - ref[i]) <= 1e-9);
    const double sum = std::accumulate(s.eigenvalues.begin(), s.eigenvalues.end(), 0.0);
    const double fro = frobenius_norm(m);
    CHECK(std::abs(sum - trace(m)) <= 1e-9 * fro);
    double sq = 0.0;
    for (double e : s.eigenvalues) sq += e * e;
    CHECK(std::abs(std::sqrt(sq) - fro) <= 1e-9 * fro);
  }
}

TEST_CASE("asymmetric input is rejected; tiny asymmetry is tolerated") {
  CHECK(code_of([] { symmetric_eigenvalues(from_rows({{1, 2}, {2.1, 1}})); }) == ErrorCode::NotSymmetric);
  CHECK_NOTHROW(symmetric_eigenvalues(from_rows({{1, 2}, {2 + 1e-12, 1}})));
}

TEST_CASE("sweep cap yields NoConvergence") {
  std::mt19937_64 rng(1);
  JacobiOptions opts;
  opts.max_sweeps = 1;
  CHECK(code_of([&] { symmetric_eigenvalues(random_symmetric(rng, 10), opts); }) == ErrorCode::NoConvergence);
}

TEST_CASE("gram clamp zeroes tiny negatives and rejects large ones") {
  SpectralSummary s;
  s.eigenvalues = {10.0, -1e-9, -5e-8};
  clamp_gram_spectrum(s);
  CHECK(s.eigenvalues == std::vector<double>{10.0, 0.0, 0.0});
  SpectralSummary bad;
  bad.eigenvalues = {10.0, -1e-6};
  CHECK(code_of([&] { clamp_gram_spectrum(bad); }) == ErrorCode::NegativeGramEigenvalue);
}

TEST_CASE("trajectory spectra of an orthonormal pair and a linear path") {
  const auto pair = trajectory_spectra(store_from_points({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}), SelectionSpec::all());
  CHECK(pair[0].matrix_id == SpectrumMatrix::K);
  CHECK(pair[3].matrix_id == SpectrumMatrix::C0);
  CHECK(pair[0].eigenvalues == std::vector<double>{1, 1, 1});
  CHECK(pair[2].eigenvalues == std::vector<double>{1, 1, 1});

  const auto ortho = trajectory_spectra(store_from_points({{1, 0}, {0, 1}}), SelectionSpec::all());
  CHECK(ortho[0].eigenvalues == std::vector<double>{1, 1});
  CHECK(ortho[2].eigenvalues == std::vector<double>{1, 1});

  std::vector<std::vector<double>> line;
  for (int t = 1; t <= 5; ++t) line.push_back({2.0 * t, -1.0 * t});
  const auto lin = trajectory_spectra(store_from_points(line), SelectionSpec::all());
  REQUIRE(lin[2].eigenvalues.size() == 5);
  CHECK(lin[2].eigenvalues[0] == doctest::Approx(5.0).epsilon(1e-12));
  for (std::size_t i = 1; i < 5; ++i) CHECK(std::abs(lin[2].eigenvalues[i]) <= 1e-12);
  CHECK(lin[1].n == 4);
}

TEST_CASE("trajectory spectra match the oracle on kernel matrices and obey invariants") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 9;
    const std::size_t p = 1 + rng() % 40;
    const auto store = store_from_points(random_points(rng, n, p, 0.4));
    const auto spectra = trajectory_spectra(store, SelectionSpec::all());
    const auto k = compute_gram(store, OriginSpec::absolute(), SelectionSpec::all()).values;
    const auto c = trajectory_map(store, SelectionSpec::all()).values;
    const auto c0 = relative_trajectory_map(store, 0, SelectionSpec::all()).values;
    const double kscale = frobenius_norm(k);
    const auto kref = oracle::power_eigenvalues(to_rows(k));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(spectra[0].eigenvalues[i] - kref[i]) <= 1e-9 * kscale);
    const auto cref = oracle::power_eigenvalues(to_rows(c));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(spectra[2].eigenvalues[i] - cref[i]) <= 1e-9);
    for (std::size_t which : {2u, 3u}) {
      const auto& ev = spectra[which].eigenvalues;
      const double sum = std::accumulate(ev.begin(), ev.end(), 0.0);
      CHECK(std::abs(sum - static_cast<double>(ev.size())) <= 1e-8 * static_cast<double>(ev.size()));
    }
    CHECK(spectra[3].n == c0.n());
    for (std::size_t which : {0u, 1u}) {
      const auto& ev = spectra[which].eigenvalues;
      std::size_t rank = 0;
      for (double e : ev) {
        CHECK(e >= 0.0);
        if (e > 1e-10 * ev.front()) ++rank;
      }
      CHECK(rank <= std::min(ev.size(), p));
    }
  }
}

TEST_CASE("spectra need two points") {
  CHECK(code_of([] { trajectory_spectra(store_from_points({{1, 2}}), SelectionSpec::all()); }) ==
        ErrorCode::EmptyTrajectory);
}
