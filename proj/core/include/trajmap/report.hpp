#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajmap/ckptstore.hpp"
#include "trajmap/hallmarks.hpp"
#include "trajmap/kernel.hpp"
#include "trajmap/spectral.hpp"
#include "trajmap/theory.hpp"

namespace trajmap {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct HeatmapStyle {
  // Colours at value fractions 0, .25, .5, .75, 1 of [v_min, v_max].
  std::array<Rgb, 5> stops = {Rgb{255, 255, 255}, Rgb{199, 199, 229}, Rgb{140, 140, 203}, Rgb{81, 81, 177},
                              Rgb{23, 23, 151}};
  double v_min = -1.0;
  double v_max = 1.0;
  std::size_t cell_px = 8;

  void validate() const;  // throws InvalidStyle
};

Rgb colormap(const HeatmapStyle& style, double value);

/// %.17g, which round-trips every finite double.
std::string format_double(double v);

std::string matrix_csv(const SymMatrix& m, const std::vector<std::string>& labels);
SymMatrix parse_matrix_csv(std::string_view text, std::vector<std::string>* labels = nullptr);
std::string render_heatmap_svg(const SymMatrix& m, const std::vector<std::string>& labels, const HeatmapStyle& style);
std::string series_csv(const ScalarSeries& series);
std::string eigenvalues_csv(const SpectralSummary& s);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// "absolute", "ckpt:IDX" or "external:MANIFEST".
OriginSpec parse_origin(std::string_view text, const StoreOptions& store_options = {});

struct CommonOptions {
  std::filesystem::path manifest;
  std::string origin = "absolute";
  SelectionSpec selection;
  std::filesystem::path out = ".";
  unsigned threads = 1;
  std::uint64_t mem_budget = std::uint64_t{2} << 30;

  StoreOptions store_options() const { return {mem_budget}; }
  KernelOptions kernel_options() const { return {threads, 64}; }
};

struct MapOptions {
  CommonOptions common;
  HeatmapStyle style;
  std::string name = "trajectory_map";
};

struct MapOutputs {
  std::filesystem::path csv;
  std::filesystem::path svg;
  MdsResult omega;
};

MapOutputs cmd_map(const MapOptions& options);

struct HallmarksOptions {
  CommonOptions common;
  std::vector<std::string> measures;  // angular and norm measure names
  std::size_t k = 1;
};

struct AnalysisSummary {
  std::filesystem::path manifest;
  std::size_t n = 0;
  std::size_t p = 0;
  double omega = 0.0;
  std::optional<double> omega0;
  std::map<std::string, std::filesystem::path> series_files;
  std::map<std::string, std::vector<std::size_t>> degenerate_t;  // series id -> positions with a zero-length argument
  std::map<std::string, std::filesystem::path> spectra_files;
  std::string tool_version{kToolVersion};
};

std::string summary_json(const AnalysisSummary& s);

/// Writes one CSV per measure plus summary.json. Throws NoMeasuresRequested on an empty list.
AnalysisSummary cmd_hallmarks(const HallmarksOptions& options);

/// Writes K.csv, K0.csv, C.csv, C0.csv.
AnalysisSummary cmd_spectra(const CommonOptions& options);

/// Default problem instances for the theory commands.
QuadraticSpec lemma_fixture_spec();
std::size_t lemma_fixture_steps();
QuadraticSpec eos_fixture_spec();
std::vector<double> eos_fixture_grid();
std::size_t eos_fixture_steps();
WidthSpec width_fixture_spec();

/// Runs a theory check. `spec_json` may be empty for the fixture. Writes <out>/<subcommand>.json.
/// Returns the process exit code (0 only if every asserted invariant held).
int cmd_theory(std::string_view subcommand, std::string_view spec_json, const std::filesystem::path& out,
               std::optional<std::uint64_t> seed = std::nullopt);

/// Runs train or a grid per the spec file; returns the JSON written to <out>/result.json.
std::string cmd_train(std::string_view spec_json, const std::filesystem::path& out);

/// {"error": code, "detail": str} on one line.
std::string error_json(std::string_view code, std::string_view detail);

}  // namespace trajmap
