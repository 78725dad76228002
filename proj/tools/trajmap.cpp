// trajmap: trajectory maps, hallmarks, spectra, theory checks and toy training from the command line.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajmap/error.hpp"
#include "trajmap/hallmarks.hpp"
#include "trajmap/report.hpp"

namespace {

using trajmap::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions& opts, std::vector<std::string>& select,
                std::vector<std::string>& exclude) {
  cmd->add_option("--manifest", opts.manifest, "Trajectory manifest JSON")->required();
  cmd->add_option("--origin", opts.origin, "absolute | ckpt:IDX | external:MANIFEST");
  cmd->add_option("--select", select, "Include tensors matching GLOB (repeatable)");
  cmd->add_option("--exclude", exclude, "Exclude tensors matching GLOB (repeatable)");
  cmd->add_option("--out", opts.out, "Output directory");
  cmd->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--mem-budget", opts.mem_budget, "Bytes of checkpoint data to cache before streaming from disk");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimization trajectory analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(trajmap::kToolVersion));

  std::vector<std::string> select;
  std::vector<std::string> exclude;

  trajmap::MapOptions map_opts;
  auto* map_cmd = app.add_subcommand("map", "Cosine trajectory map as CSV and SVG heatmap");
  add_common(map_cmd, map_opts.common, select, exclude);
  map_cmd->add_option("--vmin", map_opts.style.v_min, "Colour scale minimum");
  map_cmd->add_option("--vmax", map_opts.style.v_max, "Colour scale maximum");
  map_cmd->add_option("--cell-px", map_opts.style.cell_px, "Pixels per matrix cell");
  map_cmd->add_option("--name", map_opts.name, "Output file stem");

  trajmap::HallmarksOptions hall_opts;
  bool all_measures = false;
  auto* hall_cmd = app.add_subcommand("hallmarks", "Angular and norm series plus MDS summary");
  add_common(hall_cmd, hall_opts.common, select, exclude);
  hall_cmd->add_option("--measure", hall_opts.measures, "Measure name (repeatable)");
  hall_cmd->add_flag("--all", all_measures, "All angular and norm measures");
  hall_cmd->add_option("--k", hall_opts.k, "Lag for lagged_updates and update_norm")->check(CLI::PositiveNumber);

  CommonOptions spectra_opts;
  auto* spectra_cmd = app.add_subcommand("spectra", "Eigenvalues of K, K0, C, C0");
  add_common(spectra_cmd, spectra_opts, select, exclude);

  std::string theory_which;
  std::string theory_spec;
  std::filesystem::path theory_out = ".";
  std::uint64_t theory_seed = 0;
  auto* theory_cmd = app.add_subcommand("theory", "Numerical checks of the momentum bound, EoS angles, width alignment");
  theory_cmd->add_option("which", theory_which, "lemma | eos | width")
      ->required()
      ->check(CLI::IsMember({"lemma", "eos", "width"}));
  theory_cmd->add_option("--spec", theory_spec, "JSON parameter file (defaults to the built-in fixture)");
  theory_cmd->add_option("--out", theory_out, "Output directory");
  auto* seed_opt = theory_cmd->add_option("--seed", theory_seed, "Override the RNG / rotation seed");

  std::string train_spec;
  std::filesystem::path train_out = ".";
  auto* train_cmd = app.add_subcommand("train", "Train the toy MLP (or a grid) and write checkpoint stores");
  train_cmd->add_option("--spec", train_spec, "Training spec JSON file")->required();
  train_cmd->add_option("--out", train_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << trajmap::error_json("UsageError", e.what()) << '\n';
    return 1;
  }

  auto apply_selection = [&](CommonOptions& c) {
    c.selection.include_globs = select;
    c.selection.exclude_globs = exclude;
  };

  try {
    if (*map_cmd) {
      apply_selection(map_opts.common);
      const auto out = trajmap::cmd_map(map_opts);
      std::cout << out.csv.string() << '\n' << out.svg.string() << '\n';
      std::cout << "omega " << trajmap::format_double(out.omega.omega) << '\n';
    } else if (*hall_cmd) {
      apply_selection(hall_opts.common);
      if (all_measures) {
        for (auto m : trajmap::kAllAngularMeasures) hall_opts.measures.emplace_back(trajmap::measure_name(m));
        for (auto m : trajmap::kAllNormMeasures) hall_opts.measures.emplace_back(trajmap::measure_name(m));
      }
      const auto s = trajmap::cmd_hallmarks(hall_opts);
      std::cout << trajmap::summary_json(s);
    } else if (*spectra_cmd) {
      apply_selection(spectra_opts);
      const auto s = trajmap::cmd_spectra(spectra_opts);
      std::cout << trajmap::summary_json(s);
    } else if (*theory_cmd) {
      const std::string json = theory_spec.empty() ? std::string{} : trajmap::read_text_file(theory_spec);
      const auto seed = seed_opt->count() ? std::optional<std::uint64_t>(theory_seed) : std::nullopt;
      const int code = trajmap::cmd_theory(theory_which, json, theory_out, seed);
      std::cout << (theory_out / (theory_which + ".json")).string() << '\n';
      if (code != 0) {
        std::cerr << trajmap::error_json("BoundViolation", "an asserted invariant did not hold") << '\n';
      }
      return code;
    } else if (*train_cmd) {
      std::cout << trajmap::cmd_train(trajmap::read_text_file(train_spec), train_out);
    }
  } catch (const trajmap::Error& e) {
    std::cerr << trajmap::error_json(trajmap::error_code_name(e.code()), e.detail()) << '\n';
    return trajmap::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << trajmap::error_json("InternalError", e.what()) << '\n';
    return 2;
  }
  return 0;
}
