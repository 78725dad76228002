#include "trajmap/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "trajmap/error.hpp"
#include "trajmap/trajgen.hpp"

namespace trajmap {
namespace {

using ojson = nlohmann::ordered_json;

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> with_default_labels(const std::vector<std::string>& labels, std::size_t n) {
  if (labels.size() == n) return labels;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

double json_number_or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

QuadraticSpec quadratic_from_json(const nlohmann::json& j, const QuadraticSpec& defaults) {
  QuadraticSpec s = defaults;
  if (j.contains("eigenvalues")) s.eigenvalues = j["eigenvalues"].get<std::vector<double>>();
  s.rotation_seed = j.value("rotation_seed", s.rotation_seed);
  s.alpha = j.value("alpha", s.alpha);
  s.mu = j.value("mu", s.mu);
  if (j.contains("eta")) {
    s.eta = j["eta"].is_array() ? j["eta"].get<std::vector<double>>() : std::vector<double>{j["eta"].get<double>()};
  }
  if (j.contains("theta_init")) s.theta_init = j["theta_init"].get<std::vector<double>>();
  return s;
}

ojson quadratic_to_json(const QuadraticSpec& s) {
  ojson j;
  j["eigenvalues"] = s.eigenvalues;
  j["rotation_seed"] = s.rotation_seed;
  j["alpha"] = s.alpha;
  j["mu"] = s.mu;
  j["eta"] = s.eta;
  j["theta_init"] = s.theta_init;
  return j;
}

nlohmann::json parse_spec_json(std::string_view text) {
  if (text.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
}

}  // namespace

void HeatmapStyle::validate() const {
  if (!(v_min < v_max)) throw Error(ErrorCode::InvalidStyle, "v_min must be below v_max");
  if (cell_px < 1) throw Error(ErrorCode::InvalidStyle, "cell_px must be >= 1");
}

Rgb colormap(const HeatmapStyle& style, double value) {
  if (std::isnan(value)) return Rgb{128, 128, 128};
  const double frac = std::clamp((value - style.v_min) / (style.v_max - style.v_min), 0.0, 1.0);
  const double scaled = frac * 4.0;
  const std::size_t seg = std::min<std::size_t>(3, static_cast<std::size_t>(scaled));
  const double t = scaled - static_cast<double>(seg);
  const Rgb a = style.stops[seg];
  const Rgb b = style.stops[seg + 1];
  auto lerp = [t](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(x) + t * (static_cast<double>(y) - x)));
  };
  return {lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b)};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string matrix_csv(const SymMatrix& m, const std::vector<std::string>& labels) {
  const auto names = with_default_labels(labels, m.n());
  std::string out = "label";
  for (const auto& l : names) out += "," + csv_field(l);
  out += '\n';
  for (std::size_t i = 0; i < m.n(); ++i) {
    out += csv_field(names[i]);
    for (std::size_t j = 0; j < m.n(); ++j) out += "," + format_double(m(i, j));
    out += '\n';
  }
  return out;
}

SymMatrix parse_matrix_csv(std::string_view text, std::vector<std::string>* labels) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorCode::InvalidSpec, "empty matrix CSV");
  const auto header = split_csv_line(lines[0]);
  const std::size_t n = header.size() - 1;
  if (lines.size() != n + 1) throw Error(ErrorCode::InvalidSpec, "matrix CSV is not square");
  SymMatrix m(n);
  if (labels) labels->assign(header.begin() + 1, header.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split_csv_line(lines[i + 1]);
    if (fields.size() != n + 1) throw Error(ErrorCode::InvalidSpec, "row " + std::to_string(i) + " has wrong width");
    for (std::size_t j = 0; j < n; ++j) m(i, j) = std::strtod(fields[j + 1].c_str(), nullptr);
  }
  return m;
}

std::string render_heatmap_svg(const SymMatrix& m, const std::vector<std::string>& labels,
                               const HeatmapStyle& style) {
  style.validate();
  const auto names = with_default_labels(labels, m.n());
  const std::size_t n = m.n();
  const std::size_t cell = style.cell_px;
  const std::size_t margin = 64;
  const std::size_t side = n * cell;
  const std::size_t label_step = std::max<std::size_t>(1, (n + 19) / 20);

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side + margin + 8 << "\" height=\""
     << side + margin + 8 << "\" shape-rendering=\"crispEdges\">\n";
  os << "<g transform=\"translate(" << margin << ",8)\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rgb c = colormap(style, m(i, j));
      os << "<rect class=\"cell\" x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"rgb(" << int(c.r) << ',' << int(c.g) << ',' << int(c.b)
         << ")\"/>\n";
    }
  }
  os << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"black\">\n";
  for (std::size_t i = 0; i < n; i += label_step) {
    const std::size_t centre = i * cell + cell / 2;
    os << "<text class=\"row-label\" x=\"" << margin - 4 << "\" y=\"" << centre + 8
       << "\" text-anchor=\"end\" dominant-baseline=\"middle\">" << xml_escape(names[i]) << "</text>\n";
    os << "<text class=\"col-label\" x=\"" << margin + centre << "\" y=\"" << side + 20
       << "\" text-anchor=\"middle\">" << xml_escape(names[i]) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string series_csv(const ScalarSeries& series) {
  std::string out = "t,value,units\n";
  const auto units = std::string(units_name(series.units));
  for (const auto& p : series.points) out += std::to_string(p.t) + "," + format_double(p.value) + "," + units + "\n";
  return out;
}

std::string eigenvalues_csv(const SpectralSummary& s) {
  std::string out = "eigenvalue\n";
  for (double v : s.eigenvalues) out += format_double(v) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

OriginSpec parse_origin(std::string_view text, const StoreOptions& store_options) {
  if (text == "absolute") return OriginSpec::absolute();
  if (text.starts_with("ckpt:")) {
    const std::string digits(text.substr(5));
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(ErrorCode::UsageError, "bad origin " + std::string(text));
    }
    return OriginSpec::checkpoint(std::stoull(digits));
  }
  if (text.starts_with("external:")) {
    auto point = std::make_shared<TrajectoryStore>(open_store(std::string(text.substr(9)), store_options));
    return OriginSpec::external_point(std::move(point));
  }
  throw Error(ErrorCode::UsageError, "origin must be absolute, ckpt:IDX or external:MANIFEST");
}

MapOutputs cmd_map(const MapOptions& options) {
  options.style.validate();
  const auto& c = options.common;
  const auto store = open_store(c.manifest, c.store_options());
  const auto origin = parse_origin(c.origin, c.store_options());
  const auto gram = compute_gram(store, origin, c.selection, c.kernel_options());
  const auto cosmap = compute_cosine_map(gram);
  MapOutputs out;
  out.csv = c.out / (options.name + ".csv");
  out.svg = c.out / (options.name + ".svg");
  write_text_file(out.csv, matrix_csv(cosmap.values, cosmap.point_labels));
  write_text_file(out.svg, render_heatmap_svg(cosmap.values, cosmap.point_labels, options.style));
  write_text_file(c.out / (options.name + "_gram.csv"), matrix_csv(gram.values, gram.point_labels));
  out.omega = mds(cosmap);
  return out;
}

std::string summary_json(const AnalysisSummary& s) {
  ojson j;
  j["manifest"] = s.manifest.string();
  j["n"] = s.n;
  j["p"] = s.p;
  j["omega"] = s.omega;
  j["omega0"] = s.omega0 ? ojson(*s.omega0) : ojson(nullptr);
  j["series"] = ojson::object();
  for (const auto& [k, v] : s.series_files) j["series"][k] = v.string();
  if (!s.degenerate_t.empty()) {
    j["degenerate_t"] = ojson::object();
    for (const auto& [k, v] : s.degenerate_t) j["degenerate_t"][k] = v;
  }
  j["spectra"] = ojson::object();
  for (const auto& [k, v] : s.spectra_files) j["spectra"][k] = v.string();
  j["tool_version"] = s.tool_version;
  return j.dump(2) + "\n";
}

AnalysisSummary cmd_hallmarks(const HallmarksOptions& options) {
  if (options.measures.empty()) throw Error(ErrorCode::NoMeasuresRequested, "pass --measure NAME or --all");
  std::vector<AngularMeasure> angular;
  std::vector<NormMeasure> norms;
  for (const auto& name : options.measures) {
    if (auto a = parse_angular_measure(name)) {
      angular.push_back(*a);
    } else if (auto n = parse_norm_measure(name)) {
      norms.push_back(*n);
    } else {
      throw Error(ErrorCode::UsageError, "unknown measure " + name);
    }
  }
  const auto& c = options.common;
  const auto store = open_store(c.manifest, c.store_options());
  AnalysisSummary summary;
  summary.manifest = c.manifest;
  summary.n = store.n_points();
  summary.p = store.resolve(c.selection).dim;
  summary.omega = mds(trajectory_map(store, c.selection, c.kernel_options())).omega;
  if (store.n_points() >= 2) summary.omega0 = mds_relative(store, 0, c.selection, c.kernel_options()).omega;

  const SeriesOptions series_options{options.k, false};
  auto emit = [&](const ScalarSeries& s) {
    const auto path = c.out / (s.measure_id + ".csv");
    write_text_file(path, series_csv(s));
    summary.series_files[s.measure_id] = path;
    if (!s.degenerate_t.empty()) summary.degenerate_t[s.measure_id] = s.degenerate_t;
  };
  for (auto m : angular) emit(angular_series(store, m, c.selection, series_options));
  for (auto m : norms) emit(norm_series(store, m, c.selection, series_options));
  write_text_file(c.out / "summary.json", summary_json(summary));
  return summary;
}

AnalysisSummary cmd_spectra(const CommonOptions& c) {
  const auto store = open_store(c.manifest, c.store_options());
  const auto spectra = trajectory_spectra(store, c.selection, c.kernel_options());
  AnalysisSummary summary;
  summary.manifest = c.manifest;
  summary.n = store.n_points();
  summary.p = store.resolve(c.selection).dim;
  summary.omega = mds(trajectory_map(store, c.selection, c.kernel_options())).omega;
  summary.omega0 = mds_relative(store, 0, c.selection, c.kernel_options()).omega;
  for (const auto& s : spectra) {
    const std::string name(spectrum_matrix_name(s.matrix_id));
    const auto path = c.out / (name + ".csv");
    write_text_file(path, eigenvalues_csv(s));
    summary.spectra_files[name] = path;
  }
  write_text_file(c.out / "spectra_summary.json", summary_json(summary));
  return summary;
}

QuadraticSpec lemma_fixture_spec() {
  QuadraticSpec s;
  s.eigenvalues = {2.0};
  s.alpha = 0.0;
  s.mu = 0.0;
  s.eta = {0.1};
  s.theta_init = {1.0};
  return s;
}

std::size_t lemma_fixture_steps() { return 2; }

QuadraticSpec eos_fixture_spec() {
  QuadraticSpec s;
  s.eigenvalues = {10.0, 1.0};
  s.alpha = 0.0;
  s.mu = 0.0;
  s.eta = {0.01};
  s.theta_init = {1.0, 1.0};
  return s;
}

std::vector<double> eos_fixture_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.01 + 0.02 * i);
  return grid;
}

std::size_t eos_fixture_steps() { return 100; }

WidthSpec width_fixture_spec() {
  WidthSpec w;
  w.widths = {64, 256, 1024, 4096};
  w.eta_scale = 1.0;
  w.steps = 1;
  w.seed = 20240229;
  w.init_std_scale = 1.0;
  return w;
}

std::string error_json(std::string_view code, std::string_view detail) {
  ojson j;
  j["error"] = code;
  j["detail"] = detail;
  return j.dump();
}

int cmd_theory(std::string_view subcommand, std::string_view spec_json, const std::filesystem::path& out,
               std::optional<std::uint64_t> seed) {
  const auto spec = parse_spec_json(spec_json);
  ojson report;
  int code = 0;
  try {
    if (subcommand == "lemma") {
      auto q = quadratic_from_json(spec, lemma_fixture_spec());
      if (seed) q.rotation_seed = *seed;
      const std::size_t steps = spec.value("steps", lemma_fixture_steps());
      report["spec"] = quadratic_to_json(q);
      report["steps"] = steps;
      const auto trace = simulate_quadratic(q, steps);
      const auto bounds = evaluate_lemma_bounds(q, trace);
      report["pairs"] = ojson::array();
      for (const auto& p : bounds.pairs) {
        report["pairs"].push_back({{"t", p.t},
                                   {"observed", p.observed},
                                   {"z_lower", p.z_lower},
                                   {"z_upper", p.z_upper},
                                   {"paper_lower", p.paper_lower},
                                   {"paper_upper", p.paper_upper},
                                   {"z_satisfied", p.z_satisfied},
                                   {"paper_matches_z", p.paper_matches_z}});
      }
      report["all_z_satisfied"] = bounds.all_satisfied();
      if (!bounds.all_satisfied()) code = exit_code_for(ErrorCode::BoundViolation);
    } else if (subcommand == "eos") {
      auto base = quadratic_from_json(spec.value("base", nlohmann::json::object()), eos_fixture_spec());
      if (seed) base.rotation_seed = *seed;
      const auto grid = spec.contains("eta_grid") ? spec["eta_grid"].get<std::vector<double>>() : eos_fixture_grid();
      const std::size_t steps = spec.value("steps", eos_fixture_steps());
      const auto sweep = eos_angle_sweep(base, grid, steps);
      report["base"] = quadratic_to_json(base);
      report["steps"] = steps;
      report["points"] = ojson::array();
      std::size_t crossings = 0;
      std::optional<double> prev;
      for (const auto& p : sweep) {
        ojson item{{"eta", p.eta}, {"mean_angle_deg", json_number_or_nan(p.mean_angle_deg)}};
        if (!p.error.empty()) item["error"] = p.error;
        report["points"].push_back(std::move(item));
        if (p.mean_angle_deg) {
          if (prev && ((*prev < 90.0) != (*p.mean_angle_deg < 90.0))) ++crossings;
          prev = p.mean_angle_deg;
        }
      }
      report["crossings_90"] = crossings;
    } else if (subcommand == "width") {
      WidthSpec w = width_fixture_spec();
      if (spec.contains("widths")) w.widths = spec["widths"].get<std::vector<std::size_t>>();
      w.eta_scale = spec.value("eta_scale", w.eta_scale);
      w.steps = spec.value("steps", w.steps);
      w.seed = spec.value("seed", w.seed);
      w.init_std_scale = spec.value("init_std_scale", w.init_std_scale);
      if (seed) w.seed = *seed;
      const auto curve = width_alignment(w);
      report["widths"] = w.widths;
      report["eta_scale"] = w.eta_scale;
      report["steps"] = w.steps;
      report["seed"] = w.seed;
      report["init_std_scale"] = w.init_std_scale;
      report["points"] = ojson::array();
      bool decreasing = true;
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const auto& p = curve.points[i];
        report["points"].push_back({{"width", p.width}, {"cos", p.cos_sim}, {"one_minus_cos", p.one_minus_cos}});
        if (i > 0 && !(p.one_minus_cos < curve.points[i - 1].one_minus_cos)) decreasing = false;
        if (!(p.cos_sim >= -1.0 && p.cos_sim <= 1.0)) code = exit_code_for(ErrorCode::BoundViolation);
      }
      report["fitted_loglog_slope"] = curve.fitted_loglog_slope;
      report["one_minus_cos_strictly_decreasing"] = decreasing;
    } else {
      throw Error(ErrorCode::UsageError, "theory subcommand must be lemma, eos or width");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UsageError || e.code() == ErrorCode::InvalidSpec) throw;
    report["error"] = error_code_name(e.code());
    report["detail"] = e.detail();
    write_text_file(out / (std::string(subcommand) + ".json"), report.dump(2) + "\n");
    throw;
  }
  write_text_file(out / (std::string(subcommand) + ".json"), report.dump(2) + "\n");
  return code;
}

std::string cmd_train(std::string_view spec_json, const std::filesystem::path& out) {
  const auto j = parse_spec_json(spec_json);
  const TrainSpec base = train_spec_from_json(spec_json);
  ojson result;
  if (j.contains("grid")) {
    std::vector<GridVariant> variants;
    if (j["grid"].is_string()) {
      if (j["grid"].get<std::string>() != "ablation") throw Error(ErrorCode::InvalidSpec, "grid must be a list or \"ablation\"");
      variants = ablation_variants(base.mu, base.wd);
    } else {
      for (const auto& v : j["grid"]) {
        variants.push_back({v.value("name", std::string{}), v.value("mu", base.mu), v.value("wd", base.wd)});
      }
    }
    const auto results = hyperparameter_grid(base, variants, out);
    result["variants"] = ojson::array();
    for (const auto& r : results) {
      result["variants"].push_back({{"name", r.name},
                                    {"mu", r.mu},
                                    {"wd", r.wd},
                                    {"omega", r.omega.omega},
                                    {"n", r.omega.n},
                                    {"manifest", r.run.manifest_path.string()},
                                    {"final_loss", r.run.epochs.back().loss},
                                    {"final_accuracy", r.run.epochs.back().accuracy}});
    }
  } else {
    const auto run = train(base, out);
    result["manifest"] = run.manifest_path.string();
    result["final_loss"] = run.epochs.back().loss;
    result["final_accuracy"] = run.epochs.back().accuracy;
    result["wall_seconds"] = run.wall_seconds;
  }
  const auto text = result.dump(2) + "\n";
  write_text_file(out / "result.json", text);
  return text;
}

}  // namespace trajmap
