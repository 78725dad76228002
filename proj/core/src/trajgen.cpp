#include "trajmap/trajgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "trajmap/error.hpp"
#include "trajmap/kernel.hpp"
#include "trajmap/rng.hpp"

namespace trajmap {
namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1000;

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in
  std::vector<double> b;
};

using Params = std::vector<Layer>;

Params params_from_checkpoint(const TrainSpec& spec, const Checkpoint& c) {
  Params p;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    Layer layer;
    layer.in = spec.layer_sizes[l];
    layer.out = spec.layer_sizes[l + 1];
    layer.w = std::get<std::vector<double>>(c.tensors[2 * l].data);
    layer.b = std::get<std::vector<double>>(c.tensors[2 * l + 1].data);
    p.push_back(std::move(layer));
  }
  return p;
}

Checkpoint params_to_checkpoint(const Params& p, std::int64_t index, std::string label) {
  Checkpoint c;
  c.index = index;
  c.label = std::move(label);
  for (std::size_t l = 0; l < p.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    c.tensors.push_back(TensorRecord::f64(prefix + "weight", {p[l].out, p[l].in}, p[l].w));
    c.tensors.push_back(TensorRecord::f64(prefix + "bias", {p[l].out}, p[l].b));
  }
  return c;
}

struct BatchResult {
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

// Forward (and optionally backward) pass over the given samples. Gradients are for the batch-mean loss.
BatchResult run_batch(const TrainSpec& spec, const Params& params, const Dataset& data,
                      std::span<const std::size_t> batch, Params* grads) {
  const std::size_t depth = params.size();
  const std::size_t bsz = batch.size();
  // acts[l] holds inputs to layer l; pre[l] holds pre-activations of layer l.
  std::vector<std::vector<double>> acts(depth + 1);
  std::vector<std::vector<double>> pre(depth);
  acts[0].resize(bsz * data.dim);
  for (std::size_t r = 0; r < bsz; ++r) {
    std::copy_n(data.x.begin() + static_cast<std::ptrdiff_t>(batch[r] * data.dim), data.dim,
                acts[0].begin() + static_cast<std::ptrdiff_t>(r * data.dim));
  }
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& L = params[l];
    pre[l].assign(bsz * L.out, 0.0);
    for (std::size_t r = 0; r < bsz; ++r) {
      const double* a = &acts[l][r * L.in];
      for (std::size_t o = 0; o < L.out; ++o) {
        double s = L.b[o];
        const double* w = &L.w[o * L.in];
        for (std::size_t i = 0; i < L.in; ++i) s += w[i] * a[i];
        pre[l][r * L.out + o] = s;
      }
    }
    acts[l + 1] = pre[l];
    if (l + 1 < depth) {
      for (auto& v : acts[l + 1]) v = std::max(v, 0.0);
    }
  }

  const std::size_t classes = params.back().out;
  BatchResult result;
  std::vector<double> dz(bsz * classes);
  for (std::size_t r = 0; r < bsz; ++r) {
    const double* z = &acts[depth][r * classes];
    const std::size_t label = data.labels[batch[r]];
    const std::size_t argmax = static_cast<std::size_t>(std::max_element(z, z + classes) - z);
    if (argmax == label) ++result.correct;
    if (spec.loss == LossKind::CrossEntropy) {
      const double zmax = z[argmax];
      double denom = 0.0;
      for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
      result.loss_sum += std::log(denom) - (z[label] - zmax);
      for (std::size_t c = 0; c < classes; ++c) {
        const double prob = std::exp(z[c] - zmax) / denom;
        dz[r * classes + c] = (prob - (c == label ? 1.0 : 0.0)) / static_cast<double>(bsz);
      }
    } else {
      for (std::size_t c = 0; c < classes; ++c) {
        const double err = z[c] - (c == label ? 1.0 : 0.0);
        result.loss_sum += 0.5 * err * err;
        dz[r * classes + c] = err / static_cast<double>(bsz);
      }
    }
  }
  if (!grads) return result;

  grads->resize(depth);
  std::vector<double> delta = std::move(dz);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& L = params[l];
    auto& G = (*grads)[l];
    G.in = L.in;
    G.out = L.out;
    G.w.assign(L.w.size(), 0.0);
    G.b.assign(L.b.size(), 0.0);
    for (std::size_t r = 0; r < bsz; ++r) {
      const double* a = &acts[l][r * L.in];
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[r * L.out + o];
        if (d == 0.0) continue;
        G.b[o] += d;
        double* gw = &G.w[o * L.in];
        for (std::size_t i = 0; i < L.in; ++i) gw[i] += d * a[i];
      }
    }
    if (l == 0) break;
    std::vector<double> prev(bsz * L.in, 0.0);
    for (std::size_t r = 0; r < bsz; ++r) {
      for (std::size_t o = 0; o < L.out; ++o) {
        const double d = delta[r * L.out + o];
        if (d == 0.0) continue;
        const double* w = &L.w[o * L.in];
        for (std::size_t i = 0; i < L.in; ++i) prev[r * L.in + i] += d * w[i];
      }
      for (std::size_t i = 0; i < L.in; ++i) {
        if (!(pre[l - 1][r * L.in + i] > 0.0)) prev[r * L.in + i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return result;
}

EpochStats evaluate(const TrainSpec& spec, const Params& params, const Dataset& data, std::size_t epoch) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto r = run_batch(spec, params, data, all, nullptr);
  const auto n = static_cast<double>(data.size());
  EpochStats s{epoch, r.loss_sum / n, static_cast<double>(r.correct) / n};
  if (!std::isfinite(s.loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "loss is not finite after epoch " + std::to_string(epoch));
  }
  return s;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void TrainSpec::validate() const {
  if (layer_sizes.size() < 2) throw Error(ErrorCode::InvalidSpec, "layer_sizes needs at least two entries");
  if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw Error(ErrorCode::InvalidSpec, "layer sizes must be positive");
  }
  if (layer_sizes.front() != data.dim) throw Error(ErrorCode::InvalidSpec, "input layer must match data.dim");
  if (layer_sizes.back() < 2) throw Error(ErrorCode::InvalidSpec, "need at least two output classes");
  if (data.samples_per_class == 0) throw Error(ErrorCode::InvalidSpec, "empty dataset");
  for (std::size_t i = 1; i < eta_schedule.size(); ++i) {
    if (eta_schedule[i].first <= eta_schedule[i - 1].first) {
      throw Error(ErrorCode::InvalidSpec, "eta_schedule epochs must increase strictly");
    }
  }
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidSpec, "eta must be > 0");
  if (!(mu >= 0.0 && mu < 1.0)) throw Error(ErrorCode::InvalidSpec, "mu must be in [0, 1)");
  if (!(wd >= 0.0)) throw Error(ErrorCode::InvalidSpec, "weight decay must be >= 0");
  if (batch_size == 0 || ckpt_every == 0) throw Error(ErrorCode::InvalidSpec, "batch_size and ckpt_every >= 1");
}

double TrainSpec::learning_rate(std::size_t epoch) const {
  double mult = 1.0;
  for (const auto& [e, m] : eta_schedule) {
    if (epoch >= e) mult = m;
  }
  return eta * mult;
}

TrainSpec fixture_spec() { return TrainSpec{}; }

Dataset make_blobs(const BlobSpec& spec) {
  Dataset d;
  d.dim = spec.dim;
  const std::size_t n = 2 * spec.samples_per_class;
  d.x.resize(n * spec.dim);
  d.labels.resize(n);
  Xoshiro256ss rng(spec.seed);
  const double offset = 0.5 * spec.separation / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t label = s % 2;
    d.labels[s] = label;
    const double centre = label == 0 ? -offset : offset;
    for (std::size_t j = 0; j < spec.dim; ++j) d.x[s * spec.dim + j] = centre + spec.noise_std * rng.gaussian();
  }
  return d;
}

Checkpoint init_parameters(const TrainSpec& spec) {
  spec.validate();
  Xoshiro256ss rng(mix_seed(spec.seed, kInitStream));
  Params p;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    Layer layer;
    layer.in = spec.layer_sizes[l];
    layer.out = spec.layer_sizes[l + 1];
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.w.resize(layer.in * layer.out);
    for (auto& v : layer.w) v = std_dev * rng.gaussian();
    layer.b.assign(layer.out, 0.0);
    p.push_back(std::move(layer));
  }
  return params_to_checkpoint(p, 0, "epoch 0");
}

TrainRunRecord train(const TrainSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const Dataset data = make_blobs(spec.data);
  Params params = params_from_checkpoint(spec, init_parameters(spec));
  Params velocity = params;
  for (auto& L : velocity) {
    std::fill(L.w.begin(), L.w.end(), 0.0);
    std::fill(L.b.begin(), L.b.end(), 0.0);
  }

  TrainRunRecord record;
  std::vector<ManifestEntry> manifest;
  auto save = [&](std::size_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%05zu.bin", epoch);
    const std::string label = "epoch " + std::to_string(epoch);
    write_checkpoint(params_to_checkpoint(params, static_cast<std::int64_t>(epoch), label), out_dir / name);
    manifest.push_back({static_cast<std::int64_t>(epoch), label, name});
  };

  record.epochs.push_back(evaluate(spec, params, data, 0));
  save(0);

  std::vector<std::size_t> order(data.size());
  Params grads;
  for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
    const double lr = spec.learning_rate(epoch - 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256ss shuffle(mix_seed(spec.seed, kShuffleStream + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t len = std::min(spec.batch_size, order.size() - start);
      run_batch(spec, params, data, std::span<const std::size_t>(order).subspan(start, len), &grads);
      for (std::size_t l = 0; l < params.size(); ++l) {
        auto step = [&](std::vector<double>& theta, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = spec.mu * v[i] + (g[i] + spec.wd * theta[i]);
            theta[i] -= lr * v[i];
          }
        };
        step(params[l].w, velocity[l].w, grads[l].w);
        step(params[l].b, velocity[l].b, grads[l].b);
      }
    }
    record.epochs.push_back(evaluate(spec, params, data, epoch));
    if (epoch % spec.ckpt_every == 0) save(epoch);
  }

  record.manifest_path = out_dir / "manifest.json";
  write_manifest(record.manifest_path, manifest);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_run_record(record, out_dir / "run.json");
  return record;
}

std::string variant_label(double mu, double wd) { return "mu=" + format_number(mu) + ",wd=" + format_number(wd); }

std::vector<GridVariant> ablation_variants(double mu, double wd) {
  return {{variant_label(mu, wd), mu, wd},
          {variant_label(0.0, wd), 0.0, wd},
          {variant_label(mu, 0.0), mu, 0.0},
          {variant_label(0.0, 0.0), 0.0, 0.0}};
}

std::vector<GridResult> hyperparameter_grid(const TrainSpec& base, std::span<const GridVariant> variants,
                                            const std::filesystem::path& out_dir) {
  if (variants.empty()) throw Error(ErrorCode::InvalidSpec, "no grid variants");
  std::vector<GridResult> out;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i];
    TrainSpec spec = base;
    spec.mu = v.mu;
    spec.wd = v.wd;
    GridResult r;
    r.name = v.name.empty() ? variant_label(v.mu, v.wd) : v.name;
    r.mu = v.mu;
    r.wd = v.wd;
    std::string dir = std::to_string(i) + "_" + r.name;
    std::replace_if(dir.begin(), dir.end(), [](char c) { return c == ',' || c == '=' || c == ' ' || c == '/'; }, '_');
    r.run = train(spec, out_dir / dir);
    const auto store = open_store(r.run.manifest_path);
    r.omega = mds(trajectory_map(store, SelectionSpec::all()));
    out.push_back(std::move(r));
  }
  return out;
}

TrainSpec train_spec_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("train spec: ") + e.what());
  }
  if (j.contains("train")) j = j["train"];
  TrainSpec s = fixture_spec();
  try {
    if (j.contains("layer_sizes")) s.layer_sizes = j["layer_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("data")) {
      const auto& d = j["data"];
      s.data.samples_per_class = d.value("samples_per_class", s.data.samples_per_class);
      s.data.dim = d.value("dim", s.data.dim);
      s.data.separation = d.value("separation", s.data.separation);
      s.data.noise_std = d.value("noise_std", s.data.noise_std);
      s.data.seed = d.value("seed", s.data.seed);
    }
    s.eta = j.value("eta", s.eta);
    if (j.contains("eta_schedule")) {
      s.eta_schedule.clear();
      for (const auto& e : j["eta_schedule"]) s.eta_schedule.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<double>());
    }
    s.mu = j.value("mu", s.mu);
    s.wd = j.value("wd", s.wd);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.epochs = j.value("epochs", s.epochs);
    s.ckpt_every = j.value("ckpt_every", s.ckpt_every);
    s.seed = j.value("seed", s.seed);
    if (j.contains("loss")) {
      const auto loss = j["loss"].get<std::string>();
      if (loss == "cross_entropy") {
        s.loss = LossKind::CrossEntropy;
      } else if (loss == "squared") {
        s.loss = LossKind::Squared;
      } else {
        throw Error(ErrorCode::InvalidSpec, "unknown loss " + loss);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("train spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string train_spec_to_json(const TrainSpec& s) {
  nlohmann::ordered_json j;
  j["layer_sizes"] = s.layer_sizes;
  j["data"] = {{"samples_per_class", s.data.samples_per_class},
               {"dim", s.data.dim},
               {"separation", s.data.separation},
               {"noise_std", s.data.noise_std},
               {"seed", s.data.seed}};
  j["eta"] = s.eta;
  j["eta_schedule"] = nlohmann::ordered_json::array();
  for (const auto& [e, m] : s.eta_schedule) j["eta_schedule"].push_back({e, m});
  j["mu"] = s.mu;
  j["wd"] = s.wd;
  j["batch_size"] = s.batch_size;
  j["epochs"] = s.epochs;
  j["ckpt_every"] = s.ckpt_every;
  j["seed"] = s.seed;
  j["loss"] = s.loss == LossKind::CrossEntropy ? "cross_entropy" : "squared";
  return j.dump(2);
}

void write_run_record(const TrainRunRecord& record, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["manifest"] = record.manifest_path.string();
  j["wall_seconds"] = record.wall_seconds;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : record.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace trajmap
