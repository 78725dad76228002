#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "support.hpp"
#include "trajmap/error.hpp"
#include "trajmap/hallmarks.hpp"
#include "trajmap/spectral.hpp"
#include "trajmap/trajgen.hpp"

using namespace trajmap;
using trajmap::testing::TempDir;

namespace {

TrainSpec small_spec() {
  TrainSpec s;
  s.layer_sizes = {4, 8, 2};
  s.data.samples_per_class = 24;
  s.data.dim = 4;
  s.epochs = 5;
  s.batch_size = 8;
  return s;
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

TEST_CASE("zero epochs stores only the initialization") {
  TempDir dir("tg");
  auto s = small_spec();
  s.epochs = 0;
  const auto run = train(s, dir.path());
  const auto store = open_store(run.manifest_path);
  CHECK(store.n_points() == 1);
  CHECK(store.has_init());
  CHECK(store.checkpoint(0).tensors == init_parameters(s).tensors);
  CHECK(run.epochs.size() == 1);
}

TEST_CASE("checkpoint cadence and tensor layout") {
  TempDir dir("tg");
  auto s = small_spec();
  s.epochs = 6;
  s.ckpt_every = 2;
  const auto store = open_store(train(s, dir.path()).manifest_path);
  REQUIRE(store.n_points() == 4);
  CHECK(store.points()[3].index == 6);
  CHECK(store.points()[3].label == "epoch 6");
  REQUIRE(store.layout().size() == 4);
  CHECK(store.layout()[0].name == "layers.0.weight");
  CHECK(store.layout()[0].dims == std::vector<std::uint64_t>{8, 4});
  CHECK(store.layout()[3].name == "layers.1.bias");
  CHECK(store.dim_p() == 8 * 4 + 8 + 2 * 8 + 2);
}

TEST_CASE("training is bit-reproducible") {
  TempDir a("tg"), b("tg");
  train(small_spec(), a.path());
  train(small_spec(), b.path());
  CHECK(trajmap::testing::directory_hash(a.path()) == trajmap::testing::directory_hash(b.path()));
  TempDir c("tg");
  auto other = small_spec();
  other.seed = 8;
  train(other, c.path());
  CHECK(trajmap::testing::directory_hash(a.path()) != trajmap::testing::directory_hash(c.path()));
}

TEST_CASE("fixture spec learns the blobs") {
  TempDir dir("tg");
  const auto run = train(fixture_spec(), dir.path());
  CHECK(run.epochs.size() == fixture_spec().epochs + 1);
  CHECK(run.epochs.back().accuracy > 0.95);
  CHECK(run.epochs.back().loss < run.epochs.front().loss);
  for (const auto& e : run.epochs) CHECK(std::isfinite(e.loss));
}

TEST_CASE("emitted stores feed every analysis") {
  TempDir dir("tg");
  const auto store = open_store(train(small_spec(), dir.path()).manifest_path);
  CHECK_NOTHROW(mds(trajectory_map(store, SelectionSpec::all())));
  CHECK_NOTHROW(mds_relative(store, 0, SelectionSpec::all()));
  for (auto m : kAllAngularMeasures) CHECK_NOTHROW(angular_series(store, m, SelectionSpec::all()));
  for (auto m : kAllNormMeasures) CHECK_NOTHROW(norm_series(store, m, SelectionSpec::all()));
  CHECK_NOTHROW(trajectory_spectra(store, SelectionSpec::all()));
}

TEST_CASE("full-batch linear squared-loss training matches the closed-form recursion") {
  TempDir dir("tg");
  TrainSpec s;
  s.layer_sizes = {3, 2};
  s.data.samples_per_class = 10;
  s.data.dim = 3;
  s.eta = 0.05;
  s.mu = 0.0;
  s.wd = 0.0;
  s.batch_size = 20;
  s.epochs = 25;
  s.loss = LossKind::Squared;
  const auto store = open_store(train(s, dir.path()).manifest_path);
  const auto data = make_blobs(s.data);
  const std::size_t n = data.size();
  const std::size_t d = 3, c = 2;

  auto theta = store.flatten(0, SelectionSpec::all());  // W (c x d) then b (c)
  for (std::size_t epoch = 1; epoch <= s.epochs; ++epoch) {
    std::vector<double> gw(c * d, 0.0), gb(c, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = &data.x[r * d];
      for (std::size_t o = 0; o < c; ++o) {
        double z = theta[c * d + o];
        for (std::size_t i = 0; i < d; ++i) z += theta[o * d + i] * x[i];
        const double err = z - (data.labels[r] == o ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) gw[o * d + i] += err * x[i] / static_cast<double>(n);
        gb[o] += err / static_cast<double>(n);
      }
    }
    for (std::size_t k = 0; k < c * d; ++k) theta[k] -= s.eta * gw[k];
    for (std::size_t o = 0; o < c; ++o) theta[c * d + o] -= s.eta * gb[o];
    const auto got = store.flatten(epoch, SelectionSpec::all());
    for (std::size_t k = 0; k < theta.size(); ++k) CHECK(std::abs(got[k] - theta[k]) <= 1e-8);
  }
}

TEST_CASE("coupled weight decay and momentum on a single step") {
  // One full-batch epoch from the stored init: v = g + wd*theta, theta -= eta*v.
  TempDir a("tg"), b("tg");
  TrainSpec s;
  s.layer_sizes = {2, 2};
  s.data.samples_per_class = 4;
  s.data.dim = 2;
  s.batch_size = 8;
  s.epochs = 1;
  s.loss = LossKind::Squared;
  s.mu = 0.9;
  s.wd = 0.5;
  const auto with = open_store(train(s, a.path()).manifest_path);
  s.wd = 0.0;
  const auto without = open_store(train(s, b.path()).manifest_path);
  const auto init = with.flatten(0, SelectionSpec::all());
  const auto x = with.flatten(1, SelectionSpec::all());
  const auto y = without.flatten(1, SelectionSpec::all());
  for (std::size_t k = 0; k < init.size(); ++k) {
    CHECK(x[k] == doctest::Approx(y[k] - s.eta * 0.5 * init[k]).epsilon(1e-12));
  }
}

TEST_CASE("learning-rate schedule multiplies from its epoch on") {
  TrainSpec s;
  s.eta = 0.1;
  s.eta_schedule = {{2, 0.5}, {4, 0.1}};
  CHECK(s.learning_rate(0) == 0.1);
  CHECK(s.learning_rate(1) == 0.1);
  CHECK(s.learning_rate(2) == doctest::Approx(0.05));
  CHECK(s.learning_rate(5) == doctest::Approx(0.01));
}

TEST_CASE("grid: single base variant equals a standalone run") {
  TempDir grid_dir("tg"), solo_dir("tg");
  const auto base = small_spec();
  std::vector<GridVariant> variants{{"", base.mu, base.wd}};
  const auto results = hyperparameter_grid(base, variants, grid_dir.path());
  REQUIRE(results.size() == 1);
  CHECK(results[0].name == "mu=0.9,wd=0.0001");
  const auto solo = open_store(train(base, solo_dir.path()).manifest_path);
  CHECK(results[0].omega.omega == mds(trajectory_map(solo, SelectionSpec::all())).omega);
}

TEST_CASE("ablation variants are labelled and ordered") {
  const auto v = ablation_variants(0.9, 1e-4);
  REQUIRE(v.size() == 4);
  CHECK(v[0].name == "mu=0.9,wd=0.0001");
  CHECK(v[1].name == "mu=0,wd=0.0001");
  CHECK(v[2].name == "mu=0.9,wd=0");
  CHECK(v[3].name == "mu=0,wd=0");
  CHECK(v[1].mu == 0.0);
  CHECK(v[2].wd == 0.0);
  const std::vector<GridVariant> none;
  TempDir dir("tg");
  CHECK(code_of([&] { hyperparameter_grid(small_spec(), none, dir.path()); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("spec json round-trip and validation") {
  auto s = small_spec();
  s.eta_schedule = {{3, 0.5}};
  s.loss = LossKind::Squared;
  const auto back = train_spec_from_json(train_spec_to_json(s));
  CHECK(back.layer_sizes == s.layer_sizes);
  CHECK(back.data.samples_per_class == s.data.samples_per_class);
  CHECK(back.data.separation == s.data.separation);
  CHECK(back.eta_schedule == s.eta_schedule);
  CHECK(back.loss == LossKind::Squared);
  CHECK(back.seed == s.seed);
  CHECK(train_spec_from_json(R"({"train": {"epochs": 3}})").epochs == 3);
  CHECK(code_of([] { train_spec_from_json(R"({"layer_sizes": [4]})"); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { train_spec_from_json(R"({"mu": 1.0})"); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { train_spec_from_json(R"({"eta_schedule": [[3, 0.5], [2, 0.1]]})"); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { train_spec_from_json(R"({"batch_size": 0})"); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { train_spec_from_json("{"); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("divergent training reports NonFiniteLoss") {
  TempDir dir("tg");
  auto s = small_spec();
  s.loss = LossKind::Squared;
  s.eta = 1e6;
  s.mu = 0.0;
  CHECK(code_of([&] { train(s, dir.path()); }) == ErrorCode::NonFiniteLoss);
}

TEST_CASE("blob data is deterministic and balanced") {
  BlobSpec b;
  b.samples_per_class = 5;
  b.dim = 3;
  const auto x = make_blobs(b);
  const auto y = make_blobs(b);
  CHECK(x.x == y.x);
  CHECK(x.size() == 10);
  std::size_t ones = 0;
  for (auto l : x.labels) ones += l;
  CHECK(ones == 5);
}
