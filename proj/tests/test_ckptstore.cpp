#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstring>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "trajmap/ckptstore.hpp"
#include "trajmap/error.hpp"
#include "trajmap/half.hpp"

using namespace trajmap;
using trajmap::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::UsageError;
}

Checkpoint two_tensor_ckpt() {
  Checkpoint c;
  c.tensors.push_back(TensorRecord::f64("a", {2}, {1, 2}));
  c.tensors.push_back(TensorRecord::f64("b", {2, 2}, {3, 4, 5, 6}));
  return c;
}

TensorRecord random_tensor(std::mt19937_64& rng, const std::string& name) {
  std::uniform_int_distribution<int> rank_d(0, 4);
  std::uniform_int_distribution<int> dim_d(0, 4);
  std::uniform_int_distribution<int> dtype_d(0, 2);
  std::normal_distribution<double> normal(0.0, 3.0);
  const int rank = rank_d(rng);
  std::vector<std::uint64_t> dims;
  std::size_t count = 1;
  for (int r = 0; r < rank; ++r) {
    dims.push_back(static_cast<std::uint64_t>(dim_d(rng)));
    count *= dims.back();
  }
  switch (dtype_d(rng)) {
    case 0: {
      std::vector<float> v(count);
      for (auto& x : v) x = static_cast<float>(normal(rng));
      return TensorRecord::f32(name, dims, v);
    }
    case 1: {
      std::vector<double> v(count);
      for (auto& x : v) x = normal(rng);
      return TensorRecord::f64(name, dims, v);
    }
    default: {
      std::vector<std::uint16_t> v(count);
      for (auto& x : v) x = static_cast<std::uint16_t>(rng() & 0x7bffu);  // finite halves of both signs
      return TensorRecord::f16(name, dims, v);
    }
  }
}

}  // namespace

TEST_CASE("single f64 tensor writes magic, header and payload and reads back") {
  TempDir dir("ck");
  Checkpoint c;
  c.tensors.push_back(TensorRecord::f64("w", {2}, {1.0, 2.0}));
  write_checkpoint(c, dir / "w.bin");
  const auto bytes = trajmap::testing::file_bytes(dir / "w.bin");
  // magic 8 + version 4 + count 4 + name_len 2 + name 1 + dtype 1 + rank 1 + dims 8 + payload 16
  REQUIRE(bytes.size() == 45);
  CHECK(std::memcmp(bytes.data(), "TRAJCKPT", 8) == 0);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 1);
  CHECK(bytes[16] == 1);
  CHECK(bytes[18] == 'w');
  CHECK(bytes[19] == 1);  // F64
  CHECK(bytes[20] == 1);  // rank
  CHECK(bytes[21] == 2);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 29, 8);
  CHECK(first == 1.0);
  CHECK(read_checkpoint(dir / "w.bin") == c);
}

TEST_CASE("checkpoint with zero tensors is rejected") {
  TempDir dir("ck");
  CHECK(code_of([&] { write_checkpoint(Checkpoint{}, dir / "e.bin"); }) == ErrorCode::InvalidCheckpoint);
}

TEST_CASE("payload length disagreeing with dims is InvalidTensor") {
  TempDir dir("ck");
  Checkpoint c;
  c.tensors.push_back(TensorRecord::f64("w", {3}, {1.0, 2.0}));
  CHECK(code_of([&] { write_checkpoint(c, dir / "bad.bin"); }) == ErrorCode::InvalidTensor);
}

TEST_CASE("identical checkpoints produce identical bytes") {
  TempDir dir("ck");
  write_checkpoint(two_tensor_ckpt(), dir / "x.bin");
  write_checkpoint(two_tensor_ckpt(), dir / "y.bin");
  CHECK(trajmap::testing::file_hash(dir / "x.bin") == trajmap::testing::file_hash(dir / "y.bin"));
}

TEST_CASE("read errors: magic, version, truncation, trailing bytes, missing file") {
  TempDir dir("ck");
  write_checkpoint(two_tensor_ckpt(), dir / "good.bin");
  auto bytes = trajmap::testing::file_bytes(dir / "good.bin");
  auto dump = [&](const std::string& name, const std::vector<unsigned char>& b) {
    std::ofstream f(dir / name, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return dir / name;
  };

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { read_checkpoint(dump("m.bin", bad_magic)); }) == ErrorCode::BadMagic);

  auto bad_version = bytes;
  bad_version[8] = 2;
  CHECK(code_of([&] { read_checkpoint(dump("v.bin", bad_version)); }) == ErrorCode::UnsupportedVersion);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK(code_of([&] { read_checkpoint(dump("t.bin", truncated)); }) == ErrorCode::TruncatedFile);

  auto header_only = bytes;
  header_only.resize(10);
  CHECK(code_of([&] { read_checkpoint(dump("h.bin", header_only)); }) == ErrorCode::TruncatedFile);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(code_of([&] { read_checkpoint(dump("r.bin", trailing)); }) == ErrorCode::InvalidCheckpoint);

  CHECK(code_of([&] { read_checkpoint(dir / "missing.bin"); }) == ErrorCode::IoError);
}

TEST_CASE("f16 payload decodes exactly on flatten") {
  TempDir dir("ck");
  Checkpoint c;
  const std::uint16_t one = 0x3c00;
  const std::uint16_t minus_2_5 = 0xc100;
  c.tensors.push_back(TensorRecord::f16("h", {2}, {one, minus_2_5}));
  write_checkpoint(c, dir / "h.bin");
  const auto back = read_checkpoint(dir / "h.bin");
  CHECK(back == c);
  const auto flat = flatten(back, SelectionSpec::all());
  REQUIRE(flat.size() == 2);
  CHECK(flat[0] == oracle::half_value(one));
  CHECK(flat[1] == oracle::half_value(minus_2_5));
  CHECK(flat[0] == 1.0);
  CHECK(flat[1] == -2.5);
}

TEST_CASE("half decode agrees with the field-wise oracle for every bit pattern") {
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const auto bits = static_cast<std::uint16_t>(b);
    const double mine = half_to_double(bits);
    const double ref = oracle::half_value(bits);
    if (std::isnan(ref)) {
      CHECK(std::isnan(mine));
    } else {
      REQUIRE(mine == ref);
      if (ref == 0.0) REQUIRE(std::signbit(mine) == std::signbit(ref));
      REQUIRE(double_to_half(mine) == bits);
    }
  }
}

TEST_CASE("half encode rounds to nearest even") {
  CHECK(double_to_half(1.0 + std::ldexp(1.0, -11)) == 0x3c00);               // tie, even stays
  CHECK(double_to_half(1.0 + 3 * std::ldexp(1.0, -11)) == 0x3c02);           // tie, rounds up to even
  CHECK(double_to_half(1.0 + std::ldexp(1.0, -11) + 1e-9) == 0x3c01);        // above tie
  CHECK(double_to_half(70000.0) == 0x7c00);
  CHECK(std::isnan(half_to_double(double_to_half(NAN))));
}

TEST_CASE("randomized round-trip up to rank 4 across dtypes") {
  TempDir dir("ck");
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 100; ++trial) {
    Checkpoint c;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k) c.tensors.push_back(random_tensor(rng, "t" + std::to_string(k) + ".w"));
    const auto path = dir / "r.bin";
    write_checkpoint(c, path);
    REQUIRE(read_checkpoint(path) == c);
  }
}

TEST_CASE("flatten concatenates selected tensors in file order") {
  const auto c = two_tensor_ckpt();
  CHECK(flatten(c, SelectionSpec::all()) == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(flatten(c, SelectionSpec::only("b*")) == std::vector<double>{3, 4, 5, 6});
  SelectionSpec none;
  none.exclude_globs = {"**"};
  CHECK(code_of([&] { flatten(c, none); }) == ErrorCode::EmptySelection);
  SelectionSpec minus_a;
  minus_a.include_globs = {"*"};
  minus_a.exclude_globs = {"a"};
  CHECK(flatten(c, minus_a) == std::vector<double>{3, 4, 5, 6});
}

TEST_CASE("glob semantics") {
  CHECK(glob_match("*", "weight"));
  CHECK_FALSE(glob_match("*", "layers.0.weight"));
  CHECK(glob_match("**", "layers.0.weight"));
  CHECK(glob_match("layers.*.weight", "layers.0.weight"));
  CHECK_FALSE(glob_match("layers.*.weight", "layers.0.attn.weight"));
  CHECK(glob_match("layers.**.weight", "layers.0.attn.weight"));
  CHECK(glob_match("layers.?.bias", "layers.3.bias"));
  CHECK_FALSE(glob_match("layers.?.bias", "layers.10.bias"));
  CHECK(glob_match("**.bias", "a.b.c.bias"));
  CHECK_FALSE(glob_match("*.bias", "a.b.c.bias"));
  CHECK(glob_match("", ""));
  CHECK_FALSE(glob_match("a", ""));
}

TEST_CASE("open_store reads a three-file manifest") {
  TempDir dir("st");
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 3; ++i) {
    auto c = two_tensor_ckpt();
    std::get<std::vector<double>>(c.tensors[0].data)[0] = i;
    const std::string name = "c" + std::to_string(i) + ".bin";
    write_checkpoint(c, dir / name);
    entries.push_back({i, "epoch " + std::to_string(i), name});
  }
  write_manifest(dir / "manifest.json", entries);
  const auto store = open_store(dir / "manifest.json");
  CHECK(store.n_points() == 3);
  CHECK(store.dim_p() == 6);
  CHECK(store.has_init());
  CHECK(store.points()[2].label == "epoch 2");
  CHECK(store.flatten(1, SelectionSpec::all())[0] == 1.0);
}

TEST_CASE("layout mismatch names checkpoint and tensor") {
  TempDir dir("st");
  write_checkpoint(two_tensor_ckpt(), dir / "a.bin");
  Checkpoint missing;
  missing.tensors.push_back(TensorRecord::f64("a", {2}, {1, 2}));
  write_checkpoint(missing, dir / "b.bin");
  std::vector<ManifestEntry> entries{{0, "first", "a.bin"}, {1, "second", "b.bin"}};
  write_manifest(dir / "manifest.json", entries);
  try {
    open_store(dir / "manifest.json");
    FAIL("expected LayoutMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LayoutMismatch);
    CHECK(e.detail().find("b.bin") != std::string::npos);
    CHECK(e.detail().find('b') != std::string::npos);
  }

  Checkpoint retyped;
  retyped.tensors.push_back(TensorRecord::f64("a", {2}, {1, 2}));
  retyped.tensors.push_back(TensorRecord::f32("b", {2, 2}, {3, 4, 5, 6}));
  write_checkpoint(retyped, dir / "c.bin");
  std::vector<ManifestEntry> e2{{0, "first", "a.bin"}, {1, "third", "c.bin"}};
  write_manifest(dir / "m2.json", e2);
  CHECK(code_of([&] { open_store(dir / "m2.json"); }) == ErrorCode::LayoutMismatch);
}

TEST_CASE("duplicate manifest index") {
  TempDir dir("st");
  write_checkpoint(two_tensor_ckpt(), dir / "a.bin");
  std::vector<ManifestEntry> entries{{0, "", "a.bin"}, {0, "", "a.bin"}};
  write_manifest(dir / "manifest.json", entries);
  CHECK(code_of([&] { open_store(dir / "manifest.json"); }) == ErrorCode::DuplicateIndex);
}

TEST_CASE("invalid manifest json") {
  TempDir dir("st");
  {
    std::ofstream f(dir / "m.json");
    f << "{\"version\":1, \"checkpoints\": [ {\"index\": \"zero\"} ]}";
  }
  CHECK(code_of([&] { open_store(dir / "m.json"); }) == ErrorCode::InvalidManifest);
  {
    std::ofstream f(dir / "n.json");
    f << "not json";
  }
  CHECK(code_of([&] { open_store(dir / "n.json"); }) == ErrorCode::InvalidManifest);
}

TEST_CASE("manifest order defines trajectory order; indices kept") {
  TempDir dir("st");
  std::vector<ManifestEntry> entries;
  for (int idx : {0, 2, 1}) {
    auto c = two_tensor_ckpt();
    std::get<std::vector<double>>(c.tensors[0].data)[0] = idx * 10.0;
    const std::string name = "c" + std::to_string(idx) + ".bin";
    write_checkpoint(c, dir / name);
    entries.push_back({idx, "", name});
  }
  write_manifest(dir / "manifest.json", entries);
  const auto store = open_store(dir / "manifest.json");
  CHECK(store.points()[0].index == 0);
  CHECK(store.points()[1].index == 2);
  CHECK(store.points()[2].index == 1);
  CHECK(store.flatten(1, SelectionSpec::all())[0] == 20.0);
  CHECK(store.flatten(2, SelectionSpec::all())[0] == 10.0);
}

TEST_CASE("flatten output of a checkpoint does not depend on manifest permutation") {
  TempDir dir("st");
  std::mt19937_64 rng(99);
  auto cks = trajmap::testing::random_checkpoints(rng, 4, 200);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < cks.size(); ++i) {
    const std::string name = "c" + std::to_string(i) + ".bin";
    write_checkpoint(cks[i], dir / name);
    entries.push_back({cks[i].index, cks[i].label, name});
  }
  write_manifest(dir / "a.json", entries);
  std::reverse(entries.begin(), entries.end());
  write_manifest(dir / "b.json", entries);
  const auto a = open_store(dir / "a.json");
  const auto b = open_store(dir / "b.json");
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.flatten(i, SelectionSpec::all()) == b.flatten(3 - i, SelectionSpec::all()));
    CHECK(a.flatten(i, SelectionSpec::all()).size() == a.dim_p());
  }
}

TEST_CASE("streaming store under a small budget equals the cached store") {
  TempDir dir("st");
  std::mt19937_64 rng(5);
  auto cks = trajmap::testing::random_checkpoints(rng, 5, 9000);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < cks.size(); ++i) {
    const std::string name = "c" + std::to_string(i) + ".bin";
    write_checkpoint(cks[i], dir / name);
    entries.push_back({cks[i].index, cks[i].label, name});
  }
  write_manifest(dir / "manifest.json", entries);
  const auto cached = open_store(dir / "manifest.json");
  const auto streamed = open_store(dir / "manifest.json", StoreOptions{1024});
  CHECK(cached.cached());
  CHECK_FALSE(streamed.cached());
  SelectionSpec bias_only = SelectionSpec::only("**.bias");
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(cached.flatten(i, SelectionSpec::all()) == streamed.flatten(i, SelectionSpec::all()));
    CHECK(cached.flatten(i, bias_only) == streamed.flatten(i, bias_only));
    CHECK(streamed.checkpoint(i).tensors == cks[i].tensors);
    const auto sel = streamed.resolve(SelectionSpec::all());
    std::vector<double> a(700), b(700);
    cached.read_slice(i, sel, 300, a);
    streamed.read_slice(i, sel, 300, b);
    CHECK(a == b);
  }
}

TEST_CASE("from_checkpoints validates layout and indices") {
  std::vector<Checkpoint> cks(2, two_tensor_ckpt());
  cks[1].index = 1;
  CHECK_NOTHROW(TrajectoryStore::from_checkpoints(cks));
  auto dup = cks;
  dup[1].index = 0;
  CHECK(code_of([&] { TrajectoryStore::from_checkpoints(dup); }) == ErrorCode::DuplicateIndex);
  auto bad = cks;
  bad[1].tensors.pop_back();
  CHECK(code_of([&] { TrajectoryStore::from_checkpoints(bad); }) == ErrorCode::LayoutMismatch);
  Checkpoint dupname;
  dupname.tensors.push_back(TensorRecord::f64("a", {1}, {1}));
  dupname.tensors.push_back(TensorRecord::f64("a", {1}, {2}));
  CHECK(code_of([&] { dupname.validate(); }) == ErrorCode::InvalidCheckpoint);
}
