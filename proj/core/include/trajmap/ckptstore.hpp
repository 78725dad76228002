#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace trajmap {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, F16 = 2 };

std::string_view dtype_name(DType dtype) noexcept;
std::size_t dtype_size(DType dtype) noexcept;

/// One named tensor. F16 payloads are kept as raw binary16 bit patterns.
struct TensorRecord {
  using Payload = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint16_t>>;

  std::string name;
  std::vector<std::uint64_t> dims;
  Payload data;

  static TensorRecord f64(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values);
  static TensorRecord f32(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values);
  static TensorRecord f16(std::string name, std::vector<std::uint64_t> dims, std::vector<std::uint16_t> bits);

  DType dtype() const noexcept;
  std::size_t element_count() const;  // product of dims; 1 for a scalar
  std::size_t stored_count() const noexcept;
  double value(std::size_t i) const;  // upconverted to F64

  /// Throws InvalidTensor if the payload length disagrees with dims or the name is unusable.
  void validate() const;

  friend bool operator==(const TensorRecord& a, const TensorRecord& b);  // bitwise on payload
};

struct Checkpoint {
  std::int64_t index = 0;
  std::string label;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(std::string_view name) const noexcept;
  /// Throws InvalidCheckpoint (no tensors, duplicate names) or InvalidTensor.
  void validate() const;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) = default;
};

struct LayoutEntry {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> dims;
  std::size_t count = 0;

  friend bool operator==(const LayoutEntry& a, const LayoutEntry& b) = default;
};

using Layout = std::vector<LayoutEntry>;

Layout layout_of(const Checkpoint& ckpt);

/// `*` matches a run of characters other than '.', `**` matches any run, `?` one character.
bool glob_match(std::string_view pattern, std::string_view name);

/// Empty include list selects every tensor.
struct SelectionSpec {
  std::vector<std::string> include_globs;
  std::vector<std::string> exclude_globs;

  static SelectionSpec all() { return {}; }
  static SelectionSpec only(std::string glob) { return {{std::move(glob)}, {}}; }
  bool selects(std::string_view name) const;
};

/// A selection bound to a concrete layout: contiguous pieces of the flattened parameter vector.
struct ResolvedSelection {
  struct Segment {
    std::size_t tensor = 0;     // position in the layout
    std::size_t flat_begin = 0; // offset within the selected flattened vector
    std::size_t count = 0;
  };
  std::vector<Segment> segments;
  std::size_t dim = 0;
};

/// Throws EmptySelection when nothing matches.
ResolvedSelection resolve_selection(const Layout& layout, const SelectionSpec& sel);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Index and label are not part of the file; they come from the manifest.
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::vector<double> flatten(const Checkpoint& ckpt, const SelectionSpec& sel);

struct ManifestEntry {
  std::int64_t index = 0;
  std::string label;
  std::string path;  // relative to the manifest
};

void write_manifest(const std::filesystem::path& manifest_path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

struct StoreOptions {
  // Stores larger than this are read from disk on demand instead of cached.
  std::uint64_t mem_budget_bytes = std::uint64_t{2} << 30;
};

struct PointInfo {
  std::int64_t index = 0;
  std::string label;
};

/// Immutable ordered set of checkpoints sharing one layout.
class TrajectoryStore {
 public:
  static TrajectoryStore from_checkpoints(std::vector<Checkpoint> checkpoints);

  std::size_t n_points() const noexcept { return points_.size(); }
  std::size_t dim_p() const noexcept { return dim_p_; }
  const Layout& layout() const noexcept { return layout_; }
  const std::vector<PointInfo>& points() const noexcept { return points_; }
  bool has_init() const noexcept { return !points_.empty() && points_.front().index == 0; }
  bool cached() const noexcept { return !cache_.empty() || points_.empty(); }
  const std::filesystem::path& manifest_path() const noexcept { return manifest_path_; }

  Checkpoint checkpoint(std::size_t i) const;
  ResolvedSelection resolve(const SelectionSpec& sel) const { return resolve_selection(layout_, sel); }
  std::vector<double> flatten(std::size_t i, const ResolvedSelection& sel) const;
  std::vector<double> flatten(std::size_t i, const SelectionSpec& sel) const;

  /// Writes elements [begin, begin + out.size()) of the selected flattened vector of point i.
  void read_slice(std::size_t i, const ResolvedSelection& sel, std::size_t begin, std::span<double> out) const;

 private:
  friend TrajectoryStore open_store(const std::filesystem::path&, const StoreOptions&);

  std::vector<PointInfo> points_;
  Layout layout_;
  std::size_t dim_p_ = 0;
  std::vector<Checkpoint> cache_;
  std::vector<std::filesystem::path> files_;
  std::vector<std::uint64_t> payload_offsets_;  // per layout entry, identical across files
  std::filesystem::path manifest_path_;
};

/// Throws InvalidManifest, LayoutMismatch, DuplicateIndex and any read_checkpoint error.
TrajectoryStore open_store(const std::filesystem::path& manifest_path, const StoreOptions& options = {});

}  // namespace trajmap
