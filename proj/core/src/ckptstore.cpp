#include "trajmap/ckptstore.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "trajmap/error.hpp"
#include "trajmap/half.hpp"

namespace trajmap {
namespace {

constexpr std::array<char, 8> kMagic = {'T', 'R', 'A', 'J', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::string dims_string(const std::vector<std::uint64_t>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>(u & 0xffu));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | p[i]);
  return static_cast<T>(u);
}

// Bounds-checked cursor over a file image.
class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  const unsigned char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw Error(ErrorCode::TruncatedFile, path_.string() + ": needed " + std::to_string(n) + " bytes at offset " +
                                                std::to_string(pos_));
    }
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T read() {
    return get_le<T>(take(sizeof(T)));
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

struct ParsedFile {
  Checkpoint ckpt;
  std::vector<std::uint64_t> payload_offsets;
};

ParsedFile parse_checkpoint(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  Reader r(bytes, path);
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::BadMagic, path.string());
  }
  r.take(kMagic.size());
  const auto version = r.read<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::UnsupportedVersion, path.string() + ": version " + std::to_string(version));
  }
  const auto count = r.read<std::uint32_t>();
  ParsedFile parsed;
  parsed.ckpt.tensors.reserve(std::min<std::uint32_t>(count, 1u << 16));
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.read<std::uint16_t>();
    const unsigned char* name = r.take(name_len);
    const auto dtype_raw = r.read<std::uint8_t>();
    if (dtype_raw > 2) {
      throw Error(ErrorCode::InvalidTensor, path.string() + ": unknown dtype " + std::to_string(dtype_raw));
    }
    const auto dtype = static_cast<DType>(dtype_raw);
    const auto rank = r.read<std::uint8_t>();
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t elements = 1;
    for (auto& d : dims) {
      d = r.read<std::uint64_t>();
      if (d != 0 && elements > std::numeric_limits<std::uint64_t>::max() / d / 8) {
        throw Error(ErrorCode::InvalidTensor, path.string() + ": tensor too large");
      }
      elements *= d;
    }
    const std::size_t elem_size = dtype_size(dtype);
    if (elements > (bytes.size() - r.pos()) / elem_size) {
      throw Error(ErrorCode::TruncatedFile, path.string() + ": payload of tensor " + std::to_string(t));
    }
    parsed.payload_offsets.push_back(r.pos());
    const unsigned char* payload = r.take(static_cast<std::size_t>(elements) * elem_size);
    TensorRecord rec;
    rec.name.assign(reinterpret_cast<const char*>(name), name_len);
    rec.dims = std::move(dims);
    const auto n = static_cast<std::size_t>(elements);
    switch (dtype) {
      case DType::F32: {
        std::vector<float> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload + 4 * i));
        rec.data = std::move(v);
        break;
      }
      case DType::F64: {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(get_le<std::uint64_t>(payload + 8 * i));
        rec.data = std::move(v);
        break;
      }
      case DType::F16: {
        std::vector<std::uint16_t> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = get_le<std::uint16_t>(payload + 2 * i);
        rec.data = std::move(v);
        break;
      }
    }
    parsed.ckpt.tensors.push_back(std::move(rec));
  }
  if (!r.done()) {
    throw Error(ErrorCode::InvalidCheckpoint, path.string() + ": trailing bytes after last tensor");
  }
  parsed.ckpt.validate();
  return parsed;
}

void decode_into(const TensorRecord& rec, std::size_t first, std::span<double> out) {
  std::visit(
      [&](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (std::size_t i = 0; i < out.size(); ++i) {
          if constexpr (std::is_same_v<T, std::uint16_t>) {
            out[i] = half_to_double(v[first + i]);
          } else {
            out[i] = static_cast<double>(v[first + i]);
          }
        }
      },
      rec.data);
}

void decode_bytes(DType dtype, const unsigned char* p, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (dtype) {
      case DType::F32: out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)); break;
      case DType::F64: out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i)); break;
      case DType::F16: out[i] = half_to_double(get_le<std::uint16_t>(p + 2 * i)); break;
    }
  }
}

// Applies fn(segment, tensor_offset, out_subspan) to every piece of [begin, begin + out.size()).
template <typename Fn>
void for_each_piece(const ResolvedSelection& sel, std::size_t begin, std::span<double> out, Fn&& fn) {
  const std::size_t end = begin + out.size();
  if (end > sel.dim) throw Error(ErrorCode::InvalidSpec, "slice exceeds selected dimension");
  auto it = std::upper_bound(sel.segments.begin(), sel.segments.end(), begin,
                             [](std::size_t v, const auto& s) { return v < s.flat_begin; });
  if (it != sel.segments.begin()) --it;
  std::size_t pos = begin;
  for (; it != sel.segments.end() && pos < end; ++it) {
    const std::size_t seg_end = it->flat_begin + it->count;
    if (seg_end <= pos) continue;
    const std::size_t take = std::min(seg_end, end) - pos;
    fn(*it, pos - it->flat_begin, out.subspan(pos - begin, take));
    pos += take;
  }
}

}  // namespace

std::string_view dtype_name(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return "F32";
    case DType::F64: return "F64";
    case DType::F16: return "F16";
  }
  return "?";
}

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::F16: return 2;
  }
  return 0;
}

TensorRecord TensorRecord::f64(std::string name, std::vector<std::uint64_t> dims, std::vector<double> values) {
  return {std::move(name), std::move(dims), std::move(values)};
}
TensorRecord TensorRecord::f32(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values) {
  return {std::move(name), std::move(dims), std::move(values)};
}
TensorRecord TensorRecord::f16(std::string name, std::vector<std::uint64_t> dims, std::vector<std::uint16_t> bits) {
  return {std::move(name), std::move(dims), std::move(bits)};
}

DType TensorRecord::dtype() const noexcept { return static_cast<DType>(data.index()); }

std::size_t TensorRecord::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

std::size_t TensorRecord::stored_count() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

double TensorRecord::value(std::size_t i) const {
  double out = 0.0;
  decode_into(*this, i, std::span<double>(&out, 1));
  return out;
}

void TensorRecord::validate() const {
  if (name.empty()) throw Error(ErrorCode::InvalidTensor, "empty tensor name");
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::InvalidTensor, "tensor name too long");
  }
  if (dims.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw Error(ErrorCode::InvalidTensor, name + ": rank exceeds 255");
  }
  if (stored_count() != element_count()) {
    throw Error(ErrorCode::InvalidTensor, name + ": " + std::to_string(stored_count()) +
                                              " values for dims " + dims_string(dims));
  }
}

bool operator==(const TensorRecord& a, const TensorRecord& b) {
  if (a.name != b.name || a.dims != b.dims || a.data.index() != b.data.index()) return false;
  return std::visit(
      [&](const auto& va) {
        const auto& vb = std::get<std::decay_t<decltype(va)>>(b.data);
        return va.size() == vb.size() &&
               (va.empty() || std::memcmp(va.data(), vb.data(), va.size() * sizeof(va[0])) == 0);
      },
      a.data);
}

const TensorRecord* Checkpoint::find(std::string_view name) const noexcept {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void Checkpoint::validate() const {
  if (tensors.empty()) throw Error(ErrorCode::InvalidCheckpoint, "checkpoint has no tensors");
  if (tensors.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidCheckpoint, "too many tensors");
  }
  std::set<std::string_view> seen;
  for (const auto& t : tensors) {
    t.validate();
    if (!seen.insert(t.name).second) throw Error(ErrorCode::InvalidCheckpoint, "duplicate tensor name " + t.name);
  }
}

Layout layout_of(const Checkpoint& ckpt) {
  Layout layout;
  layout.reserve(ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) layout.push_back({t.name, t.dtype(), t.dims, t.element_count()});
  return layout;
}

ResolvedSelection resolve_selection(const Layout& layout, const SelectionSpec& sel) {
  ResolvedSelection out;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!sel.selects(layout[i].name)) continue;
    out.segments.push_back({i, out.dim, layout[i].count});
    out.dim += layout[i].count;
  }
  if (out.segments.empty()) throw Error(ErrorCode::EmptySelection, "selection matches no tensors");
  return out;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.validate();
  std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint64_t>(out, d);
    std::visit(
        [&](const auto& v) {
          using T = typename std::decay_t<decltype(v)>::value_type;
          for (const T x : v) {
            if constexpr (std::is_same_v<T, float>) {
              put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
            } else if constexpr (std::is_same_v<T, double>) {
              put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
            } else {
              put_le<std::uint16_t>(out, x);
            }
          }
        },
        t.data);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(slurp(path), path).ckpt; }

std::vector<double> flatten(const Checkpoint& ckpt, const SelectionSpec& sel) {
  const auto resolved = resolve_selection(layout_of(ckpt), sel);
  std::vector<double> out(resolved.dim);
  for (const auto& seg : resolved.segments) {
    decode_into(ckpt.tensors[seg.tensor], 0, std::span<double>(out).subspan(seg.flat_begin, seg.count));
  }
  return out;
}

void write_manifest(const std::filesystem::path& manifest_path, std::span<const ManifestEntry> entries) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["checkpoints"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json item;
    item["index"] = e.index;
    item["label"] = e.label;
    item["path"] = e.path;
    j["checkpoints"].push_back(std::move(item));
  }
  std::ofstream f(manifest_path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + manifest_path.string());
  f << j.dump(2) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + manifest_path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidManifest, manifest_path.string() + ": " + e.what());
  }
  std::vector<ManifestEntry> entries;
  try {
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::UnsupportedVersion, manifest_path.string() + ": manifest version");
    }
    for (const auto& item : j.at("checkpoints")) {
      entries.push_back({item.at("index").get<std::int64_t>(), item.value("label", std::string{}),
                         item.at("path").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidManifest, manifest_path.string() + ": " + e.what());
  }
  return entries;
}

namespace {

std::string first_difference(const Layout& expected, const Layout& got) {
  for (std::size_t k = 0; k < std::max(expected.size(), got.size()); ++k) {
    if (k >= expected.size()) return got[k].name;
    if (k >= got.size() || !(expected[k] == got[k])) return expected[k].name;
  }
  return {};
}

}  // namespace

TrajectoryStore TrajectoryStore::from_checkpoints(std::vector<Checkpoint> checkpoints) {
  TrajectoryStore store;
  std::set<std::int64_t> indices;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto& c = checkpoints[i];
    c.validate();
    auto layout = layout_of(c);
    if (i == 0) {
      store.layout_ = std::move(layout);
    } else if (layout != store.layout_) {
      throw Error(ErrorCode::LayoutMismatch, "checkpoint " + std::to_string(i) + " (" + c.label +
                                                 "): tensor " + first_difference(store.layout_, layout));
    }
    if (!indices.insert(c.index).second) {
      throw Error(ErrorCode::DuplicateIndex, "index " + std::to_string(c.index));
    }
    store.points_.push_back({c.index, c.label});
  }
  for (const auto& e : store.layout_) store.dim_p_ += e.count;
  store.cache_ = std::move(checkpoints);
  return store;
}

Checkpoint TrajectoryStore::checkpoint(std::size_t i) const {
  if (i >= points_.size()) throw Error(ErrorCode::OriginOutOfRange, "checkpoint " + std::to_string(i));
  if (!cache_.empty()) return cache_[i];
  auto c = read_checkpoint(files_[i]);
  c.index = points_[i].index;
  c.label = points_[i].label;
  return c;
}

std::vector<double> TrajectoryStore::flatten(std::size_t i, const ResolvedSelection& sel) const {
  std::vector<double> out(sel.dim);
  read_slice(i, sel, 0, out);
  return out;
}

std::vector<double> TrajectoryStore::flatten(std::size_t i, const SelectionSpec& sel) const {
  return flatten(i, resolve(sel));
}

void TrajectoryStore::read_slice(std::size_t i, const ResolvedSelection& sel, std::size_t begin,
                                 std::span<double> out) const {
  if (i >= points_.size()) throw Error(ErrorCode::OriginOutOfRange, "checkpoint " + std::to_string(i));
  if (!cache_.empty()) {
    for_each_piece(sel, begin, out, [&](const auto& seg, std::size_t off, std::span<double> dst) {
      decode_into(cache_[i].tensors[seg.tensor], off, dst);
    });
    return;
  }
  std::ifstream f(files_[i], std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + files_[i].string());
  std::vector<unsigned char> buf;
  for_each_piece(sel, begin, out, [&](const auto& seg, std::size_t off, std::span<double> dst) {
    const DType dtype = layout_[seg.tensor].dtype;
    const std::size_t es = dtype_size(dtype);
    buf.resize(dst.size() * es);
    f.seekg(static_cast<std::streamoff>(payload_offsets_[seg.tensor] + off * es));
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw Error(ErrorCode::TruncatedFile, files_[i].string());
    decode_bytes(dtype, buf.data(), dst);
  });
}

TrajectoryStore open_store(const std::filesystem::path& manifest_path, const StoreOptions& options) {
  const auto entries = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  TrajectoryStore store;
  store.manifest_path_ = manifest_path;
  std::set<std::int64_t> indices;
  std::uint64_t total_bytes = 0;
  bool keep_cache = true;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto file = base / entries[i].path;
    auto parsed = parse_checkpoint(slurp(file), file);
    parsed.ckpt.index = entries[i].index;
    parsed.ckpt.label = entries[i].label;
    auto layout = layout_of(parsed.ckpt);
    if (i == 0) {
      store.layout_ = std::move(layout);
      store.payload_offsets_ = std::move(parsed.payload_offsets);
    } else if (layout != store.layout_) {
      throw Error(ErrorCode::LayoutMismatch, "checkpoint " + std::to_string(i) + " (" + file.string() +
                                                 "): tensor " + first_difference(store.layout_, layout));
    }
    if (!indices.insert(entries[i].index).second) {
      throw Error(ErrorCode::DuplicateIndex, "index " + std::to_string(entries[i].index));
    }
    for (const auto& t : parsed.ckpt.tensors) total_bytes += t.stored_count() * dtype_size(t.dtype());
    if (keep_cache && total_bytes > options.mem_budget_bytes) {
      keep_cache = false;
      store.cache_.clear();
      store.cache_.shrink_to_fit();
    }
    if (keep_cache) store.cache_.push_back(std::move(parsed.ckpt));
    store.files_.push_back(file);
    store.points_.push_back({entries[i].index, entries[i].label});
  }
  for (const auto& e : store.layout_) store.dim_p_ += e.count;
  return store;
}

}  // namespace trajmap
