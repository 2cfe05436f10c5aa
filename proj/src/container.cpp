#include "nab/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "nab/errors.hpp"

namespace nab {

namespace {

constexpr char kMagic[8] = {'N', 'A', 'B', 'S', 'P', 'L', 'I', 'T'};
constexpr std::uint8_t kBlockManifest = 1;
constexpr std::uint8_t kBlockStamped = 2;
constexpr std::uint8_t kBlockEnd = 0xff;

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}
void ByteWriter::raw(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  bytes_.insert(bytes_.end(), p, p + n);
}

void ByteReader::need(std::size_t n) const {
  if (n > size_ - pos_) {
    throw FormatError("unexpected end of data at offset " + std::to_string(pos_) + " (need " +
                      std::to_string(n) + " bytes)");
  }
}
std::uint64_t ByteReader::get(int n) {
  need(static_cast<std::size_t>(n));
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }
std::string ByteReader::str() {
  const auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
  pos_ += n;
  return s;
}
void ByteReader::raw(void* out, std::size_t n) {
  need(n);
  std::memcpy(out, data_ + pos_, n);
  pos_ += n;
}

std::vector<std::uint8_t> encode_split(const SplitBundle& bundle) {
  const auto& split = bundle.split;
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kContainerVersion);
  w.str(split.name());
  w.u32(static_cast<std::uint32_t>(split.class_count()));
  const ImageShape shape = split.empty() ? ImageShape{} : split.image_shape();
  w.u32(static_cast<std::uint32_t>(shape.height));
  w.u32(static_cast<std::uint32_t>(shape.width));
  w.u32(static_cast<std::uint32_t>(shape.channels));
  w.u64(split.size());
  for (const auto& ex : split) {
    w.u64(ex.id);
    w.u32(static_cast<std::uint32_t>(ex.label));
    w.u8(static_cast<std::uint8_t>(ex.provenance));
    for (float v : ex.image.values()) w.f32(v);
  }
  if (bundle.manifest) {
    const auto& m = *bundle.manifest;
    w.u8(kBlockManifest);
    w.str(m.trigger_name);
    w.str(m.target_map_name);
    w.f64(m.lambda);
    w.u64(m.seed);
    w.u64(m.poisoned_ids.size());
    for (auto id : m.poisoned_ids) w.u64(id);
    w.u64(m.original_labels.size());
    for (const auto& [id, label] : m.original_labels) {
      w.u64(id);
      w.u32(static_cast<std::uint32_t>(label));
    }
    w.u64(m.noise_ids.size());
    for (auto id : m.noise_ids) w.u64(id);
  }
  if (bundle.stamped_ids) {
    w.u8(kBlockStamped);
    w.u64(bundle.stamped_ids->size());
    for (auto id : *bundle.stamped_ids) w.u64(id);
  }
  w.u8(kBlockEnd);
  const auto& b = w.bytes();
  const std::uint64_t checksum = fnv1a64(b.data(), b.size());
  w.u64(checksum);
  return std::move(w.bytes());
}

SplitBundle decode_split(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8) throw FormatError("file too short for a split container");
  const std::size_t body = bytes.size() - 8;
  ByteReader r(bytes.data(), bytes.size());
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("bad magic: not a split container");
  const auto version = r.u32();
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version) + " (expected " +
                      std::to_string(kContainerVersion) + ")");
  }
  ByteReader tail(bytes.data() + body, 8);
  if (tail.u64() != fnv1a64(bytes.data(), body)) {
    throw FormatError("checksum mismatch (truncated or corrupted file)");
  }

  SplitBundle out;
  std::string name = r.str();
  const int class_count = static_cast<int>(r.u32());
  ImageShape shape{static_cast<int>(r.u32()), static_cast<int>(r.u32()), static_cast<int>(r.u32())};
  const auto count = r.u64();
  std::vector<LabeledExample> examples;
  examples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    LabeledExample ex;
    ex.id = r.u64();
    ex.label = static_cast<int>(r.u32());
    const auto prov = r.u8();
    if (prov > 2) throw FormatError("record " + std::to_string(i) + ": bad provenance tag");
    ex.provenance = static_cast<Provenance>(prov);
    std::vector<float> values(shape.size());
    for (auto& v : values) v = r.f32();
    ex.image = ImageTensor(shape, std::move(values));
    examples.push_back(std::move(ex));
  }
  out.split = DatasetSplit(std::move(name), class_count, std::move(examples));

  for (;;) {
    if (r.offset() >= body) throw FormatError("missing end-of-blocks marker");
    const auto tag = r.u8();
    if (tag == kBlockEnd) break;
    if (tag == kBlockManifest) {
      PoisonManifest m;
      m.trigger_name = r.str();
      m.target_map_name = r.str();
      m.lambda = r.f64();
      m.seed = r.u64();
      for (auto n = r.u64(); n > 0; --n) m.poisoned_ids.push_back(r.u64());
      for (auto n = r.u64(); n > 0; --n) {
        const auto id = r.u64();
        m.original_labels[id] = static_cast<int>(r.u32());
      }
      for (auto n = r.u64(); n > 0; --n) m.noise_ids.push_back(r.u64());
      out.manifest = std::move(m);
    } else if (tag == kBlockStamped) {
      std::vector<ExampleId> ids;
      for (auto n = r.u64(); n > 0; --n) ids.push_back(r.u64());
      out.stamped_ids = std::move(ids);
    } else {
      throw FormatError("unknown block tag " + std::to_string(tag));
    }
  }
  if (r.offset() != body) throw FormatError("trailing bytes after end-of-blocks marker");
  return out;
}

void save_split(const std::filesystem::path& path, const SplitBundle& bundle) {
  const auto bytes = encode_split(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

SplitBundle load_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  return decode_split(bytes);
}

}  // namespace nab
