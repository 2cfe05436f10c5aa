#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nab/dataset.hpp"

namespace nab {

/// Current version of the split container format. See docs/container-format.md.
inline constexpr std::uint32_t kContainerVersion = 1;

/// Everything a split container file can hold.
struct SplitBundle {
  DatasetSplit split;
  std::optional<PoisonManifest> manifest;
  /// Ids stamped by the defense, when the split is a processed training set.
  std::optional<std::vector<ExampleId>> stamped_ids;

  bool operator==(const SplitBundle&) const = default;
};

void save_split(const std::filesystem::path& path, const SplitBundle& bundle);
SplitBundle load_split(const std::filesystem::path& path);

/// In-memory encoding, exposed for tests.
std::vector<std::uint8_t> encode_split(const SplitBundle& bundle);
SplitBundle decode_split(const std::vector<std::uint8_t>& bytes);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Little-endian byte writer/reader shared by the container and checkpoint formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v);
  void f64(double v);
  void str(const std::string& s);
  void raw(const void* data, std::size_t n);

  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32();
  double f64();
  std::string str();
  void raw(void* out, std::size_t n);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return size_ - pos_; }

 private:
  void need(std::size_t n) const;
  std::uint64_t get(int n);

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace nab
