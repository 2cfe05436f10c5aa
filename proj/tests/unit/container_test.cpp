#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "nab/container.hpp"
#include "nab/errors.hpp"

using namespace nab;
namespace fs = std::filesystem;

namespace {

SplitBundle sample_bundle() {
  auto split = testkit::random_split(100, 10, {8, 8, 3}, 4);
  std::vector<LabeledExample> ex(split.begin(), split.end());
  ex[3].provenance = Provenance::kAttackerPoisoned;
  ex[7].provenance = Provenance::kDefenderStamped;
  SplitBundle b{DatasetSplit("train", 10, ex), std::nullopt, std::nullopt};
  PoisonManifest m;
  for (ExampleId id = 100; id < 110; ++id) {
    m.poisoned_ids.push_back(id);
    m.original_labels[id] = static_cast<int>(id % 10);
  }
  m.noise_ids = {150, 151};
  m.trigger_name = "patch";
  m.target_map_name = "all-to-one:0";
  m.lambda = 0.1;
  m.seed = 99;
  b.manifest = m;
  b.stamped_ids = std::vector<ExampleId>{107, 120};
  return b;
}

}  // namespace

TEST(Container, RoundTripInMemory) {
  const auto b = sample_bundle();
  EXPECT_EQ(decode_split(encode_split(b)), b);
  SplitBundle plain{b.split, std::nullopt, std::nullopt};
  EXPECT_EQ(decode_split(encode_split(plain)), plain);
}

TEST(Container, RoundTripOnDiskIsByteExact) {
  const auto b = sample_bundle();
  const fs::path p = fs::temp_directory_path() / "nab_container_test.nabsplit";
  save_split(p, b);
  const auto loaded = load_split(p);
  EXPECT_EQ(loaded, b);
  EXPECT_EQ(encode_split(loaded), encode_split(b));
  ASSERT_TRUE(loaded.manifest);
  EXPECT_EQ(loaded.manifest->poisoned_ids.size(), 10u);
}

TEST(Container, PixelValuesArePreservedExactly) {
  const ImageShape s{2, 2, 1};
  SplitBundle b{DatasetSplit("x", 2, {{1, ImageTensor(s, {0.0f, 1.0f / 3.0f, 0.1f, 1.0f}), 1, Provenance::kClean}}),
                std::nullopt, std::nullopt};
  EXPECT_EQ(decode_split(encode_split(b)).split[0].image, b.split[0].image);
}

TEST(Container, TruncatedFileIsFormatError) {
  const fs::path p = fs::temp_directory_path() / "nab_container_trunc.nabsplit";
  save_split(p, sample_bundle());
  fs::resize_file(p, fs::file_size(p) - 8);
  EXPECT_THROW(load_split(p), FormatError);
}

TEST(Container, EveryTruncationIsRejected) {
  const auto bytes = encode_split(sample_bundle());
  for (std::size_t cut = 0; cut < bytes.size(); cut += 97) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_split(part), FormatError) << "cut at " << cut;
  }
}

TEST(Container, VersionMismatchAndBadMagic) {
  auto bytes = encode_split(sample_bundle());
  auto wrong_version = bytes;
  // magic is 8 bytes, version follows as u32
  wrong_version[8] = static_cast<std::uint8_t>(kContainerVersion + 1);
  EXPECT_THROW(decode_split(wrong_version), FormatError);
  auto wrong_magic = bytes;
  wrong_magic[0] ^= 0xff;
  EXPECT_THROW(decode_split(wrong_magic), FormatError);
}

TEST(Container, CorruptPayloadFailsChecksum) {
  auto bytes = encode_split(sample_bundle());
  bytes[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(decode_split(bytes), FormatError);
}

TEST(Container, MissingFileIsLoadError) {
  EXPECT_THROW(load_split("/nonexistent/x.nabsplit"), LoadError);
}

TEST(Fnv, KnownVectors) {
  const std::string empty;
  EXPECT_EQ(fnv1a64(reinterpret_cast<const std::uint8_t*>(empty.data()), 0), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(fnv1a64(reinterpret_cast<const std::uint8_t*>(a.data()), 1), 0xaf63dc4c8601ec8cULL);
  const std::string foobar = "foobar";
  EXPECT_EQ(fnv1a64(reinterpret_cast<const std::uint8_t*>(foobar.data()), 6), 0x85944171f73967e8ULL);
}
