#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "nab/dataset.hpp"
#include "nab/errors.hpp"

using namespace nab;
namespace fs = std::filesystem;

namespace {

SyntheticOptions small_options() {
  SyntheticOptions o;
  o.train_size = 120;
  o.test_size = 40;
  o.height = o.width = 16;
  return o;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nab_dataset_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_cifar_batch(const fs::path& p, int records, unsigned char label, std::size_t truncate_by = 0) {
  std::vector<unsigned char> bytes;
  for (int r = 0; r < records; ++r) {
    bytes.push_back(label);
    for (int i = 0; i < 3072; ++i) bytes.push_back(static_cast<unsigned char>((i + r) % 256));
  }
  bytes.resize(bytes.size() - truncate_by);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Synthetic, ShapesCountsAndRange) {
  const auto d = make_synthetic(small_options());
  ASSERT_EQ(d.train.size(), 120u);
  ASSERT_EQ(d.test.size(), 40u);
  EXPECT_EQ(d.train.class_count(), 4);
  EXPECT_EQ(d.train.image_shape(), (ImageShape{16, 16, 3}));
  for (const auto& ex : d.train) {
    EXPECT_TRUE(ex.image.in_unit_range());
    EXPECT_EQ(ex.provenance, Provenance::kClean);
  }
  for (auto c : d.train.class_counts()) EXPECT_EQ(c, 30u);
}

TEST(Synthetic, DeterministicPerSeed) {
  auto o = small_options();
  const auto a = make_synthetic(o);
  const auto b = make_synthetic(o);
  EXPECT_TRUE(a.train == b.train);
  EXPECT_TRUE(a.test == b.test);
  o.seed = 1;
  EXPECT_FALSE(make_synthetic(o).train == a.train);
}

TEST(Synthetic, TrainAndTestImagesDiffer) {
  const auto d = make_synthetic(small_options());
  EXPECT_FALSE(d.train[0].image == d.test[0].image);
}

TEST(Synthetic, RejectsBadOptions) {
  auto o = small_options();
  o.class_count = 11;
  EXPECT_THROW(make_synthetic(o), ArgumentError);
  o = small_options();
  o.height = 4;
  EXPECT_THROW(make_synthetic(o), ArgumentError);
}

TEST(DatasetSplit, ValidatesLabelsShapesAndIds) {
  const ImageShape s{4, 4, 1};
  EXPECT_THROW(DatasetSplit("x", 2, {{0, ImageTensor(s), 2, Provenance::kClean}}), ArgumentError);
  EXPECT_THROW(DatasetSplit("x", 2, {{0, ImageTensor(s), 0, Provenance::kClean},
                                     {0, ImageTensor(s), 1, Provenance::kClean}}),
               ArgumentError);
  EXPECT_THROW(DatasetSplit("x", 2, {{0, ImageTensor(s), 0, Provenance::kClean},
                                     {1, ImageTensor({4, 4, 3}), 1, Provenance::kClean}}),
               ArgumentError);
  const DatasetSplit ok("x", 2, {{5, ImageTensor(s), 0, Provenance::kClean}, {9, ImageTensor(s), 1, Provenance::kClean}});
  EXPECT_EQ(ok.position_of(9), 1u);
  EXPECT_TRUE(ok.contains(5));
  EXPECT_FALSE(ok.contains(6));
}

TEST(AllocateStratified, LargestRemainderWithLowClassTieBreak) {
  EXPECT_EQ(allocate_stratified({10, 10, 10}, 3), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(allocate_stratified({10, 10, 10}, 4), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(allocate_stratified({1, 2, 7}, 5), (std::vector<std::size_t>{1, 1, 3}));
  EXPECT_EQ(allocate_stratified({0, 5}, 3), (std::vector<std::size_t>{0, 3}));
}

TEST(Subsample, StratifiedSeededAndOrderPreserving) {
  const auto d = make_synthetic(small_options());
  const auto s = subsample(d.train, 0.25, 3);
  ASSERT_EQ(s.size(), 30u);
  const auto counts = s.class_counts();
  EXPECT_EQ(counts, allocate_stratified(d.train.class_counts(), 30));
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(d.train.position_of(s[i - 1].id), d.train.position_of(s[i].id));
  EXPECT_TRUE(subsample(d.train, 0.25, 3) == s);
  EXPECT_FALSE(subsample(d.train, 0.25, 4) == s);
}

TEST(Subsample, FractionBoundsAndMinimumSize) {
  const auto d = make_synthetic(small_options());
  EXPECT_THROW(subsample(d.train, 0.0, 1), ArgumentError);
  EXPECT_THROW(subsample(d.train, 1.5, 1), ArgumentError);
  EXPECT_THROW(subsample(d.train, 0.01, 1), ArgumentError);  // 1 example < 4 classes
  EXPECT_TRUE(subsample(d.train, 1.0, 1) == d.train);
}

TEST(SplitVerified, PartitionsTheSplit) {
  const auto d = make_synthetic(small_options());
  const auto v = split_verified(d.train, 0.1, 2);
  EXPECT_EQ(v.verified.size(), 12u);
  EXPECT_EQ(v.verified.size() + v.remainder.size(), d.train.size());
  for (const auto& ex : v.verified) EXPECT_FALSE(v.remainder.contains(ex.id));
  EXPECT_EQ(v.verified.name(), "verified");
  EXPECT_THROW(split_verified(d.train, 1.0, 2), ArgumentError);
}

TEST(Cifar, MissingRootIsLoadError) {
  EXPECT_THROW(load_cifar10("/nonexistent/cifar"), LoadError);
}

TEST(Cifar, ReadsBatchesAndRejectsBadLabels) {
  const auto dir = temp_dir("ok");
  for (int b = 1; b <= 5; ++b) write_cifar_batch(dir / ("data_batch_" + std::to_string(b) + ".bin"), 2, 3);
  write_cifar_batch(dir / "test_batch.bin", 3, 7);
  const auto d = load_cifar10(dir);
  EXPECT_EQ(d.train.size(), 10u);
  EXPECT_EQ(d.test.size(), 3u);
  EXPECT_EQ(d.test[0].label, 7);
  EXPECT_EQ(d.train.image_shape(), (ImageShape{32, 32, 3}));
  EXPECT_FLOAT_EQ(d.train[0].image.at(0, 1, 0), 1.0f / 255.0f);
  EXPECT_FLOAT_EQ(d.train[0].image.at(0, 0, 1), static_cast<float>(1024 % 256) / 255.0f);

  write_cifar_batch(dir / "data_batch_3.bin", 2, 12);
  try {
    load_cifar10(dir);
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_EQ(e.record_index(), 4u);
  }
}

TEST(Cifar, TruncatedRecordIsIntegrityError) {
  const auto dir = temp_dir("trunc");
  for (int b = 1; b <= 5; ++b) write_cifar_batch(dir / ("data_batch_" + std::to_string(b) + ".bin"), 1, 0);
  write_cifar_batch(dir / "test_batch.bin", 2, 0, 100);
  EXPECT_THROW(load_cifar10(dir), IntegrityError);
}

TEST(LoadDataset, EnvironmentRootFallback) {
  const auto dir = temp_dir("env");
  for (int b = 1; b <= 5; ++b) write_cifar_batch(dir / ("data_batch_" + std::to_string(b) + ".bin"), 1, 1);
  write_cifar_batch(dir / "test_batch.bin", 1, 1);
  ::setenv(kDataRootEnv, dir.c_str(), 1);
  EXPECT_EQ(load_dataset("cifar10", "", {}).train.size(), 5u);
  ::unsetenv(kDataRootEnv);
  EXPECT_THROW(load_dataset("cifar10", "", {}), LoadError);
  EXPECT_THROW(load_dataset("imagenet", "", {}), ArgumentError);
}

TEST(TrueLabel, PrefersManifestRecord) {
  const auto s = testkit::random_split(4, 2, {4, 4, 1}, 1);
  PoisonManifest m;
  m.poisoned_ids = {101};
  m.original_labels[101] = 0;
  EXPECT_EQ(true_label(s, &m, 101), 0);
  EXPECT_EQ(true_label(s, nullptr, 101), 1);
  EXPECT_EQ(true_label(s, &m, 102), 0);
}
