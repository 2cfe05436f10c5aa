#include "nab/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::kClean: return "clean";
    case Provenance::kAttackerPoisoned: return "poisoned";
    case Provenance::kDefenderStamped: return "stamped";
  }
  return "unknown";
}

DatasetSplit::DatasetSplit(std::string name, int class_count, std::vector<LabeledExample> examples)
    : name_(std::move(name)), class_count_(class_count), examples_(std::move(examples)) {
  if (class_count_ <= 0) throw ArgumentError("class_count must be positive");
  index_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (ex.label < 0 || ex.label >= class_count_) {
      throw ArgumentError("example " + std::to_string(ex.id) + " has label " +
                          std::to_string(ex.label) + " outside [0, " + std::to_string(class_count_) + ")");
    }
    if (ex.image.shape() != examples_.front().image.shape()) {
      throw ArgumentError("example " + std::to_string(ex.id) + " has a different image shape");
    }
    if (!index_.emplace(ex.id, i).second) {
      throw ArgumentError("duplicate example id " + std::to_string(ex.id));
    }
  }
}

const ImageShape& DatasetSplit::image_shape() const {
  if (examples_.empty()) throw ArgumentError("image_shape of an empty split");
  return examples_.front().image.shape();
}

std::size_t DatasetSplit::position_of(ExampleId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ArgumentError("id " + std::to_string(id) + " not in split " + name_);
  return it->second;
}

std::vector<ExampleId> DatasetSplit::ids() const {
  std::vector<ExampleId> out;
  out.reserve(examples_.size());
  for (const auto& ex : examples_) out.push_back(ex.id);
  return out;
}

std::vector<std::size_t> DatasetSplit::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(class_count_), 0);
  for (const auto& ex : examples_) ++counts[static_cast<std::size_t>(ex.label)];
  return counts;
}

bool PoisonManifest::contains(ExampleId id) const {
  return std::binary_search(poisoned_ids.begin(), poisoned_ids.end(), id);
}

int true_label(const DatasetSplit& split, const PoisonManifest* manifest, ExampleId id) {
  if (manifest != nullptr) {
    auto it = manifest->original_labels.find(id);
    if (it != manifest->original_labels.end()) return it->second;
  }
  return split.by_id(id).label;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

namespace {

// Signed membership test in shape-local coordinates (u, v in roughly [-1, 1]).
bool inside_shape(int family, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  switch (family % 10) {
    case 0: return u * u + v * v <= 1.0;                                   // disk
    case 1: return au <= 0.8 && av <= 0.8;                                 // square
    case 2: return v <= 0.8 && v >= -0.9 && au <= (v + 0.9) * 0.55;        // triangle
    case 3: return (au <= 0.28 && av <= 1.0) || (av <= 0.28 && au <= 1.0);  // plus
    case 4: {                                                              // ring
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.36;
    }
    case 5: return au + av <= 1.0;                                         // diamond
    case 6: return au <= 1.0 && (std::abs(v - 0.5) <= 0.22 || std::abs(v + 0.5) <= 0.22);  // two bars
    case 7: return std::abs(au - av) <= 0.3 && au <= 1.0;                  // x
    case 8: return (u >= -0.9 && u <= -0.4 && av <= 0.9) || (v >= 0.4 && v <= 0.9 && au <= 0.9);  // L
    default: return std::abs(u) <= 0.25 && av <= 1.0;                      // vertical bar
  }
}

float color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  float d = 0.0f;
  for (int i = 0; i < 3; ++i) d += std::abs(a[i] - b[i]);
  return d;
}

ImageTensor render_shape(int family, std::uint64_t seed, const SyntheticOptions& o) {
  Rng rng(seed);
  ImageTensor img({o.height, o.width, o.channels});
  std::array<float, 3> bg{}, fg{};
  for (auto& c : bg) c = static_cast<float>(rng.uniform(0.15, 0.85));
  do {
    for (auto& c : fg) c = static_cast<float>(rng.uniform(0.05, 0.95));
  } while (color_distance(fg, bg) < 0.6f);

  const double side = std::min(o.height, o.width);
  const double radius = side * rng.uniform(0.2, 0.32);
  const double cy = rng.uniform(0.35, 0.65) * o.height;
  const double cx = rng.uniform(0.35, 0.65) * o.width;
  const double angle = rng.uniform(-0.3, 0.3);
  const double gy = rng.uniform(-0.1, 0.1), gx = rng.uniform(-0.1, 0.1);
  const double cs = std::cos(angle), sn = std::sin(angle);

  for (int r = 0; r < o.height; ++r) {
    for (int c = 0; c < o.width; ++c) {
      const double dy = (r + 0.5 - cy) / radius;
      const double dx = (c + 0.5 - cx) / radius;
      const double u = cs * dx + sn * dy;
      const double v = -sn * dx + cs * dy;
      const bool in = inside_shape(family, u, v);
      const double shade = gy * (r / double(o.height) - 0.5) + gx * (c / double(o.width) - 0.5);
      for (int ch = 0; ch < o.channels; ++ch) {
        const float base = in ? fg[ch % 3] : bg[ch % 3];
        const double val = base + shade + 0.04 * rng.normal();
        img.at(r, c, ch) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return img;
}

DatasetSplit make_synthetic_split(const std::string& name, std::size_t n, std::uint64_t tag,
                                  const SyntheticOptions& o) {
  std::vector<LabeledExample> examples;
  examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = derive_seed(o.seed, tag, i);
    // Balanced labels, shuffled deterministically by the per-example seed.
    const int label = static_cast<int>(i % static_cast<std::size_t>(o.class_count));
    examples.push_back({static_cast<ExampleId>(i), render_shape(label, s, o), label, Provenance::kClean});
  }
  // Interleave classes in a seed-dependent order while keeping ids = stored position.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(o.seed, tag, 0xffffffffULL));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<LabeledExample> shuffled;
  shuffled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto ex = std::move(examples[order[i]]);
    ex.id = i;
    shuffled.push_back(std::move(ex));
  }
  return DatasetSplit(name, o.class_count, std::move(shuffled));
}

std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot open " + p.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void append_cifar_file(const std::filesystem::path& p, std::vector<LabeledExample>& out,
                       std::size_t& record_index) {
  constexpr std::size_t kRecord = 1 + 32 * 32 * 3;
  if (!std::filesystem::exists(p)) throw LoadError("missing dataset file " + p.string());
  const auto bytes = read_file(p);
  const std::size_t full = bytes.size() / kRecord;
  for (std::size_t r = 0; r < full; ++r, ++record_index) {
    const unsigned char* rec = bytes.data() + r * kRecord;
    if (rec[0] > 9) throw IntegrityError(record_index, "label byte " + std::to_string(rec[0]) + " > 9");
    ImageTensor img({32, 32, 3});
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          img.at(y, x, ch) = static_cast<float>(rec[1 + ch * 1024 + y * 32 + x]) / 255.0f;
    out.push_back({static_cast<ExampleId>(out.size()), std::move(img), rec[0], Provenance::kClean});
  }
  if (bytes.size() % kRecord != 0) {
    throw IntegrityError(record_index, "truncated record in " + p.string());
  }
}

}  // namespace

TrainTestSplits make_synthetic(const SyntheticOptions& o) {
  if (o.class_count < 2 || o.class_count > 10) throw ArgumentError("synthetic class_count must be in [2, 10]");
  if (o.height < 8 || o.width < 8 || (o.channels != 1 && o.channels != 3)) {
    throw ArgumentError("synthetic images need height, width >= 8 and 1 or 3 channels");
  }
  return {make_synthetic_split("train", o.train_size, 1, o), make_synthetic_split("test", o.test_size, 2, o)};
}

TrainTestSplits load_cifar10(const std::filesystem::path& root) {
  std::filesystem::path dir = root;
  if (std::filesystem::exists(root / "cifar-10-batches-bin")) dir = root / "cifar-10-batches-bin";
  if (!std::filesystem::is_directory(dir)) throw LoadError("dataset root does not exist: " + root.string());

  std::vector<LabeledExample> train, test;
  std::size_t record = 0;
  for (int b = 1; b <= 5; ++b) {
    append_cifar_file(dir / ("data_batch_" + std::to_string(b) + ".bin"), train, record);
  }
  record = 0;
  append_cifar_file(dir / "test_batch.bin", test, record);
  return {DatasetSplit("train", 10, std::move(train)), DatasetSplit("test", 10, std::move(test))};
}

TrainTestSplits load_dataset(const std::string& name, const std::filesystem::path& root,
                             const SyntheticOptions& synthetic) {
  if (name == "synthetic") return make_synthetic(synthetic);
  if (name == "cifar10") {
    std::filesystem::path r = root;
    if (r.empty()) {
      if (const char* env = std::getenv(kDataRootEnv)) r = env;
    }
    if (r.empty()) throw LoadError(std::string("no dataset root given and ") + kDataRootEnv + " is unset");
    return load_cifar10(r);
  }
  throw ArgumentError("unknown dataset '" + name + "' (expected synthetic or cifar10)");
}

std::vector<std::size_t> allocate_stratified(const std::vector<std::size_t>& counts, std::size_t total) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<std::size_t> alloc(counts.size(), 0);
  if (n == 0) return alloc;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    // Exact integer arithmetic for the floor; fractional part only orders the leftovers.
    const std::size_t num = counts[k] * total;
    alloc[k] = num / n;
    assigned += alloc[k];
    remainders.emplace_back(-static_cast<double>(num % n) / static_cast<double>(n), k);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    const auto k = remainders[i].second;
    if (alloc[k] < counts[k]) {
      ++alloc[k];
      ++assigned;
    }
  }
  return alloc;
}

namespace {

// Stratified selection of round(fraction * N) ids; returns a membership mask by position.
std::vector<bool> stratified_mask(const DatasetSplit& split, double fraction, std::uint64_t seed) {
  const std::size_t total = round_count(fraction, split.size());
  const auto counts = split.class_counts();
  const auto alloc = allocate_stratified(counts, total);
  std::vector<std::vector<ExampleId>> per_class(counts.size());
  for (const auto& ex : split) per_class[static_cast<std::size_t>(ex.label)].push_back(ex.id);
  std::vector<bool> mask(split.size(), false);
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    for (auto id : select_by_hash(per_class[k], alloc[k], derive_seed(seed, k))) {
      mask[split.position_of(id)] = true;
    }
  }
  return mask;
}

DatasetSplit filter_split(const DatasetSplit& split, const std::vector<bool>& mask, bool keep,
                          const std::string& name) {
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (mask[i] == keep) out.push_back(split[i]);
  }
  return DatasetSplit(name, split.class_count(), std::move(out));
}

}  // namespace

DatasetSplit subsample(const DatasetSplit& split, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("subsample fraction must be in (0, 1]");
  const std::size_t total = round_count(fraction, split.size());
  if (total < static_cast<std::size_t>(split.class_count())) {
    throw ArgumentError("subsample would keep " + std::to_string(total) + " examples, fewer than " +
                        std::to_string(split.class_count()) + " classes");
  }
  return filter_split(split, stratified_mask(split, fraction, seed), true, split.name());
}

VerifiedSplit split_verified(const DatasetSplit& split, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("verified fraction must be in (0, 1)");
  const auto mask = stratified_mask(split, fraction, derive_seed(seed, 0x5e71f1edULL));
  return {filter_split(split, mask, true, "verified"), filter_split(split, mask, false, split.name())};
}

}  // namespace nab
