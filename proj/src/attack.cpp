#include "nab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

std::string to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::kPatch: return "patch";
    case TriggerKind::kBlend: return "blend";
    case TriggerKind::kWarp: return "warp";
    case TriggerKind::kCleanLabel: return "clean-label";
  }
  return "unknown";
}

TriggerKind parse_trigger_kind(const std::string& name) {
  if (name == "patch" || name == "badnets") return TriggerKind::kPatch;
  if (name == "blend") return TriggerKind::kBlend;
  if (name == "warp" || name == "wanet") return TriggerKind::kWarp;
  if (name == "clean-label" || name == "cl") return TriggerKind::kCleanLabel;
  throw ArgumentError("unknown trigger kind '" + name + "'");
}

int TargetMap::apply(int label, int class_count) const {
  if (mode == TargetMode::kAllToOne) return target_class;
  return (label + 1) % class_count;
}

std::string TargetMap::name() const {
  if (mode == TargetMode::kAllToOne) return "all-to-one:" + std::to_string(target_class);
  return "all-to-all:+1";
}

namespace {

void apply_patch(ImageTensor& img, int size) {
  if (size > img.height() || size > img.width()) throw ArgumentError("patch larger than image");
  const int r0 = img.height() - size, c0 = img.width() - size;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const float v = ((r + c) % 2 == 0) ? 1.0f : 0.0f;
      for (int ch = 0; ch < img.channels(); ++ch) img.at(r0 + r, c0 + c, ch) = v;
    }
}

double bilinear(const ImageTensor& img, double y, double x, int ch) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch)) +
         fy * ((1 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch));
}

// Displacement field in pixels, (dy, dx) interleaved per pixel.
std::vector<double> warp_field(const WarpParams& p, std::uint64_t seed, int height, int width) {
  if (p.grid < 2) throw ArgumentError("warp grid size must be at least 2");
  const int k = p.grid;
  Rng rng(derive_seed(seed, 0x77617270ULL));
  std::vector<double> ctrl(static_cast<std::size_t>(k) * k * 2);
  double mean_abs = 0.0;
  for (auto& v : ctrl) {
    v = rng.uniform(-1.0, 1.0);
    mean_abs += std::abs(v);
  }
  mean_abs /= static_cast<double>(ctrl.size());
  for (auto& v : ctrl) v = std::clamp(v / mean_abs, -1.0, 1.0) * p.strength;

  std::vector<double> field(static_cast<std::size_t>(height) * width * 2);
  for (int r = 0; r < height; ++r) {
    // align-corners upsampling of the control grid
    const double gy = height > 1 ? static_cast<double>(r) * (k - 1) / (height - 1) : 0.0;
    const int y0 = std::min(static_cast<int>(gy), k - 2);
    const double fy = gy - y0;
    for (int c = 0; c < width; ++c) {
      const double gx = width > 1 ? static_cast<double>(c) * (k - 1) / (width - 1) : 0.0;
      const int x0 = std::min(static_cast<int>(gx), k - 2);
      const double fx = gx - x0;
      for (int d = 0; d < 2; ++d) {
        auto at = [&](int yy, int xx) { return ctrl[(static_cast<std::size_t>(yy) * k + xx) * 2 + d]; };
        field[(static_cast<std::size_t>(r) * width + c) * 2 + d] =
            (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
            fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
      }
    }
  }
  return field;
}

ImageTensor apply_warp(const ImageTensor& img, const WarpParams& p, std::uint64_t trigger_seed,
                       std::uint64_t sample_seed, bool noise) {
  auto field = warp_field(p, trigger_seed, img.height(), img.width());
  if (noise) {
    Rng rng(derive_seed(sample_seed, 0x6e6f697365ULL));
    for (auto& v : field) v += rng.uniform(-0.5, 0.5);
  }
  ImageTensor out(img.shape());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const std::size_t f = (static_cast<std::size_t>(r) * img.width() + c) * 2;
      for (int ch = 0; ch < img.channels(); ++ch) {
        out.at(r, c, ch) = static_cast<float>(bilinear(img, r + field[f], c + field[f + 1], ch));
      }
    }
  out.clamp01();
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& src, const ImageShape& shape) {
  ImageTensor out(shape);
  for (int r = 0; r < shape.height; ++r)
    for (int c = 0; c < shape.width; ++c) {
      const double y = (r + 0.5) * src.height() / shape.height - 0.5;
      const double x = (c + 0.5) * src.width() / shape.width - 0.5;
      for (int ch = 0; ch < shape.channels; ++ch) {
        out.at(r, c, ch) = static_cast<float>(bilinear(src, y, x, ch % src.channels()));
      }
    }
  return out;
}

}  // namespace

ImageTensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open pattern image " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw FormatError(path.string() + ": only binary PGM/PPM supported");
  auto next_int = [&]() {
    int v = 0;
    while (in >> std::ws && in.peek() == '#') in.ignore(1 << 20, '\n');
    in >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  in.get();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError(path.string() + ": bad header");
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw FormatError(path.string() + ": truncated pixel data");
  std::vector<float> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) values[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
  return ImageTensor({h, w, channels}, std::move(values));
}

ImageTensor blend_pattern(const BlendParams& params, const ImageShape& shape) {
  if (!params.pattern_path.empty()) {
    const ImageTensor src = read_pnm(params.pattern_path);
    if (src.shape() == shape) return src;
    return resize_bilinear(src, shape);
  }
  ImageTensor pattern(shape);
  Rng rng(params.pattern_seed);
  for (auto& v : pattern.values()) v = static_cast<float>(rng.uniform());
  return pattern;
}

ImageTensor apply_trigger(const ImageTensor& image, const TriggerSpec& trigger, std::uint64_t per_sample_seed,
                          TriggerMode mode) {
  switch (trigger.kind) {
    case TriggerKind::kPatch:
    case TriggerKind::kCleanLabel: {
      ImageTensor out = image;
      apply_patch(out, trigger.patch.size);
      return out;
    }
    case TriggerKind::kBlend: {
      const double a = trigger.blend.alpha;
      if (!(a > 0.0 && a < 1.0)) throw ArgumentError("blend alpha must be in (0, 1)");
      const ImageTensor pattern = blend_pattern(trigger.blend, image.shape());
      ImageTensor out(image.shape());
      auto src = image.values();
      auto pat = pattern.values();
      auto dst = out.values();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<float>((1.0 - a) * src[i] + a * pat[i]);
      }
      out.clamp01();
      return out;
    }
    case TriggerKind::kWarp:
      return apply_warp(image, trigger.warp, trigger.seed, per_sample_seed, mode == TriggerMode::kNoise);
  }
  throw ArgumentError("unhandled trigger kind");
}

ImageTensor craft_clean_label(DifferentiableClassifier& surrogate, const ImageTensor& image, int label,
                              double epsilon, int steps, double step_size) {
  if (!surrogate.is_trained()) throw StateError("clean-label crafting needs a trained surrogate");
  if (epsilon < 0.0 || steps < 1 || step_size < 0.0) throw ArgumentError("invalid PGD parameters");
  if (epsilon == 0.0) return image;
  ImageTensor x = image;
  ImageTensor grad;
  auto orig = image.values();
  for (int s = 0; s < steps; ++s) {
    surrogate.loss_and_input_gradient(x, label, grad);
    auto xv = x.values();
    auto gv = grad.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double sign = gv[i] > 0.0f ? 1.0 : (gv[i] < 0.0f ? -1.0 : 0.0);
      double v = xv[i] + step_size * sign;
      v = std::clamp(v, static_cast<double>(orig[i]) - epsilon, static_cast<double>(orig[i]) + epsilon);
      xv[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  // float rounding can leave |x - orig| a hair above epsilon; pull such entries back in
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    while (static_cast<double>(xv[i]) - orig[i] > epsilon) xv[i] = std::nextafter(xv[i], -1.0f);
    while (static_cast<double>(orig[i]) - xv[i] > epsilon) xv[i] = std::nextafter(xv[i], 2.0f);
  }
  return x;
}

PoisonResult poison_dataset(const DatasetSplit& clean, const TriggerSpec& trigger, const TargetMap& target_map,
                            double lambda, std::uint64_t seed, DifferentiableClassifier* surrogate) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ArgumentError("poisoning rate must be in [0, 1)");
  const int k = clean.class_count();
  if (target_map.mode == TargetMode::kAllToOne && (target_map.target_class < 0 || target_map.target_class >= k)) {
    throw ArgumentError("target class outside label range");
  }
  if (target_map.mode == TargetMode::kAllToAll && k < 2) throw ArgumentError("all-to-all needs at least 2 classes");

  const bool clean_label = trigger.kind == TriggerKind::kCleanLabel;
  std::vector<ExampleId> candidates;
  if (clean_label) {
    if (surrogate == nullptr) throw ArgumentError("clean-label poisoning needs a surrogate classifier");
    if (target_map.mode != TargetMode::kAllToOne) throw ArgumentError("clean-label poisoning is all-to-one only");
    for (const auto& ex : clean) {
      if (ex.label == target_map.target_class) candidates.push_back(ex.id);
    }
  } else {
    candidates = clean.ids();
  }
  const auto selected = select_by_hash(candidates, round_count(lambda, candidates.size()), seed);

  PoisonManifest manifest;
  manifest.poisoned_ids = selected;
  manifest.trigger_name = trigger.name();
  manifest.target_map_name = target_map.name();
  manifest.lambda = lambda;
  manifest.seed = seed;

  std::vector<LabeledExample> out;
  out.reserve(clean.size());
  for (const auto& ex : clean) {
    const std::uint64_t sample_seed = derive_seed(seed, ex.id);
    if (std::binary_search(selected.begin(), selected.end(), ex.id)) {
      LabeledExample p = ex;
      manifest.original_labels[ex.id] = ex.label;
      if (clean_label) {
        const auto& cl = trigger.clean_label;
        p.image = apply_trigger(craft_clean_label(*surrogate, ex.image, ex.label, cl.epsilon, cl.steps,
                                                  cl.effective_step_size()),
                                trigger, sample_seed);
      } else {
        p.image = apply_trigger(ex.image, trigger, sample_seed);
        p.label = target_map.apply(ex.label, k);
      }
      p.provenance = Provenance::kAttackerPoisoned;
      out.push_back(std::move(p));
    } else if (trigger.kind == TriggerKind::kWarp && trigger.warp.noise_rate > 0.0 &&
               Rng(derive_seed(sample_seed, 0x63726f7373ULL)).bernoulli(trigger.warp.noise_rate)) {
      LabeledExample p = ex;
      p.image = apply_trigger(ex.image, trigger, sample_seed, TriggerMode::kNoise);
      manifest.noise_ids.push_back(ex.id);
      out.push_back(std::move(p));
    } else {
      out.push_back(ex);
    }
  }
  std::sort(manifest.noise_ids.begin(), manifest.noise_ids.end());
  return {DatasetSplit(clean.name(), k, std::move(out)), std::move(manifest)};
}

}  // namespace nab
