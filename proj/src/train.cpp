#include "nab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

TrainConfig TrainConfig::full_scale(const std::string& architecture) {
  TrainConfig c;
  c.architecture = architecture;
  c.epochs = 100;
  if (architecture == "resnet-50") {
    c.learning_rate = 0.3;
    c.weight_decay = 5e-4;
  }
  return c;
}

void TrainConfig::validate() const {
  nn::parse_architecture(architecture);
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw ArgumentError("learning rate must be positive, momentum in [0, 1), weight decay non-negative");
  }
  if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
  if (schedule != "cosine" && schedule != "constant") throw ArgumentError("unknown schedule '" + schedule + "'");
  if (augment.crop_padding < 0 || augment.cutout_size < 0 || augment.flip_probability < 0.0 ||
      augment.flip_probability > 1.0) {
    throw ArgumentError("invalid augmentation parameters");
  }
  if (augment.padding_mode != "reflect" && augment.padding_mode != "zero") {
    throw ArgumentError("unknown padding mode '" + augment.padding_mode + "'");
  }
}

std::vector<double> LossTrace::of(ExampleId id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ArgumentError("id " + std::to_string(id) + " not in loss trace");
  const auto col = static_cast<std::size_t>(it - ids.begin());
  std::vector<double> out;
  for (const auto& e : epochs) out.push_back(e[col]);
  return out;
}

const std::vector<double>& LossTrace::final_losses() const {
  if (epochs.empty()) throw StateError("empty loss trace");
  return epochs.back();
}

nn::Network make_network(const TrainConfig& config, const ImageShape& shape, int classes, std::uint64_t seed) {
  return nn::Network(nn::parse_architecture(config.architecture), shape, classes, seed, config.width);
}

namespace {

// Mirror about the border pixel (the border itself is not repeated).
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng) {
  if (!config.enabled) return image;
  const int h = image.height(), w = image.width(), c = image.channels();
  const int pad = config.crop_padding;
  const int dy = pad > 0 ? static_cast<int>(rng.uniform_index(2 * pad + 1)) - pad : 0;
  const int dx = pad > 0 ? static_cast<int>(rng.uniform_index(2 * pad + 1)) - pad : 0;
  const bool flip = rng.bernoulli(config.flip_probability);
  const bool reflect = config.padding_mode == "reflect";
  ImageTensor out({h, w, c});
  for (int r = 0; r < h; ++r) {
    int sr = r + dy;
    if (reflect) sr = reflect_index(sr, h);
    if (sr < 0 || sr >= h) continue;
    for (int col = 0; col < w; ++col) {
      const int cc = flip ? w - 1 - col : col;
      int sc = cc + dx;
      if (reflect) sc = reflect_index(sc, w);
      if (sc < 0 || sc >= w) continue;
      for (int ch = 0; ch < c; ++ch) out.at(r, col, ch) = image.at(sr, sc, ch);
    }
  }
  if (config.cutout_size > 0) {
    const int s = std::min({config.cutout_size, h, w});
    const int r0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(h - s + 1)));
    const int c0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(w - s + 1)));
    for (int r = r0; r < r0 + s; ++r)
      for (int col = c0; col < c0 + s; ++col)
        for (int ch = 0; ch < c; ++ch) out.at(r, col, ch) = 0.0f;
  }
  return out;
}

ImageTensor training_view(const LabeledExample& ex, const TrainConfig& config, const TrainOptions& options, int epoch) {
  if (!config.augment.enabled) return ex.image;
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), ex.id));
  ImageTensor out = augment(ex.image, config.augment, rng);
  if (options.restamp && ex.provenance == Provenance::kDefenderStamped) out = apply_stamp(out, *options.restamp);
  return out;
}

double scheduled_learning_rate(const TrainConfig& config, int epoch) {
  if (config.schedule == "constant") return config.learning_rate;
  return 0.5 * config.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / config.epochs));
}

void sgd_step(std::span<nn::Parameter* const> params, double lr, double momentum, double weight_decay) {
  const auto flr = static_cast<float>(lr), fm = static_cast<float>(momentum), fwd = static_cast<float>(weight_decay);
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float g = p->grad[i] + fwd * p->value[i];
      p->velocity[i] = fm * p->velocity[i] + g;
      p->value[i] -= flr * p->velocity[i];
      p->grad[i] = 0.0f;
    }
  }
}

TrainResult train(const DatasetSplit& data, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw ArgumentError("cannot train on an empty split");
  const int k = data.class_count();
  TrainResult result{make_network(config, data.image_shape(), k, derive_seed(config.seed, 0x696e6974ULL)), {}, {}};
  nn::Network& model = result.model;
  const auto params = model.parameters();
  result.trace.ids = data.ids();
  const std::size_t n = data.size();

  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = scheduled_learning_rate(config, epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    std::vector<double> losses(n, 0.0);
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < n; start += bs) {
      std::size_t end = std::min(n, start + bs);
      // Batch norm needs two samples per batch; a trailing single example joins this batch.
      if (n - end == 1) end = n;
      const int b = static_cast<int>(end - start);
      std::vector<ImageTensor> images;
      std::vector<int> labels;
      images.reserve(static_cast<std::size_t>(b));
      for (std::size_t j = start; j < end; ++j) {
        const auto& ex = data[order[j]];
        images.push_back(training_view(ex, config, options, epoch));
        labels.push_back(ex.label);
      }
      const nn::Tensor logits = model.forward(nn::to_batch(images), nn::Mode::kTrain);
      std::vector<double> probs;
      const auto ce = nn::cross_entropy(logits, labels, &probs);
      nn::Tensor grad(b, k, 1, 1);
      double weight = 1.0;
      if (options.shaping.lga_gamma) {
        const double d = std::accumulate(ce.begin(), ce.end(), 0.0) / b - *options.shaping.lga_gamma;
        weight = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      }
      for (int i = 0; i < b; ++i) {
        if (!std::isfinite(ce[i])) throw TrainingDivergedError(epoch);
        losses[order[start + i]] = ce[i];
        for (int j = 0; j < k; ++j) {
          const double g = probs[static_cast<std::size_t>(i) * k + j] - (j == labels[i] ? 1.0 : 0.0);
          grad.data[static_cast<std::size_t>(i) * k + j] = static_cast<float>(weight * g / b);
        }
      }
      model.backward(grad);
      sgd_step(params, lr, config.momentum, config.weight_decay);
      if (end == n) break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    std::map<std::string, std::pair<double, std::size_t>> groups;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += losses[i];
      auto& g = groups[to_string(data[i].provenance)];
      g.first += losses[i];
      ++g.second;
    }
    rec.mean_loss = total / static_cast<double>(n);
    for (const auto& [name, acc] : groups) rec.group_loss[name] = acc.first / static_cast<double>(acc.second);
    if (!std::isfinite(rec.mean_loss)) throw TrainingDivergedError(epoch);
    model.set_trained(true);
    for (const auto& hook : options.hooks) hook(epoch, model, rec);
    result.trace.epochs.push_back(std::move(losses));
    result.epochs.push_back(std::move(rec));
  }
  model.set_trained(true);
  return result;
}

EpochHook make_probe_hook(const DatasetSplit& probe, const TriggerSpec& trigger, const TargetMap& target_map,
                          std::optional<StampSpec> stamp) {
  return [&probe, trigger, target_map, stamp](int, const nn::Network& model, EpochRecord& rec) {
    const auto m = compute_core_metrics(model, probe, trigger, target_map, stamp);
    rec.asr = m.asr;
    rec.ca = m.ca;
  };
}

}  // namespace nab
