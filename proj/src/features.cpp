#include "nab/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

std::string to_string(FeatureRecipe recipe) {
  return recipe == FeatureRecipe::kContrastive ? "contrastive" : "verified-supervised";
}

FeatureRecipe parse_feature_recipe(const std::string& name) {
  if (name == "contrastive") return FeatureRecipe::kContrastive;
  if (name == "verified-supervised") return FeatureRecipe::kVerifiedSupervised;
  throw ArgumentError("unknown feature recipe '" + name + "'");
}

Eigen::MatrixXd NetworkFeatureExtractor::extract(std::span<const ImageTensor> images) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), dim());
  for (std::size_t start = 0; start < images.size(); start += nn::kInferenceBatch) {
    const auto count = std::min(nn::kInferenceBatch, images.size() - start);
    const nn::Tensor f = network_.features(nn::to_batch(images.subspan(start, count)));
    for (int i = 0; i < f.n; ++i)
      for (int j = 0; j < dim(); ++j)
        out(static_cast<Eigen::Index>(start) + i, j) = f.data[static_cast<std::size_t>(i) * dim() + j];
  }
  return out;
}

FeatureMatrix extract_features(const FeatureExtractor& extractor, const DatasetSplit& split) {
  FeatureMatrix fm;
  if (split.empty()) return fm;
  if (extractor.input_shape() != split.image_shape()) {
    throw ArgumentError("feature extractor expects a different image shape than the split provides");
  }
  std::vector<ImageTensor> images;
  images.reserve(split.size());
  for (const auto& ex : split) {
    fm.ids.push_back(ex.id);
    fm.labels.push_back(ex.label);
    images.push_back(ex.image);
  }
  fm.values = extractor.extract(images);
  return fm;
}

namespace {

ImageTensor contrastive_view(const ImageTensor& image, Rng& rng) {
  AugmentConfig geo;
  geo.crop_padding = std::max(2, image.height() / 8);
  geo.cutout_size = std::max(2, image.height() / 8);
  ImageTensor v = augment(image, geo, rng);
  const float scale = static_cast<float>(rng.uniform(0.6, 1.4));
  const float shift = static_cast<float>(rng.uniform(-0.2, 0.2));
  float mean = 0.0f;
  for (float x : v.values()) mean += x;
  mean /= static_cast<float>(v.values().size());
  for (auto& x : v.values()) x = (x - mean) * scale + mean + shift;
  v.clamp01();
  return v;
}

nn::Network train_contrastive(const DatasetSplit& data, int epochs, std::uint64_t seed, const TrainConfig& base) {
  constexpr double kTemperature = 0.5;
  constexpr int kProjection = 64;
  nn::Network net = make_network(base, data.image_shape(), data.class_count(), derive_seed(seed, 1));
  Rng init(derive_seed(seed, 2));
  nn::Linear projection(net.feature_dim(), kProjection, init);
  auto params = net.parameters();
  projection.collect_parameters(params);

  TrainConfig schedule = base;
  schedule.epochs = epochs;
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(std::max(2, base.batch_size));
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = scheduled_learning_rate(schedule, epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(seed, 3, static_cast<std::uint64_t>(epoch)));
    shuffle.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start + 1 < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      const int b = static_cast<int>(end - start);
      std::vector<ImageTensor> views;
      views.reserve(2 * static_cast<std::size_t>(b));
      for (int v = 0; v < 2; ++v)
        for (std::size_t j = start; j < end; ++j) {
          Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch) * 2 + v, data[order[j]].id));
          views.push_back(contrastive_view(data[order[j]].image, rng));
        }
      const nn::Tensor h = net.forward_features(nn::to_batch(views), nn::Mode::kTrain);
      const nn::Tensor z = projection.forward(h, nn::Mode::kTrain);
      const int m = z.n;
      Eigen::MatrixXd zm(m, kProjection);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < kProjection; ++j) zm(i, j) = z.data[static_cast<std::size_t>(i) * kProjection + j];
      const Eigen::VectorXd norms = zm.rowwise().norm().cwiseMax(1e-8);
      const Eigen::MatrixXd u = norms.cwiseInverse().asDiagonal() * zm;
      Eigen::MatrixXd s = u * u.transpose() / kTemperature;
      // A = softmax over j != i minus the positive indicator
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
      double loss = 0.0;
      for (int i = 0; i < m; ++i) {
        const int pos = i < b ? i + b : i - b;
        double mx = -1e300;
        for (int j = 0; j < m; ++j)
          if (j != i) mx = std::max(mx, s(i, j));
        double sum = 0.0;
        for (int j = 0; j < m; ++j)
          if (j != i) sum += std::exp(s(i, j) - mx);
        for (int j = 0; j < m; ++j)
          if (j != i) a(i, j) = std::exp(s(i, j) - mx) / sum;
        loss += -s(i, pos) + mx + std::log(sum);
        a(i, pos) -= 1.0;
      }
      if (!std::isfinite(loss)) throw TrainingDivergedError(epoch);
      const Eigen::MatrixXd gu = (a + a.transpose()) * u / (kTemperature * m);
      nn::Tensor gz(m, kProjection, 1, 1);
      for (int i = 0; i < m; ++i) {
        const double dot = u.row(i).dot(gu.row(i));
        for (int j = 0; j < kProjection; ++j) {
          gz.data[static_cast<std::size_t>(i) * kProjection + j] =
              static_cast<float>((gu(i, j) - u(i, j) * dot) / norms(i));
        }
      }
      net.backward_features(projection.backward(gz));
      sgd_step(params, lr, base.momentum, base.weight_decay);
    }
  }
  net.set_trained(true);
  return net;
}

}  // namespace

std::unique_ptr<FeatureExtractor> train_feature_extractor(const DatasetSplit& data, FeatureRecipe recipe, int epochs,
                                                          std::uint64_t seed, const TrainConfig& base) {
  if (data.empty()) throw ArgumentError("feature extractor needs non-empty data");
  if (epochs < 1) throw ArgumentError("feature extractor needs at least one epoch");
  if (recipe == FeatureRecipe::kContrastive) {
    return std::make_unique<NetworkFeatureExtractor>(train_contrastive(data, epochs, seed, base), recipe);
  }
  TrainConfig cfg = base;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return std::make_unique<NetworkFeatureExtractor>(train(data, cfg).model, recipe);
}

}  // namespace nab
