#include "nab/detection.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "nab/errors.hpp"
#include "nab/rng.hpp"

namespace nab {

bool DetectionReport::contains(ExampleId id) const {
  return std::binary_search(suspected_ids.begin(), suspected_ids.end(), id);
}

namespace {

std::size_t suspected_count(double mu, std::size_t n) {
  if (!(mu > 0.0 && mu < 1.0)) throw ArgumentError("detection rate mu must lie in (0, 1)");
  const std::size_t k = round_count(mu, n);
  if (k == 0) {
    throw ArgumentError("detection rate " + std::to_string(mu) + " selects no examples out of " + std::to_string(n));
  }
  return k;
}

std::vector<ExampleId> top_k(std::span<const ExampleId> ids, std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] < ids[b];
                    });
  std::vector<ExampleId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(ids[order[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DetectionReport report_from_scores(std::span<const ExampleId> ids, std::span<const double> scores, double mu,
                                   std::string method) {
  if (ids.size() != scores.size()) throw ArgumentError("report_from_scores: ids and scores differ in length");
  const std::size_t k = suspected_count(mu, ids.size());
  DetectionReport report;
  report.mu = mu;
  report.method = std::move(method);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ArgumentError("non-finite detection score for id " + std::to_string(ids[i]));
    if (!report.scores.emplace(ids[i], scores[i]).second) {
      throw ArgumentError("duplicate id " + std::to_string(ids[i]) + " in detection scores");
    }
  }
  report.suspected_ids = top_k(ids, scores, k);
  return report;
}

// ---- LGA ----

DetectionReport report_from_loss_trace(const LossTrace& trace, double mu) {
  const auto& last = trace.final_losses();
  std::vector<double> scores(last.size());
  std::transform(last.begin(), last.end(), scores.begin(), [](double l) { return -l; });
  return report_from_scores(trace.ids, scores, mu, "lga");
}

DetectionReport detect_lga(const DatasetSplit& dp, double mu, double gamma, int isolation_epochs,
                           const TrainConfig& train_config, LossTrace* trace) {
  suspected_count(mu, dp.size());
  if (isolation_epochs < 1) throw ArgumentError("LGA needs at least one isolation epoch");
  if (!(gamma >= 0.0)) throw ArgumentError("LGA loss floor must be non-negative");
  TrainConfig cfg = train_config;
  cfg.epochs = isolation_epochs;
  cfg.augment.enabled = false;
  TrainOptions options;
  options.shaping.lga_gamma = gamma;
  TrainResult result = train(dp, cfg, options);
  DetectionReport report = report_from_loss_trace(result.trace, mu);
  report.metadata["gamma"] = std::to_string(gamma);
  report.metadata["isolation_epochs"] = std::to_string(isolation_epochs);
  if (trace != nullptr) *trace = std::move(result.trace);
  return report;
}

// ---- LN ----

std::vector<double> sce_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, double alpha, double beta,
                             double clip) {
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    const int y = labels[static_cast<std::size_t>(i)];
    const double log_p = logits(i, y) - lse;
    // reverse CE against a one-hot whose log(0) entries are clipped: -clip * (1 - p_y)
    out[static_cast<std::size_t>(i)] = alpha * (-log_p) + beta * (-clip) * (1.0 - std::exp(log_p));
  }
  return out;
}

DetectionReport detect_ln(const FeatureMatrix& features, int class_count, double mu, const SceParams& params) {
  const auto n = features.values.rows();
  const auto d = features.values.cols();
  suspected_count(mu, static_cast<std::size_t>(n));
  if (!(params.alpha > 0.0) || params.beta < 0.0) throw ArgumentError("SCE needs alpha > 0 and beta >= 0");
  if (params.epochs < 1) throw ArgumentError("LN needs at least one epoch");
  if (class_count < 2) throw ArgumentError("LN needs at least two classes");

  const Eigen::RowVectorXd mean = features.values.colwise().mean();
  Eigen::MatrixXd z = features.values.rowwise() - mean;
  const Eigen::RowVectorXd sd = (z.array().square().colwise().sum() / static_cast<double>(n)).sqrt().max(1e-6);
  z = z.array().rowwise() / sd.array();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, class_count);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(class_count);
  Eigen::MatrixXd vw = w;
  Eigen::RowVectorXd vb = b;
  constexpr Eigen::Index kBatch = 64;
  constexpr double kMomentum = 0.9;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<Eigen::Index>(order));
    for (Eigen::Index start = 0; start < n; start += kBatch) {
      const Eigen::Index m = std::min(kBatch, n - start);
      Eigen::MatrixXd xb(m, d);
      std::vector<int> yb(static_cast<std::size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto src = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = z.row(src);
        yb[static_cast<std::size_t>(i)] = features.labels[static_cast<std::size_t>(src)];
      }
      Eigen::MatrixXd logits = (xb * w).rowwise() + b;
      Eigen::MatrixXd grad(m, class_count);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXd p = (logits.row(i).array() - mx).exp();
        p /= p.sum();
        const int y = yb[static_cast<std::size_t>(i)];
        for (int j = 0; j < class_count; ++j) {
          const double onehot = j == y ? 1.0 : 0.0;
          grad(i, j) = params.alpha * (p(j) - onehot) + params.beta * params.clip * p(y) * (onehot - p(j));
        }
      }
      grad /= static_cast<double>(m);
      vw = kMomentum * vw + xb.transpose() * grad;
      vb = kMomentum * vb + grad.colwise().sum();
      w -= params.learning_rate * vw;
      b -= params.learning_rate * vb;
    }
  }
  const Eigen::MatrixXd logits = (z * w).rowwise() + b;
  const auto scores = sce_loss(logits, features.labels, params.alpha, params.beta, params.clip);
  for (double s : scores)
    if (!std::isfinite(s)) throw TrainingDivergedError(params.epochs - 1);
  DetectionReport report = report_from_scores(features.ids, scores, mu, "ln");
  report.metadata["sce_alpha"] = std::to_string(params.alpha);
  report.metadata["sce_beta"] = std::to_string(params.beta);
  return report;
}

DetectionReport detect_ln(const DatasetSplit& dp, double mu, const FeatureExtractor& extractor,
                          const SceParams& params) {
  return detect_ln(extract_features(extractor, dp), dp.class_count(), mu, params);
}

// ---- SPECTRE ----

Eigen::VectorXd que_scores(const Eigen::MatrixXd& whitened, double alpha) {
  const auto n = whitened.rows();
  const auto k = whitened.cols();
  if (n == 0) return {};
  const Eigen::MatrixXd c = whitened.transpose() * whitened / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(k);
  if (top - 1.0 > 1e-9) weights = (alpha * (lambda.array() - 1.0) / (top - 1.0)).exp();
  const Eigen::MatrixXd u = eig.eigenvectors() * weights.asDiagonal() * eig.eigenvectors().transpose();
  return ((whitened * u).array() * whitened.array()).rowwise().sum() / weights.sum();
}

namespace {

struct ClassScores {
  Eigen::VectorXd scores;
  bool fallback = false;
};

Eigen::MatrixXd cov_of(const Eigen::MatrixXd& y, const std::vector<Eigen::Index>& rows, Eigen::RowVectorXd& mean) {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
  mean = sub.colwise().mean();
  sub.rowwise() -= mean;
  Eigen::MatrixXd cov = sub.transpose() * sub / static_cast<double>(rows.size());
  const double ridge = 1e-6 * std::max(cov.trace() / static_cast<double>(cov.rows()), 1e-12);
  cov.diagonal().array() += ridge;
  return cov;
}

ClassScores score_class(const Eigen::MatrixXd& x, const SpectreParams& params) {
  const auto n = x.rows();
  ClassScores out;
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto kept = n - static_cast<Eigen::Index>(std::floor(params.trim * static_cast<double>(n)));
  const Eigen::Index k = std::min<Eigen::Index>({params.max_dim, x.cols(), n - 1});
  // A k-dimensional robust covariance needs clearly more than 2k retained samples.
  if (k < 1 || kept <= 2 * k) {
    out.fallback = true;
    if (n == 0) return out;
    Eigen::VectorXd proj = centered * svd.matrixV().col(0);
    out.scores = proj.array().square();
    const double m = out.scores.mean();
    if (m > 0.0) out.scores /= m;
    return out;
  }
  const Eigen::MatrixXd y = centered * svd.matrixV().leftCols(k);

  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd cov = cov_of(y, rows, mean);
  for (int it = 0; it < params.robust_iterations; ++it) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd diff = (y.rowwise() - mean).transpose();
    const Eigen::VectorXd dist = llt.solve(diff).cwiseProduct(diff).colwise().sum().transpose();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return dist(a) < dist(b); });
    rows.assign(order.begin(), order.begin() + kept);
    std::sort(rows.begin(), rows.end());
    cov = cov_of(y, rows, mean);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd inv_sqrt =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(1e-12).cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  const Eigen::MatrixXd whitened = (y.rowwise() - mean) * inv_sqrt;
  out.scores = params.score(whitened);
  if (out.scores.size() != n) throw ArgumentError("SPECTRE score function returned the wrong number of scores");
  return out;
}

}  // namespace

DetectionReport detect_spectre(const FeatureMatrix& features, int class_count, double mu,
                               const SpectreParams& params) {
  const auto n = static_cast<std::size_t>(features.values.rows());
  const std::size_t k = suspected_count(mu, n);
  if (class_count < 2) throw ArgumentError("SPECTRE needs at least two classes");
  if (!params.score) throw ArgumentError("SPECTRE needs a score function");

  std::vector<double> raw(n, 0.0);
  std::vector<std::string> fallback;
  int target = -1;
  double best_mean = 0.0;
  for (int c = 0; c < class_count; ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (features.labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) continue;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = features.values.row(rows[i]);
    const ClassScores cs = score_class(x, params);
    if (cs.fallback) fallback.push_back(std::to_string(c));
    for (std::size_t i = 0; i < rows.size(); ++i) raw[static_cast<std::size_t>(rows[i])] = cs.scores(static_cast<Eigen::Index>(i));
    const double mean = cs.scores.mean();
    if (target < 0 || mean > best_mean) {
      target = c;
      best_mean = mean;
    }
  }

  // Samples outside the inferred target class rank below every in-class sample.
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double penalty = (*hi - *lo) + 1.0;
  std::vector<double> scores(n);
  std::size_t in_class = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool inside = features.labels[i] == target;
    in_class += inside ? 1 : 0;
    scores[i] = inside ? raw[i] : raw[i] - penalty;
  }
  DetectionReport report = report_from_scores(features.ids, scores, mu, "spectre");
  report.metadata["target_class"] = std::to_string(target);
  report.metadata["target_class_mean_score"] = std::to_string(best_mean);
  if (in_class < k) report.metadata["target_class_short"] = "true";
  if (!fallback.empty()) {
    std::string joined;
    for (const auto& c : fallback) joined += (joined.empty() ? "" : ",") + c;
    report.metadata["fallback_classes"] = joined;
    report.metadata["warning"] = "too few samples for robust covariance; used top singular vector scores";
  }
  return report;
}

DetectionReport detect_spectre(const DatasetSplit& dp, double mu, const FeatureExtractor& extractor,
                               const SpectreParams& params) {
  return detect_spectre(extract_features(extractor, dp), dp.class_count(), mu, params);
}

// ---- oracle ----

DetectionReport detect_oracle(const DatasetSplit& dp, const PoisonManifest& manifest, double mu, double da,
                              std::uint64_t seed) {
  const std::size_t k = suspected_count(mu, dp.size());
  if (!(da >= 0.0 && da <= 1.0)) throw ArgumentError("detection accuracy must lie in [0, 1]");
  std::vector<ExampleId> poisoned, clean;
  for (const auto& ex : dp) (manifest.contains(ex.id) ? poisoned : clean).push_back(ex.id);
  const std::size_t want_poisoned = round_count(da, k);
  const std::size_t want_clean = k - want_poisoned;
  if (want_poisoned > poisoned.size() || want_clean > clean.size()) {
    const double max_da = std::min(1.0, static_cast<double>(poisoned.size()) / static_cast<double>(k));
    const double min_da = clean.size() >= k ? 0.0 : 1.0 - static_cast<double>(clean.size()) / static_cast<double>(k);
    std::ostringstream msg;
    msg << "oracle detection infeasible: da=" << da << " needs " << want_poisoned << " poisoned and " << want_clean
        << " clean ids, have " << poisoned.size() << " and " << clean.size() << "; feasible da range [" << min_da
        << ", " << max_da << "]";
    throw ArgumentError(msg.str());
  }
  auto chosen = select_by_hash(poisoned, want_poisoned, derive_seed(seed, 1));
  const auto chosen_clean = select_by_hash(clean, want_clean, derive_seed(seed, 2));
  chosen.insert(chosen.end(), chosen_clean.begin(), chosen_clean.end());
  std::sort(chosen.begin(), chosen.end());

  DetectionReport report;
  report.mu = mu;
  report.method = "oracle";
  for (const auto& ex : dp) report.scores[ex.id] = 0.0;
  for (auto id : chosen) report.scores[id] = 1.0;
  report.suspected_ids = std::move(chosen);
  std::ostringstream da_text;
  da_text << da;
  report.metadata["da"] = da_text.str();
  return report;
}

double detection_accuracy(const DetectionReport& report, const PoisonManifest& manifest) {
  if (report.suspected_ids.empty()) throw UndefinedMetricError("detection accuracy of an empty suspected set");
  std::size_t hits = 0;
  for (auto id : report.suspected_ids) hits += manifest.contains(id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(report.suspected_ids.size());
}

// ---- registry ----

namespace {

class LgaDetector final : public Detector {
 public:
  explicit LgaDetector(const DetectorSettings& s) : s_(s) {}
  std::string name() const override { return "lga"; }
  DetectionReport detect(const DatasetSplit& dp, double mu) const override {
    return detect_lga(dp, mu, s_.lga_gamma, s_.isolation_epochs, s_.train_config);
  }

 private:
  DetectorSettings s_;
};

std::shared_ptr<const FeatureExtractor> require_extractor(const DetectorSettings& s, const std::string& name) {
  if (!s.extractor) throw ArgumentError("detector '" + name + "' needs a feature extractor");
  return s.extractor;
}

class LnDetector final : public Detector {
 public:
  explicit LnDetector(const DetectorSettings& s) : s_(s) { require_extractor(s, "ln"); }
  std::string name() const override { return "ln"; }
  DetectionReport detect(const DatasetSplit& dp, double mu) const override {
    return detect_ln(dp, mu, *s_.extractor, s_.sce);
  }

 private:
  DetectorSettings s_;
};

class SpectreDetector final : public Detector {
 public:
  explicit SpectreDetector(const DetectorSettings& s) : s_(s) { require_extractor(s, "spectre"); }
  std::string name() const override { return "spectre"; }
  DetectionReport detect(const DatasetSplit& dp, double mu) const override {
    return detect_spectre(dp, mu, *s_.extractor, s_.spectre);
  }

 private:
  DetectorSettings s_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, DetectorFactory> factories{
      {"lga", [](const DetectorSettings& s) { return std::make_unique<LgaDetector>(s); }},
      {"ln", [](const DetectorSettings& s) { return std::make_unique<LnDetector>(s); }},
      {"spectre", [](const DetectorSettings& s) { return std::make_unique<SpectreDetector>(s); }},
  };
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_detector(const std::string& name, DetectorFactory factory) {
  if (name.empty() || !factory) throw ArgumentError("detector registration needs a name and a factory");
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<Detector> make_detector(const std::string& name, const DetectorSettings& settings) {
  DetectorFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw ArgumentError("unknown detector '" + name + "'");
    factory = it->second;
  }
  return factory(settings);
}

bool has_detector(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  return r.factories.contains(name);
}

std::vector<std::string> detector_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [name, _] : r.factories) out.push_back(name);
  return out;
}

}  // namespace nab
