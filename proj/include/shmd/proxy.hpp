#pragma once

// Attacker-side substitute models. The MLP shares the victim architecture;
// logistic regression is the simple differentiable option; boosted decision
// stumps stand in for a non-differentiable proxy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/model.hpp"
#include "shmd/rng.hpp"

namespace shmd {

enum class ProxyKind : std::uint8_t { mlp, logistic, stumps };

inline std::string_view to_string(ProxyKind k) {
  switch (k) {
    case ProxyKind::mlp: return "mlp";
    case ProxyKind::logistic: return "logistic";
    case ProxyKind::stumps: return "stumps";
  }
  return "?";
}

inline ProxyKind parse_proxy_kind(std::string_view s) {
  if (s == "mlp") return ProxyKind::mlp;
  if (s == "logistic") return ProxyKind::logistic;
  if (s == "stumps") return ProxyKind::stumps;
  throw ConfigError("attack.proxy", "unknown proxy architecture '" + std::string(s) + "'");
}

struct LogisticModel {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kNumFeatures));
  double b = 0.0;
  double threshold = 0.5;
};

inline double predict(const LogisticModel& m, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != m.w.size()) throw Error("dimension mismatch");
  return logistic(m.w.dot(detail::as_vector(x)) + m.b);
}

inline std::vector<double> score_gradient(const LogisticModel& m, std::span<const double> x) {
  const double s = predict(m, x);
  const Eigen::VectorXd g = (s * (1.0 - s)) * m.w;
  return {g.data(), g.data() + g.size()};
}

/// Full-batch-free Adam on cross-entropy, same schedule as the MLP trainer.
inline LogisticModel train_logistic(std::span<const Sample> data, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_classes(data);
  Rng rng(derive_seed(cfg.seed, "train.logistic"));
  LogisticModel m;
  m.threshold = cfg.threshold;
  Eigen::VectorXd mw = Eigen::VectorXd::Zero(m.w.size()), vw = mw;
  Eigen::VectorXd mb = Eigen::VectorXd::Zero(1), vb = mb;
  detail::Adam adam{cfg.learning_rate * 10.0};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const Eigen::MatrixXd X = detail::batch_matrix(data, idx);
      Eigen::VectorXd dz(static_cast<Eigen::Index>(n));
      const Eigen::VectorXd z = (X * m.w).array() + m.b;
      for (std::size_t r = 0; r < n; ++r)
        dz(static_cast<Eigen::Index>(r)) = (logistic(z(static_cast<Eigen::Index>(r))) - label_value(data[idx[r]].y)) / static_cast<double>(n);
      const Eigen::VectorXd gw = X.transpose() * dz;
      const Eigen::VectorXd gb = Eigen::VectorXd::Constant(1, dz.sum());
      ++adam.t;
      adam.step(m.w, gw, mw, vw, 0.0);
      Eigen::VectorXd bv = Eigen::VectorXd::Constant(1, m.b);
      adam.step(bv, gb, mb, vb, 0.0);
      m.b = bv(0);
    }
    if (!m.w.allFinite() || !std::isfinite(m.b)) throw Error("training diverged at epoch " + std::to_string(epoch));
  }
  return m;
}

/// One stump votes +1 (malware) when polarity * (x[feature] - cut) > 0.
struct Stump {
  std::size_t feature = 0;
  double cut = 0.0;
  int polarity = 1;
  double alpha = 0.0;

  double vote(std::span<const double> x) const { return polarity * (x[feature] - cut) > 0 ? 1.0 : -1.0; }
};

/// Discrete AdaBoost over decision stumps. score = logistic(2 * sum alpha_t h_t(x)).
struct StumpEnsemble {
  std::vector<Stump> stumps;
  double threshold = 0.5;
};

inline double margin(const StumpEnsemble& m, std::span<const double> x) {
  if (x.size() != kNumFeatures) throw Error("dimension mismatch");
  double f = 0.0;
  for (const auto& s : m.stumps) f += s.alpha * s.vote(x);
  return f;
}

inline double predict(const StumpEnsemble& m, std::span<const double> x) { return logistic(2.0 * margin(m, x)); }

inline StumpEnsemble train_stumps(std::span<const Sample> data, std::size_t rounds = 40, std::size_t cuts_per_feature = 16) {
  detail::check_classes(data);
  const std::size_t n = data.size();
  std::vector<double> weight(n, 1.0 / static_cast<double>(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = data[i].y == Label::malware ? 1.0 : -1.0;

  // candidate cuts: per-feature quantiles
  std::vector<std::vector<double>> cuts(kNumFeatures);
  std::vector<double> col(n);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    for (std::size_t i = 0; i < n; ++i) col[i] = data[i].x[f];
    std::sort(col.begin(), col.end());
    for (std::size_t q = 1; q <= cuts_per_feature; ++q) {
      const double c = col[std::min(n - 1, q * n / (cuts_per_feature + 1))];
      if (cuts[f].empty() || cuts[f].back() != c) cuts[f].push_back(c);
    }
  }

  StumpEnsemble m;
  for (std::size_t round = 0; round < rounds; ++round) {
    Stump best;
    double best_err = 1.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      for (double c : cuts[f]) {
        double err_pos = 0.0;  // weighted error of polarity +1
        for (std::size_t i = 0; i < n; ++i) {
          const double h = data[i].x[f] > c ? 1.0 : -1.0;
          if (h != y[i]) err_pos += weight[i];
        }
        const double err = std::min(err_pos, 1.0 - err_pos);
        if (err < best_err) {
          best_err = err;
          best = {f, c, err_pos <= 0.5 ? 1 : -1, 0.0};
        }
      }
    }
    best_err = std::clamp(best_err, 1e-10, 1.0 - 1e-10);
    if (best_err >= 0.5) break;
    best.alpha = 0.5 * std::log((1.0 - best_err) / best_err);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      weight[i] *= std::exp(-best.alpha * y[i] * best.vote(data[i].x));
      z += weight[i];
    }
    for (auto& w : weight) w /= z;
    m.stumps.push_back(best);
  }
  return m;
}

/// Any attacker substitute model.
class Proxy {
 public:
  using Model = std::variant<MlpModel, LogisticModel, StumpEnsemble>;

  explicit Proxy(Model m) : model_(std::move(m)) {}

  ProxyKind kind() const { return static_cast<ProxyKind>(model_.index()); }
  const Model& model() const { return model_; }

  double score(std::span<const double> x) const {
    return std::visit([&](const auto& m) { return predict(m, x); }, model_);
  }
  double threshold() const {
    return std::visit([](const auto& m) { return m.threshold; }, model_);
  }
  Label label(std::span<const double> x) const { return classify(score(x), threshold()); }

  bool differentiable() const { return kind() != ProxyKind::stumps; }

  /// d score / d x for differentiable proxies.
  std::optional<std::vector<double>> score_gradient(std::span<const double> x) const {
    if (const auto* m = std::get_if<MlpModel>(&model_)) return shmd::score_gradient(*m, x);
    if (const auto* m = std::get_if<LogisticModel>(&model_)) return shmd::score_gradient(*m, x);
    return std::nullopt;
  }

 private:
  Model model_;
};

inline Proxy train_proxy(ProxyKind kind, std::span<const Sample> data, const TrainConfig& cfg) {
  switch (kind) {
    case ProxyKind::mlp: return Proxy(train(data, cfg));
    case ProxyKind::logistic: return Proxy(train_logistic(data, cfg));
    case ProxyKind::stumps: {
      auto m = train_stumps(data);
      m.threshold = cfg.threshold;
      return Proxy(std::move(m));
    }
  }
  throw Error("unknown proxy kind");
}

}  // namespace shmd
