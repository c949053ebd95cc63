#pragma once

// The baseline detector: one ReLU hidden layer, one logistic output score.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/fixed_point.hpp"
#include "shmd/rng.hpp"

namespace shmd {

struct Sample {
  FeatureVector x{};
  Label y = Label::benign;
};

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double label_value(Label l) { return l == Label::malware ? 1.0 : 0.0; }

inline Label classify(double score, double threshold) {
  return score >= threshold ? Label::malware : Label::benign;
}

struct TrainConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  double threshold = 0.5;
  double weight_decay = 0.1;  // decoupled, applied to weight matrices only
  std::size_t hidden_units = kNumFeatures;
  double init_scale = 10.0;  // inputs are simplex points with entries ~1/50
  bool balance_classes = true;  // weight each class's loss by n / (2 * n_class)

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate", "must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (!(threshold > 0 && threshold < 1)) throw ConfigError("train.threshold", "must be in (0, 1)");
    if (weight_decay < 0) throw ConfigError("train.weight_decay", "must be >= 0");
    if (hidden_units < 1) throw ConfigError("train.hidden_units", "must be >= 1");
  }
};

/// score(x) = logistic(w2 . relu(w1^T x + b1) + b2)
struct MlpModel {
  Eigen::MatrixXd w1;  // input_dim x hidden_dim
  Eigen::VectorXd b1;  // hidden_dim
  Eigen::VectorXd w2;  // hidden_dim
  double b2 = 0.0;
  FixedPointFormat fixed_point{};
  double threshold = 0.5;
  std::uint64_t training_seed = 0;

  static MlpModel zeros(std::size_t input_dim = kNumFeatures, std::size_t hidden_dim = kNumFeatures) {
    MlpModel m;
    m.w1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(hidden_dim));
    m.b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim));
    m.w2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_dim));
    return m;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.cols()); }

  void validate() const {
    if (w1.cols() != b1.size() || w1.cols() != w2.size())
      throw Error("mlp: inconsistent hidden dimension");
    if (w1.rows() == 0 || w1.cols() == 0) throw Error("mlp: empty weight matrix");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !std::isfinite(b2))
      throw Error("mlp: non-finite weights");
    if (!(threshold > 0 && threshold < 1)) throw Error("mlp: threshold must be in (0, 1)");
    fixed_point.validate();
  }

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 &&
           a.fixed_point == b.fixed_point && a.threshold == b.threshold &&
           a.training_seed == b.training_seed;
  }
};

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

inline void check_dim(const MlpModel& m, std::size_t n) {
  if (n != m.input_dim())
    throw Error("dimension mismatch: model expects " + std::to_string(m.input_dim()) +
                " features, got " + std::to_string(n));
}

}  // namespace detail

inline double predict(const MlpModel& m, std::span<const double> x) {
  detail::check_dim(m, x.size());
  const Eigen::VectorXd h = (m.w1.transpose() * detail::as_vector(x) + m.b1).cwiseMax(0.0);
  return logistic(m.w2.dot(h) + m.b2);
}

inline Label predict_label(const MlpModel& m, std::span<const double> x) {
  return classify(predict(m, x), m.threshold);
}

/// d score / d x.
inline std::vector<double> score_gradient(const MlpModel& m, std::span<const double> x) {
  detail::check_dim(m, x.size());
  const Eigen::VectorXd z1 = m.w1.transpose() * detail::as_vector(x) + m.b1;
  const Eigen::VectorXd h = z1.cwiseMax(0.0);
  const double s = logistic(m.w2.dot(h) + m.b2);
  // relu'(0) taken as 0
  const Eigen::VectorXd back = (z1.array() > 0.0).select(m.w2, 0.0);
  const Eigen::VectorXd g = (s * (1.0 - s)) * (m.w1 * back);
  return {g.data(), g.data() + g.size()};
}

/// Exact d L / d x for binary cross-entropy L against `target`.
inline std::vector<double> gradient_wrt_input(const MlpModel& m, std::span<const double> x, Label target) {
  detail::check_dim(m, x.size());
  const Eigen::VectorXd z1 = m.w1.transpose() * detail::as_vector(x) + m.b1;
  const double s = logistic(m.w2.dot(z1.cwiseMax(0.0)) + m.b2);
  const Eigen::VectorXd back = (z1.array() > 0.0).select(m.w2, 0.0);
  const Eigen::VectorXd g = (s - label_value(target)) * (m.w1 * back);
  return {g.data(), g.data() + g.size()};
}

/// Binary cross-entropy of the model score against `target`.
inline double loss(const MlpModel& m, std::span<const double> x, Label target) {
  detail::check_dim(m, x.size());
  const Eigen::VectorXd h = (m.w1.transpose() * detail::as_vector(x) + m.b1).cwiseMax(0.0);
  const double z = m.w2.dot(h) + m.b2;
  // log(1 + e^z) - y z, stable for large |z|
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - label_value(target) * z;
}

namespace detail {

struct Adam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t t = 0;

  template <class P, class G, class S>
  void step(P& param, const G& grad, S& m, S& v, double decay) {
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param -= (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    if (decay > 0) param -= (lr * decay) * param;
  }
};

inline void check_classes(std::span<const Sample> data) {
  if (data.empty()) throw Error("training data is empty");
  bool mal = false, ben = false;
  for (const auto& s : data) (s.y == Label::malware ? mal : ben) = true;
  if (!mal || !ben) throw Error("training data contains a single class");
}

inline Eigen::MatrixXd batch_matrix(std::span<const Sample> data, std::span<const std::size_t> idx) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kNumFeatures));
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < kNumFeatures; ++c) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[idx[r]].x[c];
  return X;
}

}  // namespace detail

/// Mini-batch Adam on binary cross-entropy; deterministic given (data, config.seed).
inline MlpModel train(std::span<const Sample> data, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_classes(data);
  const auto D = static_cast<Eigen::Index>(kNumFeatures);
  const auto H = static_cast<Eigen::Index>(cfg.hidden_units);
  Rng rng(derive_seed(cfg.seed, "train.mlp"));
  std::normal_distribution<double> normal(0.0, 1.0);

  MlpModel m = MlpModel::zeros(kNumFeatures, cfg.hidden_units);
  m.threshold = cfg.threshold;
  m.training_seed = cfg.seed;
  const double s1 = std::sqrt(2.0 / static_cast<double>(D)) * cfg.init_scale;
  const double s2 = std::sqrt(1.0 / static_cast<double>(H));
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < H; ++j) m.w1(i, j) = normal(rng) * s1;
  for (Eigen::Index j = 0; j < H; ++j) m.w2(j) = normal(rng) * s2;

  Eigen::MatrixXd mw1 = Eigen::MatrixXd::Zero(D, H), vw1 = mw1;
  Eigen::VectorXd mb1 = Eigen::VectorXd::Zero(H), vb1 = mb1, mw2 = mb1, vw2 = mb1;
  Eigen::VectorXd mb2 = Eigen::VectorXd::Zero(1), vb2 = mb2;
  detail::Adam adam{cfg.learning_rate};

  double class_weight[2] = {1.0, 1.0};
  if (cfg.balance_classes) {
    const auto n_mal = static_cast<double>(
        std::count_if(data.begin(), data.end(), [](const Sample& s) { return s.y == Label::malware; }));
    const auto n_all = static_cast<double>(data.size());
    class_weight[0] = n_all / (2.0 * (n_all - n_mal));
    class_weight[1] = n_all / (2.0 * n_mal);
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const Eigen::MatrixXd X = detail::batch_matrix(data, idx);
      Eigen::VectorXd y(static_cast<Eigen::Index>(n)), cw(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r) {
        y(static_cast<Eigen::Index>(r)) = label_value(data[idx[r]].y);
        cw(static_cast<Eigen::Index>(r)) = class_weight[static_cast<int>(data[idx[r]].y)];
      }

      const Eigen::MatrixXd Z1 = (X * m.w1).rowwise() + m.b1.transpose();
      const Eigen::MatrixXd Hd = Z1.cwiseMax(0.0);
      const Eigen::VectorXd z2 = (Hd * m.w2).array() + m.b2;
      Eigen::VectorXd s(z2.size());
      for (Eigen::Index r = 0; r < z2.size(); ++r) {
        s(r) = logistic(z2(r));
        const double z = z2(r);
        epoch_loss += cw(r) * ((z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y(r) * z);
      }
      const Eigen::VectorXd dz2 = (s - y).cwiseProduct(cw) / static_cast<double>(n);
      const Eigen::VectorXd gw2 = Hd.transpose() * dz2;
      const Eigen::VectorXd gb2 = Eigen::VectorXd::Constant(1, dz2.sum());
      const Eigen::MatrixXd dH = (dz2 * m.w2.transpose()).cwiseProduct((Z1.array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd gw1 = X.transpose() * dH;
      const Eigen::VectorXd gb1 = dH.colwise().sum().transpose();

      ++adam.t;
      adam.step(m.w1, gw1, mw1, vw1, cfg.weight_decay);
      adam.step(m.b1, gb1, mb1, vb1, 0.0);
      adam.step(m.w2, gw2, mw2, vw2, cfg.weight_decay);
      Eigen::VectorXd b2v = Eigen::VectorXd::Constant(1, m.b2);
      adam.step(b2v, gb2, mb2, vb2, 0.0);
      m.b2 = b2v(0);
    }
    if (!std::isfinite(epoch_loss) || !m.w1.allFinite() || !m.w2.allFinite())
      throw Error("training diverged at epoch " + std::to_string(epoch));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Quantization and the model file

/// Round every parameter onto the fixed-point grid. Idempotent.
inline MlpModel quantize(const MlpModel& m) {
  m.validate();
  const auto& fmt = m.fixed_point;
  std::vector<std::string> offenders;
  auto q = [&](double v, const std::string& name) {
    if (!fmt.representable(v)) {
      if (offenders.size() < 16) offenders.push_back(name + "=" + std::to_string(v));
      return 0.0;
    }
    return fmt.quantize(v);
  };
  MlpModel out = m;
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j)
      out.w1(i, j) = q(m.w1(i, j), "w1[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  for (Eigen::Index j = 0; j < m.b1.size(); ++j) out.b1(j) = q(m.b1(j), "b1[" + std::to_string(j) + "]");
  for (Eigen::Index j = 0; j < m.w2.size(); ++j) out.w2(j) = q(m.w2(j), "w2[" + std::to_string(j) + "]");
  out.b2 = q(m.b2, "b2");
  if (!offenders.empty()) {
    std::string msg = "weights outside fixed-point range:";
    for (const auto& o : offenders) msg += " " + o;
    throw Error(msg);
  }
  return out;
}

inline bool is_quantized(const MlpModel& m) {
  const auto on_grid = [&](double v) { return m.fixed_point.representable(v) && m.fixed_point.quantize(v) == v; };
  for (Eigen::Index i = 0; i < m.w1.size(); ++i)
    if (!on_grid(m.w1.data()[i])) return false;
  for (Eigen::Index j = 0; j < m.b1.size(); ++j)
    if (!on_grid(m.b1(j)) || !on_grid(m.w2(j))) return false;
  return on_grid(m.b2);
}

// Model file (JSON):
//   format "shmd-mlp", version 1, input_dim, hidden_dim,
//   hidden_activation "relu", output_activation "logistic",
//   fixed_point {total_bits, fractional_bits, accumulator_bits},
//   threshold, training_seed,
//   w1 (input_dim*hidden_dim, row-major: w1[i*hidden_dim + j] links input i to unit j),
//   b1, w2 (hidden_dim each), b2.

inline nlohmann::json model_to_json(const MlpModel& m) {
  nlohmann::json j;
  j["format"] = "shmd-mlp";
  j["version"] = 1;
  j["input_dim"] = m.input_dim();
  j["hidden_dim"] = m.hidden_dim();
  j["hidden_activation"] = "relu";
  j["output_activation"] = "logistic";
  j["fixed_point"] = {{"total_bits", m.fixed_point.total_bits},
                      {"fractional_bits", m.fixed_point.fractional_bits},
                      {"accumulator_bits", m.fixed_point.accumulator_bits}};
  j["threshold"] = m.threshold;
  j["training_seed"] = m.training_seed;
  std::vector<double> w1;
  w1.reserve(static_cast<std::size_t>(m.w1.size()));
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i)
    for (Eigen::Index k = 0; k < m.w1.cols(); ++k) w1.push_back(m.w1(i, k));
  j["w1"] = w1;
  j["b1"] = std::vector<double>(m.b1.data(), m.b1.data() + m.b1.size());
  j["w2"] = std::vector<double>(m.w2.data(), m.w2.data() + m.w2.size());
  j["b2"] = m.b2;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "shmd-mlp") throw Error("model file: unexpected format");
  if (j.at("hidden_activation") != "relu" || j.at("output_activation") != "logistic")
    throw Error("model file: unsupported activation");
  const auto D = j.at("input_dim").get<std::size_t>();
  const auto H = j.at("hidden_dim").get<std::size_t>();
  MlpModel m = MlpModel::zeros(D, H);
  const auto& fp = j.at("fixed_point");
  m.fixed_point = {fp.at("total_bits").get<int>(), fp.at("fractional_bits").get<int>(),
                   fp.at("accumulator_bits").get<int>()};
  m.threshold = j.at("threshold").get<double>();
  m.training_seed = j.at("training_seed").get<std::uint64_t>();
  const auto w1 = j.at("w1").get<std::vector<double>>();
  const auto b1 = j.at("b1").get<std::vector<double>>();
  const auto w2 = j.at("w2").get<std::vector<double>>();
  if (w1.size() != D * H || b1.size() != H || w2.size() != H) throw Error("model file: array size mismatch");
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t k = 0; k < H; ++k)
      m.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = w1[i * H + k];
  for (std::size_t k = 0; k < H; ++k) {
    m.b1(static_cast<Eigen::Index>(k)) = b1[k];
    m.w2(static_cast<Eigen::Index>(k)) = w2[k];
  }
  m.b2 = j.at("b2").get<double>();
  m.validate();
  return m;
}

inline void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << model_to_json(m).dump(1) << '\n';
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  try {
    return model_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw Error("model file '" + path + "': " + e.what());
  }
}

}  // namespace shmd
