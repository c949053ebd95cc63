#pragma once

// Voltage-overscaling emulation: fixed-point inference whose multiplier outputs
// latch corrupted values with a configurable probability, plus a randomized
// ensemble detector used as a comparison baseline.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/fixed_point.hpp"
#include "shmd/model.hpp"
#include "shmd/rng.hpp"

namespace shmd {

enum class ErrorMode : std::uint8_t { none, uniform_bit_flip, msb_weighted_bit_flip };

inline std::string_view to_string(ErrorMode m) {
  switch (m) {
    case ErrorMode::none: return "none";
    case ErrorMode::uniform_bit_flip: return "uniform_bit_flip";
    case ErrorMode::msb_weighted_bit_flip: return "msb_weighted_bit_flip";
  }
  return "?";
}

inline ErrorMode parse_error_mode(std::string_view s) {
  if (s == "none") return ErrorMode::none;
  if (s == "uniform_bit_flip") return ErrorMode::uniform_bit_flip;
  if (s == "msb_weighted_bit_flip") return ErrorMode::msb_weighted_bit_flip;
  throw ConfigError("fault_model.error_mode", "unknown error mode '" + std::string(s) + "'");
}

/// Which multipliers sit on the overscaled voltage domain.
enum class FaultSite : std::uint8_t { output_layer, all_layers };

inline std::string_view to_string(FaultSite s) { return s == FaultSite::all_layers ? "all_layers" : "output_layer"; }

inline FaultSite parse_fault_site(std::string_view s) {
  if (s == "output_layer") return FaultSite::output_layer;
  if (s == "all_layers") return FaultSite::all_layers;
  throw ConfigError("fault_model.site", "unknown fault site '" + std::string(s) + "'");
}

/// Per-multiplication timing-violation policy.
struct FaultModel {
  double fault_rate = 0.0;  // probability one multiplier output latches corrupted
  ErrorMode error_mode = ErrorMode::uniform_bit_flip;
  std::uint64_t rng_seed = 0;
  FaultSite site = FaultSite::output_layer;
  int carry_span = 5;  // bits above the product's magnitude a late carry can reach

  void validate() const {
    if (!(fault_rate >= 0.0 && fault_rate <= 1.0))
      throw ConfigError("fault_model.fault_rate", "must be in [0, 1]");
    if (carry_span < 0 || carry_span > 31) throw ConfigError("fault_model.carry_span", "must be in 0..31");
  }
  bool active() const { return fault_rate > 0.0 && error_mode != ErrorMode::none; }
};

// ---------------------------------------------------------------------------
// Bit-level corruption
//
// A timing violation latches the product with one carry resolved wrongly: the
// value is off by +-2^pos. Which carry chain is critical depends on the operands
// that sensitize it, so pos and the sign are functions of (a, b); whether the
// violation happens at all is the random part.

/// Positions a late carry can reach: the product's significant bits plus
/// `span` more, never into the sign bit.
inline int reachable_bits(std::int32_t product, int span, int total_bits) {
  const auto mag = static_cast<std::uint32_t>(product >= 0 ? product : ~product);
  const int width = static_cast<int>(std::bit_width(mag)) + span;
  return std::clamp(width, 1, total_bits - 1);
}

/// Map a 53-bit uniform to a bit position. Uniform: every reachable bit equally
/// likely. Msb-weighted: P(pos) proportional to 2^(pos/8).
inline int fault_bit_from_uniform(ErrorMode mode, int reachable, double u) {
  if (reachable <= 1) return 0;
  if (mode == ErrorMode::msb_weighted_bit_flip) {
    // inverse CDF of the truncated geometric weight a^pos, a = 2^(1/8)
    const double a = std::exp2(1.0 / 8.0);
    const double total = std::pow(a, reachable) - 1.0;
    const int pos = static_cast<int>(std::floor(std::log1p(u * total) / std::log(a)));
    return std::clamp(pos, 0, reachable - 1);
  }
  return std::min(static_cast<int>(u * reachable), reachable - 1);
}

inline std::int32_t flip_bit(std::int32_t v, int pos) {
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(v) ^ (std::uint32_t{1} << pos));
}

struct CarryError {
  int bit = 0;
  bool negative = false;
};

inline CarryError carry_error(ErrorMode mode, std::int32_t product, std::int32_t a, std::int32_t b, int span,
                              int total_bits) {
  const std::uint64_t h = mix64((std::uint64_t{static_cast<std::uint32_t>(a)} << 32) | static_cast<std::uint32_t>(b));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return {fault_bit_from_uniform(mode, reachable_bits(product, span, total_bits), u), (h & 1) != 0};
}

/// Latched value of a violated product: exact +- 2^bit, saturated to the word.
inline std::int32_t apply_carry_error(std::int32_t product, CarryError e, const FixedPointFormat& fmt) {
  const std::int64_t delta = std::int64_t{1} << e.bit;
  const std::int64_t v = product + (e.negative ? -delta : delta);
  return static_cast<std::int32_t>(std::clamp(v, fmt.raw_min(), fmt.raw_max()));
}

/// Seeded stream deciding which multiplications fault. Occurrences are i.i.d.
/// Bernoulli(fault_rate) per multiplication; the stream draws geometric gaps
/// between faults, which is the same process with one draw per fault.
class FaultStream {
 public:
  FaultStream() : FaultStream(FaultModel{}) {}
  explicit FaultStream(const FaultModel& fm) : model_(fm), rng_(fm.rng_seed) {
    model_.validate();
    if (model_.active()) {
      log_keep_ = std::log1p(-model_.fault_rate);
      draw_gap();
    }
  }

  const FaultModel& model() const { return model_; }

  /// Advance one multiplication; true if its output latches corrupted.
  bool next() {
    ++macs_;
    if (countdown_ > 0) {
      --countdown_;
      return false;
    }
    draw_gap();
    ++faults_;
    return true;
  }

  /// Number of clean multiplications ahead, capped at n. Consumes them.
  std::size_t take_clean(std::size_t n) {
    const std::size_t k = countdown_ < n ? static_cast<std::size_t>(countdown_) : n;
    countdown_ -= k;
    macs_ += k;
    return k;
  }

  std::uint64_t macs() const { return macs_; }
  std::uint64_t faults() const { return faults_; }

 private:
  void draw_gap() {
    if (!model_.active()) {
      countdown_ = std::numeric_limits<std::uint64_t>::max();
      return;
    }
    if (model_.fault_rate >= 1.0) {
      countdown_ = 0;
      return;
    }
    const double u = 1.0 - uniform01(rng_);  // (0, 1]
    const double g = std::floor(std::log(u) / log_keep_);
    countdown_ = g >= 9.0e18 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(g);
  }

  FaultModel model_;
  Rng rng_;
  double log_keep_ = 0.0;
  std::uint64_t countdown_ = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t macs_ = 0;
  std::uint64_t faults_ = 0;
};

struct MacResult {
  std::int64_t acc = 0;
  bool corrupted = false;
};

/// acc + a*b where the product may latch corrupted. Saturates instead of wrapping.
inline MacResult faulty_mac(std::int32_t a, std::int32_t b, std::int64_t acc, const FixedPointFormat& fmt,
                            FaultStream& stream, SaturationCounters& sat) {
  std::int32_t p = fmt.multiply(a, b);
  const bool hit = stream.next();
  if (hit) {
    const auto& m = stream.model();
    p = apply_carry_error(p, carry_error(m.error_mode, p, a, b, m.carry_span, fmt.total_bits), fmt);
  }
  return {saturating_accumulate(acc, p, fmt, sat), hit};
}

/// Dot product through the fault stream, equivalent to n faulty_mac calls in
/// order. Runs of clean products are summed directly: 50 terms of at most 2^31
/// cannot overflow a 64-bit accumulator.
inline std::int64_t faulty_dot(const std::int32_t* a, const std::int32_t* b, std::size_t n, std::int64_t acc,
                               const FixedPointFormat& fmt, FaultStream& stream, SaturationCounters& sat) {
  std::size_t i = 0;
  while (i < n) {
    const std::size_t clean = stream.take_clean(n - i);
    for (const std::size_t end = i + clean; i < end; ++i) acc = saturating_accumulate(acc, fmt.multiply(a[i], b[i]), fmt, sat);
    if (i < n) {
      acc = faulty_mac(a[i], b[i], acc, fmt, stream, sat).acc;
      ++i;
    }
  }
  return acc;
}

inline std::int64_t exact_dot(const std::int32_t* a, const std::int32_t* b, std::size_t n, std::int64_t acc,
                              const FixedPointFormat& fmt, SaturationCounters& sat) {
  for (std::size_t i = 0; i < n; ++i) acc = saturating_accumulate(acc, fmt.multiply(a[i], b[i]), fmt, sat);
  return acc;
}

// ---------------------------------------------------------------------------
// Fixed-point network

/// Raw fixed-point image of a quantized MlpModel, laid out for the MAC loop.
class FixedPointNet {
 public:
  explicit FixedPointNet(const MlpModel& m) : fmt_(m.fixed_point), threshold_(m.threshold) {
    const MlpModel q = is_quantized(m) ? m : quantize(m);
    in_ = q.input_dim();
    hidden_ = q.hidden_dim();
    w1_.resize(in_ * hidden_);
    for (std::size_t j = 0; j < hidden_; ++j)
      for (std::size_t i = 0; i < in_; ++i)
        w1_[j * in_ + i] = fmt_.to_raw(q.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < hidden_; ++j) {
      b1_.push_back(fmt_.to_raw(q.b1(static_cast<Eigen::Index>(j))));
      w2_.push_back(fmt_.to_raw(q.w2(static_cast<Eigen::Index>(j))));
    }
    b2_ = fmt_.to_raw(q.b2);
  }

  std::size_t input_dim() const { return in_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t macs_per_inference(FaultSite site) const {
    return site == FaultSite::all_layers ? in_ * hidden_ + hidden_ : hidden_;
  }
  double threshold() const { return threshold_; }
  const FixedPointFormat& format() const { return fmt_; }

  /// Output logit in real units. MAC order: hidden unit j = 0..H-1 over inputs
  /// i = 0..D-1, then the output products j = 0..H-1. Products on the faulty
  /// site pass through the stream; the rest are exact.
  double logit(std::span<const double> x, FaultStream& stream, SaturationCounters& sat) const {
    if (x.size() != in_)
      throw Error("dimension mismatch: engine expects " + std::to_string(in_) + " features, got " +
                  std::to_string(x.size()));
    xq_.resize(in_);
    h_.resize(hidden_);
    for (std::size_t i = 0; i < in_; ++i) xq_[i] = fmt_.to_raw_saturating(x[i]);
    const bool hidden_faulty = stream.model().site == FaultSite::all_layers;
    for (std::size_t j = 0; j < hidden_; ++j) {
      const std::int32_t* w = &w1_[j * in_];
      const std::int64_t acc = hidden_faulty ? faulty_dot(xq_.data(), w, in_, b1_[j], fmt_, stream, sat)
                                             : exact_dot(xq_.data(), w, in_, b1_[j], fmt_, sat);
      const std::int32_t z = narrow(acc, fmt_, sat);
      h_[j] = z > 0 ? z : 0;
    }
    const std::int64_t acc = faulty_dot(h_.data(), w2_.data(), hidden_, b2_, fmt_, stream, sat);
    return fmt_.to_double(narrow(acc, fmt_, sat));
  }

 private:
  FixedPointFormat fmt_;
  double threshold_;
  std::size_t in_ = 0, hidden_ = 0;
  std::vector<std::int32_t> w1_, b1_, w2_;
  std::int32_t b2_ = 0;
  mutable std::vector<std::int32_t> xq_, h_;  // scratch; a net is used by one thread at a time
};

/// Deterministic fixed-point score (no faults).
inline double predict_fixed(const FixedPointNet& net, std::span<const double> x) {
  FaultStream clean;
  SaturationCounters sat;
  return logistic(net.logit(x, clean, sat));
}

struct StochasticScore {
  double score = 0.0;
  SaturationCounters saturation;
  std::uint64_t faults = 0;
};

/// One stochastic detector instance: a quantized model plus a private fault stream.
/// Equal (model, fault model, seed, input sequence) gives an identical output sequence.
class StochasticEngine {
 public:
  StochasticEngine(const MlpModel& model, const FaultModel& fault_model)
      : net_(std::make_shared<const FixedPointNet>(model)), stream_(fault_model) {}
  StochasticEngine(std::shared_ptr<const FixedPointNet> net, const FaultModel& fault_model)
      : net_(std::move(net)), stream_(fault_model) {}

  StochasticScore predict(std::span<const double> x) {
    StochasticScore out;
    const auto before = stream_.faults();
    out.score = logistic(net_->logit(x, stream_, out.saturation));
    out.faults = stream_.faults() - before;
    saturation_ += out.saturation;
    return out;
  }

  Label predict_label(std::span<const double> x) { return classify(predict(x).score, net_->threshold()); }

  const FixedPointNet& net() const { return *net_; }
  std::shared_ptr<const FixedPointNet> shared_net() const { return net_; }
  const FaultModel& fault_model() const { return stream_.model(); }
  const SaturationCounters& saturation() const { return saturation_; }
  std::uint64_t macs() const { return stream_.macs(); }
  std::uint64_t faults() const { return stream_.faults(); }

 private:
  std::shared_ptr<const FixedPointNet> net_;
  FaultStream stream_;
  SaturationCounters saturation_;
};

inline StochasticScore predict_stochastic(StochasticEngine& engine, std::span<const double> x) {
  return engine.predict(x);
}

/// Seed of stochastic instance k drawn from a base fault model.
inline FaultModel instance_fault_model(const FaultModel& base, std::size_t k) {
  FaultModel fm = base;
  fm.rng_seed = derive_seed(base.rng_seed, "instance", k);
  return fm;
}

/// n_instances x inputs label matrix; row k is an independent pass seeded from
/// (fault_model.rng_seed, k).
inline std::vector<std::vector<Label>> sample_instance_outputs(std::shared_ptr<const FixedPointNet> net,
                                                               const FaultModel& fault_model,
                                                               std::span<const FeatureVector> inputs,
                                                               std::size_t n_instances) {
  if (n_instances < 2) throw Error("sample_instance_outputs: need at least 2 instances");
  std::vector<std::vector<Label>> rows(n_instances);
  for (std::size_t k = 0; k < n_instances; ++k) {
    StochasticEngine e(net, instance_fault_model(fault_model, k));
    rows[k].reserve(inputs.size());
    for (const auto& x : inputs) rows[k].push_back(e.predict_label(x));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Randomized ensemble baseline

struct RandomizedEnsemble {
  std::vector<MlpModel> base_models;
  std::uint64_t selector_seed = 0;
};

/// Index of the base model used for the next prediction.
inline std::size_t ensemble_select(const RandomizedEnsemble& e, Rng& stream) {
  if (e.base_models.empty()) throw Error("ensemble has no base models");
  std::uniform_int_distribution<std::size_t> pick(0, e.base_models.size() - 1);
  return pick(stream);
}

inline double ensemble_predict(const RandomizedEnsemble& e, std::span<const double> x, Rng& stream) {
  return predict(e.base_models[ensemble_select(e, stream)], x);
}

}  // namespace shmd
