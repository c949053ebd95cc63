#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "shmd/error.hpp"

namespace shmd {

/// Two's-complement fixed-point layout used by the inference datapath.
struct FixedPointFormat {
  int total_bits = 32;
  int fractional_bits = 16;
  int accumulator_bits = 64;

  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;

  void validate() const {
    if (total_bits < 2 || total_bits > 32) throw Error("fixed point: total_bits must be in [2, 32]");
    if (fractional_bits < 0 || fractional_bits >= total_bits)
      throw Error("fixed point: fractional_bits must be in [0, total_bits)");
    if (accumulator_bits < total_bits || accumulator_bits > 64)
      throw Error("fixed point: accumulator_bits must be in [total_bits, 64]");
  }

  double scale() const { return std::ldexp(1.0, fractional_bits); }
  std::int64_t raw_max() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  std::int64_t raw_min() const { return -(std::int64_t{1} << (total_bits - 1)); }
  std::int64_t acc_max() const {
    return accumulator_bits == 64 ? std::numeric_limits<std::int64_t>::max()
                                  : (std::int64_t{1} << (accumulator_bits - 1)) - 1;
  }
  std::int64_t acc_min() const {
    return accumulator_bits == 64 ? std::numeric_limits<std::int64_t>::min()
                                  : -(std::int64_t{1} << (accumulator_bits - 1));
  }
  double max_value() const { return static_cast<double>(raw_max()) / scale(); }
  double min_value() const { return static_cast<double>(raw_min()) / scale(); }

  bool representable(double v) const {
    if (!std::isfinite(v)) return false;
    const double r = std::nearbyint(v * scale());
    return r >= static_cast<double>(raw_min()) && r <= static_cast<double>(raw_max());
  }

  /// Round-to-nearest-even onto the grid. Caller checks representable() first.
  std::int32_t to_raw(double v) const {
    return static_cast<std::int32_t>(std::nearbyint(v * scale()));
  }
  /// Like to_raw, clamped into range; used for activations where clipping is the hardware behaviour.
  std::int32_t to_raw_saturating(double v) const {
    if (std::isnan(v)) return 0;
    const double r = std::nearbyint(v * scale());
    if (r > static_cast<double>(raw_max())) return static_cast<std::int32_t>(raw_max());
    if (r < static_cast<double>(raw_min())) return static_cast<std::int32_t>(raw_min());
    return static_cast<std::int32_t>(r);
  }
  double to_double(std::int64_t raw) const { return static_cast<double>(raw) / scale(); }
  double quantize(double v) const { return to_double(to_raw(v)); }

  /// Exact product rescaled to the operand format (round half up), saturated to total_bits.
  std::int32_t multiply(std::int32_t a, std::int32_t b) const {
    const std::int64_t p = static_cast<std::int64_t>(a) * static_cast<std::int64_t>(b);
    const std::int64_t half = fractional_bits > 0 ? (std::int64_t{1} << (fractional_bits - 1)) : 0;
    std::int64_t r = (p + half) >> fractional_bits;
    if (r > raw_max()) r = raw_max();
    if (r < raw_min()) r = raw_min();
    return static_cast<std::int32_t>(r);
  }
};

/// Saturation bookkeeping for one inference (or an accumulated batch of them).
struct SaturationCounters {
  std::uint64_t accumulator = 0;  // adds that would have left the accumulator range
  std::uint64_t activation = 0;   // accumulator values clipped when narrowed to total_bits

  std::uint64_t total() const { return accumulator + activation; }
  SaturationCounters& operator+=(const SaturationCounters& o) {
    accumulator += o.accumulator;
    activation += o.activation;
    return *this;
  }
};

/// acc + addend, clamped to the accumulator range; never wraps.
inline std::int64_t saturating_accumulate(std::int64_t acc, std::int64_t addend,
                                          const FixedPointFormat& fmt,
                                          SaturationCounters& sat) {
  std::int64_t out;
  if (__builtin_add_overflow(acc, addend, &out)) {
    ++sat.accumulator;
    return addend > 0 ? fmt.acc_max() : fmt.acc_min();
  }
  if (out > fmt.acc_max()) {
    ++sat.accumulator;
    return fmt.acc_max();
  }
  if (out < fmt.acc_min()) {
    ++sat.accumulator;
    return fmt.acc_min();
  }
  return out;
}

/// Narrow an accumulator value back to an operand-width activation.
inline std::int32_t narrow(std::int64_t acc, const FixedPointFormat& fmt, SaturationCounters& sat) {
  if (acc > fmt.raw_max()) {
    ++sat.activation;
    return static_cast<std::int32_t>(fmt.raw_max());
  }
  if (acc < fmt.raw_min()) {
    ++sat.activation;
    return static_cast<std::int32_t>(fmt.raw_min());
  }
  return static_cast<std::int32_t>(acc);
}

}  // namespace shmd
