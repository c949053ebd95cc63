#pragma once

// Reverse-engineering error bounds for a stochastic detector: a lower bound
// from instance disagreement and an upper bound from instance error, checked
// on the benchmark and exhaustively on a toy threshold class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shmd/attack.hpp"
#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/eval.hpp"
#include "shmd/rng.hpp"
#include "shmd/vos.hpp"

namespace shmd {

/// Probability of each stochastic instance occurring.
struct PolicyVector {
  std::vector<double> p;

  static PolicyVector uniform(std::size_t n) {
    if (n == 0) throw Error("policy needs at least one instance");
    return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  void validate() const {
    if (p.empty()) throw Error("policy is empty");
    double s = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw Error("policy entries must be >= 0");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error("policy must sum to 1");
  }
};

/// delta(k, r) = fraction of inputs where instances k and r disagree.
struct DisagreementMatrix {
  std::size_t n = 0;
  std::vector<double> delta;  // row-major n x n
  std::size_t sample_count = 0;

  double operator()(std::size_t k, std::size_t r) const { return delta[k * n + r]; }

  double mean_off_diagonal() const {
    if (n < 2) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t r = 0; r < n; ++r)
        if (k != r) s += (*this)(k, r);
    return s / static_cast<double>(n * (n - 1));
  }
};

/// Pairwise disagreement of label rows (one row per instance, equal lengths).
inline DisagreementMatrix disagreement(std::span<const std::vector<Label>> rows) {
  if (rows.size() < 2) throw Error("disagreement needs at least 2 instances");
  const std::size_t m = rows.front().size();
  if (m == 0) throw Error("disagreement needs at least one input");
  for (const auto& r : rows)
    if (r.size() != m) throw Error("instance rows differ in length");
  DisagreementMatrix d;
  d.n = rows.size();
  d.sample_count = m;
  d.delta.assign(d.n * d.n, 0.0);
  for (std::size_t k = 0; k < d.n; ++k)
    for (std::size_t r = k + 1; r < d.n; ++r) {
      std::size_t diff = 0;
      for (std::size_t i = 0; i < m; ++i) diff += rows[k][i] != rows[r][i];
      const double v = static_cast<double>(diff) / static_cast<double>(m);
      d.delta[k * d.n + r] = v;
      d.delta[r * d.n + k] = v;
    }
  return d;
}

inline DisagreementMatrix estimate_delta(std::shared_ptr<const FixedPointNet> net, const FaultModel& fm,
                                         std::span<const FeatureVector> inputs, std::size_t n_instances) {
  const auto rows = sample_instance_outputs(std::move(net), fm, inputs, n_instances);
  return disagreement(rows);
}

/// min over reference instance r of sum_{k != r} p_k * delta(k, r).
inline double lower_bound(const PolicyVector& p, const DisagreementMatrix& d) {
  p.validate();
  if (p.p.size() != d.n) throw Error("policy and disagreement matrix dimensions differ");
  double best = 1.0;
  for (std::size_t r = 0; r < d.n; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < d.n; ++k)
      if (k != r) s += p.p[k] * d(k, r);
    best = std::min(best, s);
  }
  return best;
}

/// 2 * max_k e_k, capped at 1.
inline double upper_bound(std::span<const double> instance_errors) {
  if (instance_errors.empty()) throw Error("upper_bound: no instance errors");
  double mx = 0.0;
  for (double e : instance_errors) {
    if (!(e >= 0.0 && e <= 1.0)) throw Error("instance errors must be in [0, 1]");
    mx = std::max(mx, e);
  }
  return std::min(1.0, 2.0 * mx);
}

/// Expected disagreement of a fixed labelling with the instance mixture.
inline double mixture_error(std::span<const Label> h, std::span<const std::vector<Label>> rows, const PolicyVector& p) {
  p.validate();
  if (rows.size() != p.p.size()) throw Error("policy and instance rows differ in count");
  double e = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != h.size()) throw Error("labelling and instance rows differ in length");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < h.size(); ++i) diff += h[i] != rows[k][i];
    e += p.p[k] * static_cast<double>(diff) / static_cast<double>(h.size());
  }
  return e;
}

inline double label_error(std::span<const Label> h, std::span<const Label> truth) {
  if (h.size() != truth.size() || h.empty()) throw Error("label_error: length mismatch");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < h.size(); ++i) diff += h[i] != truth[i];
  return static_cast<double>(diff) / static_cast<double>(h.size());
}

// ---------------------------------------------------------------------------
// Toy class: 1-D thresholds on a finite grid, h_t(x) = malware iff x >= t.

struct ThresholdToy {
  std::vector<double> grid;                 // input points, uniform weight
  std::vector<double> instance_thresholds;  // the stochastic instances
  PolicyVector policy;
  std::vector<Label> truth;

  static std::vector<Label> apply(double t, std::span<const double> xs) {
    std::vector<Label> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(x >= t ? Label::malware : Label::benign);
    return out;
  }

  std::vector<std::vector<Label>> instance_rows() const {
    std::vector<std::vector<Label>> rows;
    for (double t : instance_thresholds) rows.push_back(apply(t, grid));
    return rows;
  }

  /// Every distinct threshold labelling of the grid, including all-malware and all-benign.
  std::vector<double> candidate_thresholds() const {
    std::vector<double> xs = grid;
    std::sort(xs.begin(), xs.end());
    std::vector<double> ts = {xs.front() - 1.0};
    for (double x : xs) ts.push_back(x);
    ts.push_back(xs.back() + 1.0);
    return ts;
  }

  /// inf over the class of the mixture error, by enumeration.
  double exact_min_error() const {
    const auto rows = instance_rows();
    double best = 1.0;
    for (double t : candidate_thresholds()) best = std::min(best, mixture_error(apply(t, grid), rows, policy));
    return best;
  }
};

/// 11 grid points, ground truth at 0.5, two instances straddling it.
inline ThresholdToy default_threshold_toy() {
  ThresholdToy toy;
  for (int i = 0; i <= 10; ++i) toy.grid.push_back(i / 10.0);
  toy.instance_thresholds = {0.35, 0.65};
  toy.policy = PolicyVector::uniform(2);
  toy.truth = ThresholdToy::apply(0.5, toy.grid);
  return toy;
}

// ---------------------------------------------------------------------------
// Reports

struct BoundsReport {
  double fault_rate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double empirical_proxy_error = 0.0;  // toy: exact inf over the class
  std::vector<double> instance_errors;
  double mean_delta = 0.0;
  bool holds = false;
  std::string detail;
};

inline BoundsReport verify_toy(const ThresholdToy& toy) {
  const auto rows = toy.instance_rows();
  BoundsReport r;
  const auto d = disagreement(rows);
  r.lower = lower_bound(toy.policy, d);
  for (const auto& row : rows) r.instance_errors.push_back(label_error(row, toy.truth));
  r.upper = upper_bound(r.instance_errors);
  r.empirical_proxy_error = toy.exact_min_error();
  r.mean_delta = d.mean_off_diagonal();
  constexpr double slack = 1e-12;  // lower and exact are the same sum in a different order
  r.holds = r.lower <= r.empirical_proxy_error + slack && r.empirical_proxy_error <= r.upper + slack;
  if (!r.holds)
    r.detail = "toy sandwich violated: lower=" + std::to_string(r.lower) + " exact=" +
               std::to_string(r.empirical_proxy_error) + " upper=" + std::to_string(r.upper);
  return r;
}

struct PacConfig {
  std::size_t n_instances = 10;
  std::size_t n_samples = 500;

  void validate() const {
    if (n_instances < 2) throw ConfigError("pac.n_instances", "must be >= 2");
    if (n_samples < 1) throw ConfigError("pac.n_samples", "must be >= 1");
  }
};

/// Benchmark side at one fault rate: sample instances on test windows, bound the
/// attacker error, and compare with a proxy trained against the stochastic victim.
/// Only lower <= proxy error is asserted; the proxy only estimates the infimum from above.
inline BoundsReport verify_benchmark(std::span<const ProgramTrace> corpus, const CorpusSplits& splits,
                                     std::shared_ptr<const FixedPointNet> victim, FaultModel fm,
                                     const AttackConfig& attack, const PacConfig& cfg, std::uint64_t seed,
                                     std::size_t rotation = 0) {
  cfg.validate();
  BoundsReport r;
  r.fault_rate = fm.fault_rate;

  // evaluation inputs: every window of the test fold, thinned deterministically
  std::vector<FeatureVector> inputs;
  std::vector<Label> truth;
  for (auto i : splits.fold(FoldRole::testing, rotation))
    for (const auto& f : corpus[i].window_features()) {
      inputs.push_back(f);
      truth.push_back(corpus[i].label());
    }
  if (inputs.size() > cfg.n_samples) {
    Rng rng(derive_seed(seed, "pac.samples"));
    std::vector<std::size_t> idx(inputs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.n_samples);
    std::sort(idx.begin(), idx.end());
    std::vector<FeatureVector> xs;
    std::vector<Label> ys;
    for (auto i : idx) {
      xs.push_back(inputs[i]);
      ys.push_back(truth[i]);
    }
    inputs = std::move(xs);
    truth = std::move(ys);
  }

  fm.rng_seed = derive_seed(seed, "pac.instances");
  const auto rows = sample_instance_outputs(victim, fm, inputs, cfg.n_instances);
  const auto d = disagreement(rows);
  const auto policy = PolicyVector::uniform(cfg.n_instances);
  r.lower = lower_bound(policy, d);
  r.mean_delta = d.mean_off_diagonal();
  for (const auto& row : rows) r.instance_errors.push_back(label_error(row, truth));
  r.upper = upper_bound(r.instance_errors);

  AttackConfig ac = attack;
  ac.proxy_train.seed = derive_seed(seed, "pac.proxy");
  FaultModel qfm = fm;
  qfm.rng_seed = derive_seed(seed, "pac.queries");
  auto oracle = stochastic_oracle(victim, qfm);
  const auto pool = gather(corpus, attacker_pool(splits, ac.scenario, rotation));
  const Proxy proxy = reverse_engineer(oracle, pool, ac);
  std::vector<Label> h;
  h.reserve(inputs.size());
  for (const auto& x : inputs) h.push_back(proxy.label(x));
  r.empirical_proxy_error = mixture_error(h, rows, policy);

  r.holds = r.lower <= r.empirical_proxy_error;
  if (!r.holds)
    r.detail = "lower bound above proxy error at fault_rate=" + std::to_string(r.fault_rate) +
               " lower=" + std::to_string(r.lower) + " proxy_error=" + std::to_string(r.empirical_proxy_error) +
               " seed=" + std::to_string(seed);
  return r;
}

inline void write_bounds_csv(std::ostream& os, std::span<const BoundsReport> reports) {
  os << "fault_rate,lower,upper,proxy_error,mean_delta,max_instance_error,holds\n";
  for (const auto& r : reports) {
    const double mx = r.instance_errors.empty()
                          ? 0.0
                          : *std::max_element(r.instance_errors.begin(), r.instance_errors.end());
    os << fmt_num(r.fault_rate) << ',' << fmt_num(r.lower) << ',' << fmt_num(r.upper) << ','
       << fmt_num(r.empirical_proxy_error) << ',' << fmt_num(r.mean_delta) << ',' << fmt_num(mx) << ','
       << (r.holds ? 1 : 0) << '\n';
  }
}

}  // namespace shmd
