#pragma once

// Black-box adversary: query the victim, fit a proxy on its labels, pick
// injection categories from the proxy, and rewrite traces by adding no-op
// instructions to every basic block.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/model.hpp"
#include "shmd/proxy.hpp"
#include "shmd/rng.hpp"
#include "shmd/vos.hpp"

namespace shmd {

// ---------------------------------------------------------------------------
// Oracle

/// The victim as the attacker sees it: feature vector in, label out. Nothing
/// else about the detector is reachable through this type.
class DetectorOracle {
 public:
  using QueryFn = std::function<Label(std::span<const double>)>;

  explicit DetectorOracle(QueryFn fn) : fn_(std::move(fn)) {
    if (!fn_) throw Error("oracle needs a query function");
  }

  /// One detection window.
  Label query(std::span<const double> x) {
    ++queries_;
    return fn_(x);
  }

  /// One query for the whole program, on its mean window features.
  Label query(const ProgramTrace& t) {
    const auto x = t.mean_features();
    return query(x);
  }

  /// One query per window, in execution order.
  std::vector<Label> window_labels(const ProgramTrace& t) {
    std::vector<Label> out;
    out.reserve(t.windows().size());
    for (const auto& w : t.windows()) {
      const auto x = w.features();
      out.push_back(query(x));
    }
    return out;
  }

  std::uint64_t queries() const { return queries_; }

 private:
  QueryFn fn_;
  std::uint64_t queries_ = 0;
};

/// Floating-point model, thresholded.
inline DetectorOracle deterministic_oracle(MlpModel model) {
  return DetectorOracle([m = std::move(model)](std::span<const double> x) { return predict_label(m, x); });
}

/// Fixed-point engine with its own fault stream. At fault rate 0 this is the
/// deterministic fixed-point detector.
inline DetectorOracle stochastic_oracle(std::shared_ptr<const FixedPointNet> net, const FaultModel& fm) {
  auto engine = std::make_shared<StochasticEngine>(std::move(net), fm);
  return DetectorOracle([engine](std::span<const double> x) { return engine->predict_label(x); });
}

inline DetectorOracle ensemble_oracle(RandomizedEnsemble ensemble) {
  auto state = std::make_shared<std::pair<RandomizedEnsemble, Rng>>(std::move(ensemble), Rng{});
  state->second.seed(state->first.selector_seed);
  return DetectorOracle([state](std::span<const double> x) {
    const auto& e = state->first;
    const auto& m = e.base_models[ensemble_select(e, state->second)];
    return predict_label(m, x);
  });
}

// ---------------------------------------------------------------------------
// Configuration

enum class Scenario : std::uint8_t { attacker_data, victim_data };

inline std::string_view to_string(Scenario s) {
  return s == Scenario::victim_data ? "victim_data" : "attacker_data";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "attacker_data") return Scenario::attacker_data;
  if (s == "victim_data") return Scenario::victim_data;
  throw ConfigError("attack.scenario", "unknown scenario '" + std::string(s) + "'");
}

/// What one oracle label covers when the attacker builds its training set.
enum class QueryGranularity : std::uint8_t { window, trace };

inline std::string_view to_string(QueryGranularity g) { return g == QueryGranularity::trace ? "trace" : "window"; }

inline QueryGranularity parse_query_granularity(std::string_view s) {
  if (s == "window") return QueryGranularity::window;
  if (s == "trace") return QueryGranularity::trace;
  throw ConfigError("attack.query_granularity", "unknown granularity '" + std::string(s) + "'");
}

struct AttackConfig {
  ProxyKind proxy = ProxyKind::mlp;
  double epsilon = 0.05;
  std::vector<std::size_t> k_per_block = {1, 2, 3, 4};
  Scenario scenario = Scenario::attacker_data;
  std::size_t iterations = 1;
  QueryGranularity granularity = QueryGranularity::window;
  TrainConfig proxy_train = [] {
    TrainConfig c;
    c.balance_classes = false;  // the proxy imitates the oracle, it does not correct it
    c.weight_decay = 0.01;
    return c;
  }();

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("attack.epsilon", "must be in (0, 1)");
    if (k_per_block.empty()) throw ConfigError("attack.k_per_block", "must not be empty");
    for (auto k : k_per_block)
      if (k < 1) throw ConfigError("attack.k_per_block", "entries must be >= 1");
    if (iterations < 1) throw ConfigError("attack.iterations", "must be >= 1");
    proxy_train.validate();
  }
};

/// Traces the attacker may query under a scenario.
inline std::vector<std::size_t> attacker_pool(const CorpusSplits& splits, Scenario s, std::size_t rotation = 0) {
  if (s == Scenario::victim_data) return splits.victim_training(rotation);
  return splits.fold(FoldRole::attacker_training, rotation);
}

// ---------------------------------------------------------------------------
// Reverse engineering

/// Oracle-labelled training set: one label per trace, or one per window.
inline std::vector<Sample> label_with_oracle(DetectorOracle& oracle, std::span<const ProgramTrace> traces,
                                             QueryGranularity g = QueryGranularity::trace) {
  if (traces.empty()) throw Error("label_with_oracle: no traces");
  std::vector<Sample> out;
  for (const auto& t : traces) {
    if (g == QueryGranularity::trace) {
      const auto x = t.mean_features();
      out.push_back({x, oracle.query(x)});
    } else {
      for (const auto& w : t.windows()) {
        const auto x = w.features();
        out.push_back({x, oracle.query(x)});
      }
    }
  }
  return out;
}

inline Proxy reverse_engineer(DetectorOracle& oracle, std::span<const ProgramTrace> attacker_traces,
                              const AttackConfig& cfg) {
  cfg.validate();
  const auto data = label_with_oracle(oracle, attacker_traces, cfg.granularity);
  const auto n_mal = std::count_if(data.begin(), data.end(), [](const Sample& s) { return s.y == Label::malware; });
  if (n_mal == 0 || static_cast<std::size_t>(n_mal) == data.size())
    throw Error("reverse_engineer: oracle labels collapsed to a single class");
  return train_proxy(cfg.proxy, data, cfg.proxy_train);
}

// ---------------------------------------------------------------------------
// Evasion features

enum class PlanStatus : std::uint8_t { ok, no_usable_direction };

struct EvasionDirection {
  FeatureVector direction{};          // epsilon where raising the feature lowers the score, else 0
  std::vector<std::size_t> ranking;   // usable features, strongest |g| first
  PlanStatus status = PlanStatus::no_usable_direction;
};

/// Sign rule on a score gradient. Only negative components are usable because
/// the attacker may only add instructions.
inline EvasionDirection direction_from_gradient(std::span<const double> g, double epsilon) {
  if (g.size() != kNumFeatures) throw Error("gradient has wrong dimension");
  EvasionDirection d;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (g[i] < 0.0) {
      d.direction[i] = epsilon;
      d.ranking.push_back(i);
    }
  }
  std::stable_sort(d.ranking.begin(), d.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
  d.status = d.ranking.empty() ? PlanStatus::no_usable_direction : PlanStatus::ok;
  return d;
}

/// Forward-difference response of the proxy score to raising each feature by
/// epsilon. Used for proxies without gradients.
inline std::vector<double> coordinate_response(const Proxy& proxy, std::span<const double> x, double epsilon) {
  std::vector<double> g(kNumFeatures);
  std::vector<double> probe(x.begin(), x.end());
  const double base = proxy.score(x);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    probe[i] = x[i] + epsilon;
    g[i] = (proxy.score(probe) - base) / epsilon;
    probe[i] = x[i];
  }
  return g;
}

inline EvasionDirection identify_evasion_features(const Proxy& proxy, std::span<const double> x, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (auto g = proxy.score_gradient(x)) return direction_from_gradient(*g, epsilon);
  return direction_from_gradient(coordinate_response(proxy, x, epsilon), epsilon);
}

// ---------------------------------------------------------------------------
// Injection

struct EvasionPlan {
  std::array<std::uint32_t, kNumFeatures> counts{};  // instructions added per basic block, per category
  double epsilon = 0.05;
  std::size_t k_per_block = 1;
  PlanStatus status = PlanStatus::no_usable_direction;

  std::uint64_t per_block() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

/// Instructions of one category to add per block so its frequency rises by about
/// epsilon: n / (ipb + n) >= epsilon, rounded up.
inline std::uint32_t injections_for(double epsilon, double instructions_per_block) {
  const double n = epsilon * instructions_per_block / (1.0 - epsilon);
  return static_cast<std::uint32_t>(std::max(1.0, std::ceil(n - 1e-12)));
}

/// Mean instructions per basic block across a trace.
inline double instructions_per_block(const ProgramTrace& t) {
  std::uint64_t instr = 0, blocks = 0;
  for (const auto& w : t.windows()) {
    instr += w.total();
    blocks += w.basic_blocks;
  }
  return blocks == 0 ? 0.0 : static_cast<double>(instr) / static_cast<double>(blocks);
}

/// Spend k instructions per block down the ranking, each chosen category taking
/// its epsilon-sized share until the budget runs out.
inline EvasionPlan plan_injections(const EvasionDirection& d, double epsilon, std::size_t k_per_block, double ipb) {
  EvasionPlan plan;
  plan.epsilon = epsilon;
  plan.k_per_block = k_per_block;
  plan.status = d.status;
  if (d.status != PlanStatus::ok) return plan;
  const std::uint32_t share = injections_for(epsilon, ipb);
  std::size_t budget = k_per_block;
  for (std::size_t c : d.ranking) {
    if (budget == 0) break;
    const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(share, budget));
    plan.counts[c] += n;
    budget -= n;
  }
  return plan;
}

struct EvasiveVariant {
  ProgramTrace original;
  EvasionPlan plan;
  ProgramTrace result;
  bool proxy_detected = false;
};

/// counts[c] += plan.counts[c] * basic_blocks in every window.
inline EvasiveVariant synthesize_evasive_trace(const ProgramTrace& trace, const EvasionPlan& plan) {
  std::vector<TraceWindow> windows = trace.windows();
  for (auto& w : windows)
    for (std::size_t c = 0; c < kNumFeatures; ++c) w.counts[c] += std::uint64_t{plan.counts[c]} * w.basic_blocks;
  return {trace, plan, trace.with_windows(std::move(windows)), false};
}

/// One variant per malware trace with a budget of k instructions per block.
/// Extra iterations re-rank at the partially injected trace and spend another k.
inline std::vector<EvasiveVariant> generate_evasive_set(const Proxy& proxy, std::span<const ProgramTrace> malware,
                                                        const AttackConfig& cfg, std::size_t k_per_block) {
  cfg.validate();
  std::vector<EvasiveVariant> out;
  out.reserve(malware.size());
  for (const auto& t : malware) {
    if (t.label() != Label::malware) throw Error("generate_evasive_set: " + t.program_id() + " is not malware");
    const double ipb = instructions_per_block(t);
    EvasionPlan total;
    total.epsilon = cfg.epsilon;
    total.k_per_block = k_per_block * cfg.iterations;
    ProgramTrace current = t;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      const auto x = current.mean_features();
      const auto dir = identify_evasion_features(proxy, x, cfg.epsilon);
      if (dir.status != PlanStatus::ok) break;
      const auto step = plan_injections(dir, cfg.epsilon, k_per_block, ipb);
      for (std::size_t c = 0; c < kNumFeatures; ++c) total.counts[c] += step.counts[c];
      total.status = PlanStatus::ok;
      current = synthesize_evasive_trace(t, total).result;
    }
    auto v = synthesize_evasive_trace(t, total);
    v.proxy_detected = proxy.label(v.result.mean_features()) == Label::malware;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace shmd
