#pragma once

// Measurement: confusion metrics, reverse-engineering effectiveness,
// transferability, detection speed, and the fault-rate sweep.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "shmd/attack.hpp"
#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/model.hpp"
#include "shmd/proxy.hpp"
#include "shmd/rng.hpp"
#include "shmd/vos.hpp"

namespace shmd {

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  void add(Label truth, Label predicted) {
    if (truth == Label::malware)
      ++(predicted == Label::malware ? tp : fn);
    else
      ++(predicted == Label::malware ? fp : tn);
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// nullopt marks a ratio whose denominator is zero.
using Ratio = std::optional<double>;

inline Ratio ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline Ratio f1_score(Ratio precision, Ratio sensitivity) {
  if (!precision || !sensitivity) return std::nullopt;
  const double s = *precision + *sensitivity;
  if (s == 0.0) return std::nullopt;
  return 2.0 * *precision * *sensitivity / s;
}

struct MetricsReport {
  Ratio accuracy, sensitivity, specificity, precision, f1;

  Ratio false_positive_rate() const { return specificity ? Ratio(1.0 - *specificity) : std::nullopt; }
  Ratio false_negative_rate() const { return sensitivity ? Ratio(1.0 - *sensitivity) : std::nullopt; }
};

inline MetricsReport metrics(const ConfusionCounts& c) {
  MetricsReport r;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.sensitivity = ratio(c.tp, c.tp + c.fn);
  r.specificity = ratio(c.tn, c.tn + c.fp);
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.f1 = f1_score(r.precision, r.sensitivity);
  return r;
}

// ---------------------------------------------------------------------------
// Program-level decisions

/// Majority over window labels; a tie counts as malware.
inline Label majority_vote(std::span<const Label> labels) {
  if (labels.empty()) throw Error("majority_vote: no labels");
  const auto mal = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::malware));
  return 2 * mal >= labels.size() ? Label::malware : Label::benign;
}

inline Label program_decision(DetectorOracle& oracle, const ProgramTrace& trace) {
  const auto labels = oracle.window_labels(trace);
  return majority_vote(labels);
}

inline ConfusionCounts evaluate_programs(DetectorOracle& oracle, std::span<const ProgramTrace> traces) {
  ConfusionCounts c;
  for (const auto& t : traces) c.add(t.label(), program_decision(oracle, t));
  return c;
}

/// Fraction of traces where the proxy agrees with one victim query.
inline double re_effectiveness(const Proxy& proxy, DetectorOracle& victim, std::span<const ProgramTrace> traces) {
  if (traces.empty()) throw Error("re_effectiveness: empty test set");
  std::size_t agree = 0;
  for (const auto& t : traces) {
    const auto x = t.mean_features();
    agree += proxy.label(x) == victim.query(x);
  }
  return static_cast<double>(agree) / static_cast<double>(traces.size());
}

/// Fraction of evasive variants the victim lets through.
inline double transferability(std::span<const EvasiveVariant> variants, DetectorOracle& victim) {
  if (variants.empty()) throw Error("transferability: empty evasive set");
  std::size_t evaded = 0;
  for (const auto& v : variants) evaded += program_decision(victim, v.result) == Label::benign;
  return static_cast<double>(evaded) / static_cast<double>(variants.size());
}

struct DetectionSpeedReport {
  std::vector<std::optional<std::size_t>> first_window;  // 1-based; nullopt if never flagged

  std::size_t detected() const {
    return static_cast<std::size_t>(std::count_if(first_window.begin(), first_window.end(),
                                                  [](const auto& w) { return w.has_value(); }));
  }

  /// Mean first-detection window over detected traces.
  Ratio mean() const {
    std::size_t n = 0, sum = 0;
    for (const auto& w : first_window)
      if (w) {
        ++n;
        sum += *w;
      }
    return n == 0 ? std::nullopt : Ratio(static_cast<double>(sum) / static_cast<double>(n));
  }

  /// cdf[w-1] = fraction of all traces detected within the first w windows.
  std::vector<double> cdf(std::size_t max_window) const {
    std::vector<double> out(max_window, 0.0);
    if (first_window.empty()) return out;
    for (const auto& w : first_window)
      if (w && *w <= max_window)
        for (std::size_t i = *w - 1; i < max_window; ++i) out[i] += 1.0;
    for (auto& v : out) v /= static_cast<double>(first_window.size());
    return out;
  }
};

inline std::optional<std::size_t> first_detection(std::span<const Label> window_labels) {
  for (std::size_t i = 0; i < window_labels.size(); ++i)
    if (window_labels[i] == Label::malware) return i + 1;
  return std::nullopt;
}

inline DetectionSpeedReport detection_speed(DetectorOracle& victim, std::span<const ProgramTrace> malware) {
  DetectionSpeedReport r;
  r.first_window.reserve(malware.size());
  for (const auto& t : malware) {
    const auto labels = victim.window_labels(t);
    r.first_window.push_back(first_detection(labels));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sweep

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population std over repetitions
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd m;
  m.n = xs.size();
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return m;
}

inline constexpr std::array<Scenario, 2> kScenarios = {Scenario::attacker_data, Scenario::victim_data};

struct SweepConfig {
  std::vector<double> fault_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t repetitions = 50;
  FaultModel fault_model;  // rate and seed are overwritten per repetition
  AttackConfig attack;
  std::vector<double> attack_rates = {0.0, 0.1, 0.3, 0.5};  // attacks run only at these rates
  std::size_t transfer_k = 1;
  std::size_t rotation = 0;
  std::uint64_t seed = 7;

  void validate() const {
    if (fault_rates.empty()) throw ConfigError("sweep.fault_rates", "must not be empty");
    for (std::size_t i = 0; i < fault_rates.size(); ++i) {
      if (!(fault_rates[i] >= 0.0 && fault_rates[i] <= 1.0))
        throw ConfigError("sweep.fault_rates", "entries must be in [0, 1]");
      if (i > 0 && !(fault_rates[i] > fault_rates[i - 1]))
        throw ConfigError("sweep.fault_rates", "must be sorted ascending without duplicates");
    }
    if (repetitions < 1) throw ConfigError("sweep.repetitions", "must be >= 1");
    if (transfer_k < 1) throw ConfigError("sweep.transfer_k", "must be >= 1");
    if (rotation >= kNumFolds) throw ConfigError("sweep.rotation", "must be in 0..3");
    attack.validate();
  }

  bool attacks_at(double rate) const {
    return std::find(attack_rates.begin(), attack_rates.end(), rate) != attack_rates.end();
  }
};

/// Seed of one (rate, repetition) cell. Keyed on the rate's bit pattern so a
/// cell replays identically whatever grid it was part of.
inline std::uint64_t repetition_seed(std::uint64_t master, double rate, std::size_t rep) {
  return derive_seed(derive_seed(master, "sweep.rate", std::bit_cast<std::uint64_t>(rate)), "rep", rep);
}

struct RepetitionRecord {
  double fault_rate = 0.0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  ConfusionCounts confusion;
  double accuracy = 0.0;
  Ratio fpr, fnr, detection_speed;
  std::vector<double> detection_cdf;
  std::array<Ratio, 2> re_effectiveness;  // indexed by Scenario
  std::array<Ratio, 2> transferability;
};

struct SweepResult {
  double fault_rate = 0.0;
  MeanStd accuracy, fpr, fnr, detection_speed;
  std::vector<double> detection_cdf;  // mean over repetitions
  std::array<std::optional<MeanStd>, 2> re_effectiveness;
  std::array<std::optional<MeanStd>, 2> transferability;

  Ratio re_robustness(Scenario s) const {
    const auto& m = re_effectiveness[static_cast<std::size_t>(s)];
    return m ? Ratio(1.0 - m->mean) : std::nullopt;
  }
  Ratio transferability_robustness(Scenario s) const {
    const auto& m = transferability[static_cast<std::size_t>(s)];
    return m ? Ratio(1.0 - m->mean) : std::nullopt;
  }
};

struct SweepOutput {
  std::vector<RepetitionRecord> repetitions;
  std::vector<SweepResult> results;
};

inline std::vector<ProgramTrace> gather(std::span<const ProgramTrace> corpus, std::span<const std::size_t> idx) {
  std::vector<ProgramTrace> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus[i]);
  return out;
}

inline std::vector<ProgramTrace> only(std::span<const ProgramTrace> traces, Label l) {
  std::vector<ProgramTrace> out;
  for (const auto& t : traces)
    if (t.label() == l) out.push_back(t);
  return out;
}

/// One stochastic evaluation plus, where configured, both attack scenarios.
inline RepetitionRecord run_repetition(std::span<const ProgramTrace> corpus, const CorpusSplits& splits,
                                       std::shared_ptr<const FixedPointNet> victim, const SweepConfig& cfg,
                                       double rate, std::size_t rep) {
  RepetitionRecord rec;
  rec.fault_rate = rate;
  rec.rep = rep;
  rec.seed = repetition_seed(cfg.seed, rate, rep);

  const auto test = gather(corpus, splits.fold(FoldRole::testing, cfg.rotation));
  const auto test_malware = only(test, Label::malware);
  auto victim_fm = [&](std::string_view tag) {
    FaultModel fm = cfg.fault_model;
    fm.fault_rate = rate;
    fm.rng_seed = derive_seed(rec.seed, tag);
    return fm;
  };

  auto eval_oracle = stochastic_oracle(victim, victim_fm("victim.eval"));
  rec.confusion = evaluate_programs(eval_oracle, test);
  const auto m = metrics(rec.confusion);
  rec.accuracy = m.accuracy.value_or(0.0);
  rec.fpr = m.false_positive_rate();
  rec.fnr = m.false_negative_rate();
  auto speed_oracle = stochastic_oracle(victim, victim_fm("victim.speed"));
  const auto speed = detection_speed(speed_oracle, test_malware);
  rec.detection_speed = speed.mean();
  std::size_t longest = 0;
  for (const auto& t : test_malware) longest = std::max(longest, t.windows().size());
  rec.detection_cdf = speed.cdf(longest);

  if (!cfg.attacks_at(rate)) return rec;
  for (Scenario s : kScenarios) {
    const auto tag = std::string(to_string(s));
    AttackConfig ac = cfg.attack;
    ac.scenario = s;
    ac.proxy_train.seed = derive_seed(rec.seed, "proxy." + tag);
    const auto pool = gather(corpus, attacker_pool(splits, s, cfg.rotation));
    auto query_oracle = stochastic_oracle(victim, victim_fm("victim.query." + tag));
    const Proxy proxy = reverse_engineer(query_oracle, pool, ac);
    auto re_oracle = stochastic_oracle(victim, victim_fm("victim.re." + tag));
    rec.re_effectiveness[static_cast<std::size_t>(s)] = re_effectiveness(proxy, re_oracle, test);
    const auto variants = generate_evasive_set(proxy, test_malware, ac, cfg.transfer_k);
    auto tr_oracle = stochastic_oracle(victim, victim_fm("victim.transfer." + tag));
    rec.transferability[static_cast<std::size_t>(s)] = transferability(variants, tr_oracle);
  }
  return rec;
}

inline SweepResult summarize(double rate, std::span<const RepetitionRecord> recs) {
  SweepResult r;
  r.fault_rate = rate;
  auto collect = [&](auto&& get) {
    std::vector<double> xs;
    for (const auto& rec : recs)
      if (const Ratio v = get(rec)) xs.push_back(*v);
    return xs;
  };
  r.accuracy = mean_std(collect([](const RepetitionRecord& x) { return Ratio(x.accuracy); }));
  r.fpr = mean_std(collect([](const RepetitionRecord& x) { return x.fpr; }));
  r.fnr = mean_std(collect([](const RepetitionRecord& x) { return x.fnr; }));
  r.detection_speed = mean_std(collect([](const RepetitionRecord& x) { return x.detection_speed; }));
  for (const auto& rec : recs) {
    if (r.detection_cdf.size() < rec.detection_cdf.size()) r.detection_cdf.resize(rec.detection_cdf.size(), 0.0);
    for (std::size_t w = 0; w < rec.detection_cdf.size(); ++w)
      r.detection_cdf[w] += rec.detection_cdf[w] / static_cast<double>(recs.size());
  }
  for (std::size_t s = 0; s < 2; ++s) {
    const auto re = collect([s](const RepetitionRecord& x) { return x.re_effectiveness[s]; });
    if (!re.empty()) r.re_effectiveness[s] = mean_std(re);
    const auto tr = collect([s](const RepetitionRecord& x) { return x.transferability[s]; });
    if (!tr.empty()) r.transferability[s] = mean_std(tr);
  }
  return r;
}

/// Victim must already be trained; it is reused at every rate.
inline SweepOutput sweep(std::span<const ProgramTrace> corpus, const CorpusSplits& splits, const MlpModel& victim,
                         const SweepConfig& cfg) {
  cfg.validate();
  const auto net = std::make_shared<const FixedPointNet>(victim);
  SweepOutput out;
  for (double rate : cfg.fault_rates) {
    std::vector<RepetitionRecord> recs;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      try {
        recs.push_back(run_repetition(corpus, splits, net, cfg, rate, rep));
      } catch (const std::exception& e) {
        throw Error("sweep failed at fault_rate=" + std::to_string(rate) + " rep=" + std::to_string(rep) +
                    " seed=" + std::to_string(repetition_seed(cfg.seed, rate, rep)) + ": " + e.what());
      }
    }
    out.results.push_back(summarize(rate, recs));
    out.repetitions.insert(out.repetitions.end(), recs.begin(), recs.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fmt_num(const Ratio& v) { return v ? fmt_num(*v) : std::string(); }

inline void write_repetitions_csv(std::ostream& os, std::span<const RepetitionRecord> recs) {
  os << "fault_rate,rep,seed,tp,fp,tn,fn,accuracy,fpr,fnr,detection_speed,"
        "re_effectiveness_attacker_data,re_effectiveness_victim_data,"
        "transferability_attacker_data,transferability_victim_data\n";
  for (const auto& r : recs) {
    os << fmt_num(r.fault_rate) << ',' << r.rep << ',' << r.seed << ',' << r.confusion.tp << ',' << r.confusion.fp
       << ',' << r.confusion.tn << ',' << r.confusion.fn << ',' << fmt_num(r.accuracy) << ',' << fmt_num(r.fpr) << ','
       << fmt_num(r.fnr) << ',' << fmt_num(r.detection_speed) << ',' << fmt_num(r.re_effectiveness[0]) << ','
       << fmt_num(r.re_effectiveness[1]) << ',' << fmt_num(r.transferability[0]) << ','
       << fmt_num(r.transferability[1]) << '\n';
  }
}

/// Long format: one row per (fault_rate, metric). Empty std means not measured.
inline void write_summary_csv(std::ostream& os, std::span<const SweepResult> results) {
  os << "fault_rate,metric,mean,std,n\n";
  auto row = [&](double rate, const std::string& name, const MeanStd& m) {
    os << fmt_num(rate) << ',' << name << ',' << fmt_num(m.mean) << ',' << fmt_num(m.std) << ',' << m.n << '\n';
  };
  for (const auto& r : results) {
    row(r.fault_rate, "accuracy", r.accuracy);
    row(r.fault_rate, "false_positive_rate", r.fpr);
    row(r.fault_rate, "false_negative_rate", r.fnr);
    row(r.fault_rate, "detection_speed", r.detection_speed);
    for (Scenario s : kScenarios) {
      const auto i = static_cast<std::size_t>(s);
      const auto tag = std::string(to_string(s));
      if (const auto& m = r.re_effectiveness[i]) {
        row(r.fault_rate, "re_effectiveness_" + tag, *m);
        row(r.fault_rate, "re_robustness_" + tag, {1.0 - m->mean, m->std, m->n});
      }
      if (const auto& m = r.transferability[i]) {
        row(r.fault_rate, "transferability_" + tag, *m);
        row(r.fault_rate, "transferability_robustness_" + tag, {1.0 - m->mean, m->std, m->n});
      }
    }
  }
}

inline void write_detection_cdf_csv(std::ostream& os, std::span<const SweepResult> results) {
  os << "fault_rate,window,fraction_detected\n";
  for (const auto& r : results)
    for (std::size_t w = 0; w < r.detection_cdf.size(); ++w)
      os << fmt_num(r.fault_rate) << ',' << (w + 1) << ',' << fmt_num(r.detection_cdf[w]) << '\n';
}

}  // namespace shmd
