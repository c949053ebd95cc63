#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "shmd/eval.hpp"

using namespace shmd;

namespace {

using L = Label;
constexpr L M = Label::malware, B = Label::benign;

// Oracle that answers from a fixed per-call script, then repeats the last label.
DetectorOracle scripted(std::vector<Label> script) {
  auto state = std::make_shared<std::pair<std::vector<Label>, std::size_t>>(std::move(script), 0);
  return DetectorOracle([state](std::span<const double>) {
    auto& [s, i] = *state;
    const auto l = s[std::min(i, s.size() - 1)];
    ++i;
    return l;
  });
}

ProgramTrace trace_of(Label l, std::size_t n_windows) {
  TraceWindow w;
  w.counts.fill(10);
  w.basic_blocks = 50;
  return ProgramTrace("t", l, l == M ? "worm" : "browser", std::vector<TraceWindow>(n_windows, w));
}

}  // namespace

// Table value from the source: precision 98.0% and sensitivity 92.6% give F1 95.2%
TEST(Metrics, F1FromPublishedPrecisionAndSensitivity) {
  const auto f1 = f1_score(0.980, 0.926);
  ASSERT_TRUE(f1.has_value());
  EXPECT_NEAR(*f1, 0.952, 0.0005);
}

TEST(Metrics, FromCountsByHand) {
  ConfusionCounts c{.tp = 90, .fp = 5, .tn = 45, .fn = 10};
  const auto m = metrics(c);
  EXPECT_DOUBLE_EQ(*m.accuracy, 135.0 / 150.0);
  EXPECT_DOUBLE_EQ(*m.sensitivity, 0.9);
  EXPECT_DOUBLE_EQ(*m.specificity, 0.9);
  EXPECT_DOUBLE_EQ(*m.precision, 90.0 / 95.0);
  EXPECT_NEAR(*m.f1, 180.0 / 195.0, 1e-12);  // 2tp / (2tp + fp + fn)
  EXPECT_NEAR(*m.false_positive_rate(), 0.1, 1e-12);
  EXPECT_NEAR(*m.false_negative_rate(), 0.1, 1e-12);
}

// property: F1 is the harmonic mean, equal to 2tp/(2tp+fp+fn) for any counts
TEST(Metrics, PropertyF1Identity) {
  Rng rng(1);
  std::uniform_int_distribution<std::uint64_t> d(0, 500);
  for (int i = 0; i < 1000; ++i) {
    ConfusionCounts c{d(rng), d(rng), d(rng), d(rng)};
    const auto m = metrics(c);
    if (c.tp == 0) continue;
    ASSERT_NEAR(*m.f1, 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn), 1e-12);
    ASSERT_LE(*m.f1, std::max(*m.precision, *m.sensitivity) + 1e-12);
    ASSERT_GE(*m.f1, std::min(*m.precision, *m.sensitivity) - 1e-12);
  }
}

TEST(Metrics, ZeroDenominatorsAreUndefined) {
  ConfusionCounts c;
  const auto m = metrics(c);
  EXPECT_FALSE(m.accuracy);
  EXPECT_FALSE(m.precision);
  EXPECT_FALSE(m.false_positive_rate());
  c.add(M, B);
  const auto m2 = metrics(c);
  EXPECT_FALSE(m2.precision);
  EXPECT_FALSE(m2.f1);
  EXPECT_DOUBLE_EQ(*m2.sensitivity, 0.0);
  EXPECT_FALSE(f1_score(0.0, 0.0));
}

TEST(Decision, MajorityTiesToMalware) {
  EXPECT_EQ(majority_vote(std::vector<L>{M, B}), M);
  EXPECT_EQ(majority_vote(std::vector<L>{B, B, M}), B);
  EXPECT_EQ(majority_vote(std::vector<L>{M, M, B}), M);
  EXPECT_THROW(majority_vote(std::vector<L>{}), Error);
}

TEST(Decision, EvaluateProgramsCountsEachTrace) {
  auto o = scripted({M, M, B, /*2nd*/ B, B, B, /*3rd*/ M, B, M});
  const std::vector<ProgramTrace> ts = {trace_of(M, 3), trace_of(M, 3), trace_of(B, 3)};
  const auto c = evaluate_programs(o, ts);
  EXPECT_EQ(c, (ConfusionCounts{.tp = 1, .fp = 1, .tn = 0, .fn = 1}));
}

TEST(Speed, FirstDetectionIsOneBased) {
  EXPECT_EQ(first_detection(std::vector<L>{B, B, M, B}), 3u);
  EXPECT_EQ(first_detection(std::vector<L>{M}), 1u);
  EXPECT_FALSE(first_detection(std::vector<L>{B, B}));
}

TEST(Speed, MeanAndCdf) {
  DetectionSpeedReport r;
  r.first_window = {1, 3, std::nullopt, 2};
  EXPECT_EQ(r.detected(), 3u);
  EXPECT_DOUBLE_EQ(*r.mean(), 2.0);
  EXPECT_EQ(r.cdf(4), (std::vector<double>{0.25, 0.5, 0.75, 0.75}));
  DetectionSpeedReport none;
  none.first_window = {std::nullopt};
  EXPECT_FALSE(none.mean());
}

// property: the cdf is non-decreasing and ends at detected()/n
TEST(Speed, PropertyCdfMonotone) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    DetectionSpeedReport r;
    const std::size_t n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i)
      r.first_window.push_back(rng() % 4 == 0 ? std::nullopt : std::optional<std::size_t>(1 + rng() % 12));
    const auto c = r.cdf(12);
    for (std::size_t w = 1; w < c.size(); ++w) ASSERT_GE(c[w], c[w - 1]);
    ASSERT_NEAR(c.back(), static_cast<double>(r.detected()) / n, 1e-12);
  }
}

TEST(MeanStd, PopulationStd) {
  const std::vector<double> xs = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_std(xs);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_DOUBLE_EQ(m.std, 2.0);
  EXPECT_EQ(m.n, 8u);
  EXPECT_EQ(mean_std(std::vector<double>{}).n, 0u);
}

TEST(Sweep, RepetitionSeedsDistinctAndGridIndependent) {
  std::set<std::uint64_t> seen;
  for (double r : {0.0, 0.1, 0.2, 0.5})
    for (std::size_t k = 0; k < 50; ++k) seen.insert(repetition_seed(7, r, k));
  EXPECT_EQ(seen.size(), 200u);
  EXPECT_EQ(repetition_seed(7, 0.3, 4), repetition_seed(7, 0.3, 4));
}

TEST(Sweep, ConfigValidation) {
  SweepConfig c;
  c.fault_rates = {0.2, 0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.fault_rates = {0.1, 1.2};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.repetitions = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  EXPECT_TRUE(c.attacks_at(0.3));
  EXPECT_FALSE(c.attacks_at(0.2));
}

TEST(Sweep, SmallRunShapeAndReplay) {
  const auto corpus = generate_synthetic_corpus(testutil::small_corpus_spec());
  const auto splits = split_folds(corpus, 1);
  std::vector<Sample> train_set;
  for (auto i : splits.victim_training())
    for (const auto& f : corpus[i].window_features()) train_set.push_back({f, corpus[i].label()});
  TrainConfig tc;
  tc.seed = 4;
  tc.epochs = 6;
  const auto victim = quantize(train(train_set, tc));

  SweepConfig cfg;
  cfg.fault_rates = {0.0, 0.5};
  cfg.repetitions = 2;
  cfg.attack_rates = {0.0};
  cfg.attack.proxy_train.epochs = 3;
  const auto out = sweep(corpus, splits, victim, cfg);
  ASSERT_EQ(out.results.size(), 2u);
  ASSERT_EQ(out.repetitions.size(), 4u);
  EXPECT_TRUE(out.results[0].re_effectiveness[0].has_value());
  EXPECT_FALSE(out.results[1].re_effectiveness[0].has_value());
  // rate 0 is deterministic: zero spread across repetitions
  EXPECT_EQ(out.results[0].accuracy.std, 0.0);
  EXPECT_EQ(out.repetitions[0].confusion, out.repetitions[1].confusion);

  // a single cell replays on its own
  const auto net = std::make_shared<const FixedPointNet>(victim);
  const auto again = run_repetition(corpus, splits, net, cfg, 0.5, 1);
  EXPECT_EQ(again.confusion, out.repetitions[3].confusion);
  EXPECT_EQ(again.seed, out.repetitions[3].seed);

  std::ostringstream a, b;
  write_summary_csv(a, out.results);
  write_summary_csv(b, sweep(corpus, splits, victim, cfg).results);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("re_robustness_attacker_data"), std::string::npos);
}
