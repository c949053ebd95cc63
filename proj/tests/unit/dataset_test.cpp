#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "shmd/dataset.hpp"

using namespace shmd;

namespace {

const std::vector<ProgramTrace>& small_corpus() {
  static const auto c = generate_synthetic_corpus(testutil::small_corpus_spec());
  return c;
}

TraceWindow window_with(std::uint64_t each, std::uint64_t blocks) {
  TraceWindow w;
  w.counts.fill(each);
  w.basic_blocks = blocks;
  return w;
}

}  // namespace

TEST(Corpus, DefaultShapeMatchesBenchmark) {
  const CorpusSpec s;
  EXPECT_EQ(s.n_malware + s.n_benign, 3600u);
  EXPECT_EQ(kNumFeatures, 50u);
}

TEST(Corpus, CountsLabelsAndFamilies) {
  const auto& c = small_corpus();
  const auto spec = testutil::small_corpus_spec();
  ASSERT_EQ(c.size(), spec.n_malware + spec.n_benign);
  std::size_t mal = 0;
  std::set<std::string> ids;
  for (const auto& t : c) {
    mal += t.label() == Label::malware;
    EXPECT_TRUE(is_known_family(t.label(), t.family()));
    EXPECT_GE(t.windows().size(), spec.windows_min);
    EXPECT_LE(t.windows().size(), spec.windows_max);
    ids.insert(t.program_id());
  }
  EXPECT_EQ(mal, spec.n_malware);
  EXPECT_EQ(ids.size(), c.size());
}

// property: every window is a valid count vector whose features sum to 1
TEST(Corpus, WindowsAreSimplexPoints) {
  const auto spec = testutil::small_corpus_spec();
  for (const auto& t : small_corpus())
    for (const auto& w : t.windows()) {
      ASSERT_EQ(w.total(), spec.window_instructions);
      ASSERT_GE(w.basic_blocks, 1u);
      const auto f = w.features();
      double s = 0.0;
      for (double v : f) {
        ASSERT_GE(v, 0.0);
        s += v;
      }
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Corpus, DeterministicAndSeedSensitive) {
  const auto a = generate_synthetic_corpus(testutil::small_corpus_spec(5));
  EXPECT_EQ(a, small_corpus());
  const auto b = generate_synthetic_corpus(testutil::small_corpus_spec(6));
  EXPECT_NE(a, b);
}

TEST(Corpus, ClassesDifferOnAverage) {
  FeatureVector mal{}, ben{};
  std::size_t nm = 0, nb = 0;
  for (const auto& t : small_corpus()) {
    const auto f = t.mean_features();
    auto& acc = t.label() == Label::malware ? mal : ben;
    (t.label() == Label::malware ? nm : nb)++;
    for (std::size_t i = 0; i < kNumFeatures; ++i) acc[i] += f[i];
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) l1 += std::abs(mal[i] / nm - ben[i] / nb);
  EXPECT_GT(l1, 0.05);
}

TEST(Corpus, SpecValidation) {
  CorpusSpec s;
  s.n_families = 9;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.windows_min = 10;
  s.windows_max = 5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.n_benign = 2;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Trace, RejectsMalformed) {
  EXPECT_THROW(ProgramTrace("x", Label::malware, "worm", {}), Error);
  EXPECT_THROW(ProgramTrace("x", Label::benign, "worm", {window_with(1, 1)}), Error);
  EXPECT_THROW(ProgramTrace("x", Label::malware, "worm", {window_with(0, 1)}), Error);
  EXPECT_THROW(ProgramTrace("x", Label::malware, "worm", {window_with(2, 0)}), Error);
}

TEST(Trace, MeanFeaturesAverageWindows) {
  TraceWindow a = window_with(0, 1), b = window_with(0, 1);
  a.counts[0] = 10;
  b.counts[1] = 30;
  b.counts[0] = 10;
  ProgramTrace t("m", Label::malware, kMalwareFamilies[0].data(), {a, b});
  const auto m = t.mean_features();
  EXPECT_DOUBLE_EQ(m[0], 0.5 * (1.0 + 0.25));
  EXPECT_DOUBLE_EQ(m[1], 0.5 * 0.75);
}

TEST(Folds, DisjointCompleteAndStratified) {
  const auto& c = small_corpus();
  const auto s = split_folds(c, 3);
  std::vector<int> seen(c.size(), 0);
  for (const auto& f : s.folds)
    for (auto i : f) ++seen[i];
  for (int v : seen) ASSERT_EQ(v, 1);
  for (std::size_t k = 0; k < kNumFolds; ++k) {
    std::size_t mal = 0;
    for (auto i : s.folds[k]) mal += c[i].label() == Label::malware;
    EXPECT_NEAR(static_cast<double>(mal), 240.0 / 4, 3.0);
    EXPECT_NEAR(static_cast<double>(s.folds[k].size() - mal), 80.0 / 4, 3.0);
  }
  EXPECT_EQ(split_folds(c, 3).folds, s.folds);
}

TEST(Folds, RolesRotate) {
  std::set<std::size_t> testing;
  for (std::size_t r = 0; r < kNumFolds; ++r) {
    std::set<std::size_t> roles;
    for (auto role : {FoldRole::victim_training_1, FoldRole::victim_training_2, FoldRole::attacker_training,
                      FoldRole::testing})
      roles.insert(CorpusSplits::fold_for(role, r));
    EXPECT_EQ(roles.size(), kNumFolds);
    testing.insert(CorpusSplits::fold_for(FoldRole::testing, r));
  }
  EXPECT_EQ(testing.size(), kNumFolds);
}

TEST(TraceFile, RoundTrip) {
  std::vector<ProgramTrace> some(small_corpus().begin(), small_corpus().begin() + 20);
  std::stringstream ss;
  save_traces(some, static_cast<std::ostream&>(ss));
  EXPECT_EQ(load_traces(static_cast<std::istream&>(ss)), some);
}

TEST(TraceFile, ErrorsCarryLineNumbers) {
  std::stringstream ss;
  save_traces(std::span(small_corpus().data(), 2), static_cast<std::ostream&>(ss));
  ss << "{\"program_id\":\"bad\",\"label\":\"malware\",\"family\":\"worm\",\"windows\":[{\"counts\":[1,2],"
        "\"basic_blocks\":1}]}\n";
  try {
    load_traces(static_cast<std::istream&>(ss));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}
