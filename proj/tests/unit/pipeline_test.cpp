#include <gtest/gtest.h>

#include "shmd/pipeline.hpp"

using namespace shmd;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("shmd_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.output_dir = out.string();
  c.corpus.n_malware = 160;
  c.corpus.n_benign = 64;
  c.corpus.windows_min = 4;
  c.corpus.windows_max = 6;
  c.train.epochs = 4;
  c.attack.proxy_train.epochs = 3;
  c.attack.k_per_block = {1, 2};
  c.sweep.fault_rates = {0.0, 0.1, 0.5};
  c.sweep.repetitions = 2;
  c.sweep.attack_rates = {0.0, 0.5};
  c.pac.n_instances = 3;
  c.pac.n_samples = 100;
  c.pac_fault_rates = {0.0, 0.5};
  c.validate();
  return c;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Pipeline, MissingArtifactNamesProducer) {
  const auto dir = scratch("missing");
  const auto cfg = tiny_config(dir);
  try {
    cmd_train(cfg);
    FAIL();
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("gen-data"), std::string::npos);
  }
  cmd_gen_data(cfg);
  try {
    cmd_attack(cfg);
    FAIL();
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("'train'"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Pipeline, CsvHelpers) {
  EXPECT_EQ(split_csv_line("a,,b\r"), (std::vector<std::string>{"a", "", "b"}));
  const auto rows = parse_csv("x,y\n1,2\n\n3,4\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].at("y"), "4");
  const std::vector<double> ok = {0.1, 0.2, 0.195, 0.3}, bad = {0.1, 0.2, 0.15}, two = {0.3, 0.295, 0.4, 0.395};
  EXPECT_TRUE(nondecreasing_with_one_inversion(ok, 0.01));
  EXPECT_FALSE(nondecreasing_with_one_inversion(bad, 0.01));
  EXPECT_FALSE(nondecreasing_with_one_inversion(two, 0.01));
}

// end to end on a tiny corpus: every artifact exists, manifests hash what is
// on disk, and a second run reproduces every table byte for byte
TEST(Pipeline, ReproTwiceIsByteIdentical) {
  const auto a = scratch("repro_a"), b = scratch("repro_b");
  const auto results = cmd_repro(tiny_config(a));
  EXPECT_EQ(results.size(), 6u);
  cmd_repro(tiny_config(b));
  for (const auto& t : repro_tables()) {
    ASSERT_TRUE(fs::exists(a / t)) << t;
    EXPECT_EQ(read_file(a / t), read_file(b / t)) << t;
  }
  const auto manifest = nlohmann::json::parse(read_file(a / "manifest_sweep.json"));
  EXPECT_EQ(manifest.at("command"), "sweep");
  for (const auto& art : manifest.at("artifacts"))
    EXPECT_EQ(art.at("sha256"), sha256_hex(read_file(a / art.at("path").get<std::string>())));
  // the output directory is not part of the run identity
  EXPECT_EQ(manifest.at("config_sha256"),
            nlohmann::json::parse(read_file(b / "manifest_sweep.json")).at("config_sha256"));

  const auto summary = parse_summary(read_file(a / kSweepSummaryFile));
  ASSERT_NE(summary.find("accuracy", 0.5), nullptr);
  EXPECT_EQ(summary.find("accuracy", 0.5)->n, 2u);
  EXPECT_EQ(summary.find("re_effectiveness_attacker_data", 0.1), nullptr);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, SplitsJsonRoundTrip) {
  CorpusSplits s;
  s.seed = 42;
  s.folds = {{{1, 2}, {3}, {4, 5, 6}, {0}}};
  EXPECT_EQ(splits_from_json(splits_to_json(s)).folds, s.folds);
  EXPECT_THROW(splits_from_json(nlohmann::json{{"seed", 1}, {"folds", {{1}}}}), Error);
}
