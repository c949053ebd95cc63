// shmd: command line driver for the stochastic detector simulator.
// Exit codes: 0 ok, 1 config error, 2 runtime error, 3 acceptance violation.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shmd/config.hpp"
#include "shmd/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string fault_rates;
  std::optional<std::size_t> reps;
  std::string scenario;
};

std::vector<double> parse_rate_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto tok = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw shmd::ConfigError("--fault-rates", "'" + tok + "' is not a number");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

shmd::RunConfig resolve(const Overrides& o) {
  shmd::RunConfig cfg = o.config_path.empty() ? shmd::RunConfig{} : shmd::load_config(o.config_path);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.master_seed = *o.seed;
  if (!o.fault_rates.empty()) cfg.sweep.fault_rates = parse_rate_list(o.fault_rates);
  if (o.reps) cfg.sweep.repetitions = *o.reps;
  if (!o.scenario.empty()) cfg.attack.scenario = shmd::parse_scenario(o.scenario);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic hardware malware detector simulator"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "JSON run configuration");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--fault-rates", o.fault_rates, "comma-separated sweep fault rates");
  app.add_option("--reps", o.reps, "repetitions per fault rate");
  app.add_option("--scenario", o.scenario, "attacker_data or victim_data");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and folds");
  auto* train = app.add_subcommand("train", "train and quantize the victim detector");
  auto* attack = app.add_subcommand("attack", "reverse engineer and evade the deterministic victim");
  auto* sweep = app.add_subcommand("sweep", "fault-rate sweep of accuracy, speed and attack metrics");
  auto* pac = app.add_subcommand("pac", "PAC bound verification");
  auto* repro = app.add_subcommand("repro", "run the whole pipeline and check acceptance");
  for (auto* sub : {gen, train, attack, sweep, pac, repro}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve(o);
    if (gen->parsed()) shmd::cmd_gen_data(cfg);
    else if (train->parsed()) shmd::cmd_train(cfg);
    else if (attack->parsed()) shmd::cmd_attack(cfg);
    else if (sweep->parsed()) shmd::cmd_sweep(cfg);
    else if (pac->parsed()) shmd::cmd_pac(cfg);
    else if (repro->parsed()) {
      const auto results = shmd::cmd_repro(cfg);
      bool ok = true;
      for (const auto& r : results) {
        std::cout << r.id << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << '\n';
        ok = ok && r.pass;
      }
      if (!ok) return 3;
    }
  } catch (const shmd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
