#pragma once

// Run configuration: one JSON document covering every stage. Unknown keys and
// type mismatches are rejected with the dotted path of the offending field.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shmd/attack.hpp"
#include "shmd/dataset.hpp"
#include "shmd/error.hpp"
#include "shmd/eval.hpp"
#include "shmd/model.hpp"
#include "shmd/pac.hpp"
#include "shmd/rng.hpp"
#include "shmd/vos.hpp"

namespace shmd {

struct RunConfig {
  std::uint64_t master_seed = 7;
  std::string output_dir = "out";
  CorpusSpec corpus;
  TrainConfig train;
  FaultModel fault_model;  // rate and seed come from the sweep grid and master seed
  SweepConfig sweep;
  AttackConfig attack;
  PacConfig pac;
  std::vector<double> pac_fault_rates = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::size_t rotation = 0;

  void validate() const {
    corpus.validate();
    train.validate();
    fault_model.validate();
    attack.validate();
    pac.validate();
    if (rotation >= kNumFolds) throw ConfigError("rotation", "must be in 0..3");
    for (double r : pac_fault_rates)
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("pac.fault_rates", "entries must be in [0, 1]");
    resolved_sweep().validate();
  }

  // Seed split: each stage seed is derive_seed(master_seed, "<stage>").
  std::uint64_t seed_for(std::string_view stage) const { return derive_seed(master_seed, stage); }

  CorpusSpec resolved_corpus() const {
    CorpusSpec c = corpus;
    c.seed = seed_for("corpus");
    return c;
  }
  TrainConfig resolved_train() const {
    TrainConfig t = train;
    t.seed = seed_for("train");
    return t;
  }
  SweepConfig resolved_sweep() const {
    SweepConfig s = sweep;
    s.fault_model = fault_model;
    s.attack = attack;
    s.rotation = rotation;
    s.seed = seed_for("sweep");
    return s;
  }
};

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  template <class T>
  void get(std::string_view key, T& out) {
    seen_.emplace_back(key);
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(field(key), "expected a boolean");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if (std::is_unsigned_v<T> && !it->is_number_unsigned() && it->template get<std::int64_t>() < 0)
          throw ConfigError(field(key), "must be non-negative");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError(field(key), "expected a string");
      }
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  template <class T>
  void get_list(std::string_view key, std::vector<T>& out) {
    seen_.emplace_back(key);
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(field(key), "expected an array");
    std::vector<T> v;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& e = (*it)[i];
      const std::string f = field(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_floating_point_v<T>) {
        if (!e.is_number()) throw ConfigError(f, "expected a number");
      } else {
        if (!e.is_number_integer() || (!e.is_number_unsigned() && e.template get<std::int64_t>() < 0))
          throw ConfigError(f, "expected a non-negative integer");
      }
      v.push_back(e.template get<T>());
    }
    out = std::move(v);
  }

  /// Nested object, or nullptr when absent.
  const json* child(std::string_view key) {
    seen_.emplace_back(key);
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline void read_train(const json& j, const std::string& path, TrainConfig& t) {
  Reader r(j, path);
  r.get("epochs", t.epochs);
  r.get("learning_rate", t.learning_rate);
  r.get("batch_size", t.batch_size);
  r.get("threshold", t.threshold);
  r.get("weight_decay", t.weight_decay);
  r.get("hidden_units", t.hidden_units);
  r.get("init_scale", t.init_scale);
  r.get("balance_classes", t.balance_classes);
  r.reject_unknown();
}

inline json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},           {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"threshold", t.threshold},     {"weight_decay", t.weight_decay},   {"hidden_units", t.hidden_units},
          {"init_scale", t.init_scale},   {"balance_classes", t.balance_classes}};
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::Reader;
  RunConfig c;
  Reader root(j, "");
  root.get("master_seed", c.master_seed);
  root.get("output_dir", c.output_dir);
  root.get("rotation", c.rotation);

  if (const auto* cj = root.child("corpus")) {
    Reader r(*cj, "corpus");
    auto& s = c.corpus;
    r.get("n_malware", s.n_malware);
    r.get("n_benign", s.n_benign);
    r.get("n_families", s.n_families);
    r.get("windows_min", s.windows_min);
    r.get("windows_max", s.windows_max);
    r.get("window_instructions", s.window_instructions);
    r.get("instructions_per_block", s.instructions_per_block);
    r.get("class_separation", s.class_separation);
    r.get("family_spread", s.family_spread);
    r.get("base_concentration", s.base_concentration);
    r.get("program_concentration", s.program_concentration);
    r.get("window_concentration", s.window_concentration);
    r.get("dormant_max_windows", s.dormant_max_windows);
    r.reject_unknown();
  }
  if (const auto* tj = root.child("train")) detail::read_train(*tj, "train", c.train);
  if (const auto* fj = root.child("fault_model")) {
    Reader r(*fj, "fault_model");
    std::string mode(to_string(c.fault_model.error_mode)), site(to_string(c.fault_model.site));
    r.get("error_mode", mode);
    r.get("site", site);
    r.get("carry_span", c.fault_model.carry_span);
    r.reject_unknown();
    c.fault_model.error_mode = parse_error_mode(mode);
    c.fault_model.site = parse_fault_site(site);
  }
  if (const auto* sj = root.child("sweep")) {
    Reader r(*sj, "sweep");
    r.get_list("fault_rates", c.sweep.fault_rates);
    r.get("repetitions", c.sweep.repetitions);
    r.get_list("attack_rates", c.sweep.attack_rates);
    r.get("transfer_k", c.sweep.transfer_k);
    r.reject_unknown();
  }
  if (const auto* aj = root.child("attack")) {
    Reader r(*aj, "attack");
    auto& a = c.attack;
    std::string proxy(to_string(a.proxy)), scenario(to_string(a.scenario)), gran(to_string(a.granularity));
    r.get("proxy", proxy);
    r.get("epsilon", a.epsilon);
    r.get_list("k_per_block", a.k_per_block);
    r.get("scenario", scenario);
    r.get("iterations", a.iterations);
    r.get("query_granularity", gran);
    if (const auto* pj = r.child("proxy_train")) detail::read_train(*pj, "attack.proxy_train", a.proxy_train);
    r.reject_unknown();
    a.proxy = parse_proxy_kind(proxy);
    a.scenario = parse_scenario(scenario);
    a.granularity = parse_query_granularity(gran);
  }
  if (const auto* pj = root.child("pac")) {
    Reader r(*pj, "pac");
    r.get("n_instances", c.pac.n_instances);
    r.get("n_samples", c.pac.n_samples);
    r.get_list("fault_rates", c.pac_fault_rates);
    r.reject_unknown();
  }
  root.reject_unknown();
  c.validate();
  return c;
}

/// Canonical form of a config: every field, defaults included. Hashing this
/// identifies a run.
inline nlohmann::json config_to_json(const RunConfig& c) {
  const auto& s = c.corpus;
  const auto& a = c.attack;
  return {
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"rotation", c.rotation},
      {"corpus",
       {{"n_malware", s.n_malware},
        {"n_benign", s.n_benign},
        {"n_families", s.n_families},
        {"windows_min", s.windows_min},
        {"windows_max", s.windows_max},
        {"window_instructions", s.window_instructions},
        {"instructions_per_block", s.instructions_per_block},
        {"class_separation", s.class_separation},
        {"family_spread", s.family_spread},
        {"base_concentration", s.base_concentration},
        {"program_concentration", s.program_concentration},
        {"window_concentration", s.window_concentration},
        {"dormant_max_windows", s.dormant_max_windows}}},
      {"train", detail::train_json(c.train)},
      {"fault_model",
       {{"error_mode", to_string(c.fault_model.error_mode)},
        {"site", to_string(c.fault_model.site)},
        {"carry_span", c.fault_model.carry_span}}},
      {"sweep",
       {{"fault_rates", c.sweep.fault_rates},
        {"repetitions", c.sweep.repetitions},
        {"attack_rates", c.sweep.attack_rates},
        {"transfer_k", c.sweep.transfer_k}}},
      {"attack",
       {{"proxy", to_string(a.proxy)},
        {"epsilon", a.epsilon},
        {"k_per_block", a.k_per_block},
        {"scenario", to_string(a.scenario)},
        {"iterations", a.iterations},
        {"query_granularity", to_string(a.granularity)},
        {"proxy_train", detail::train_json(a.proxy_train)}}},
      {"pac", {{"n_instances", c.pac.n_instances}, {"n_samples", c.pac.n_samples}, {"fault_rates", c.pac_fault_rates}}},
  };
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace shmd
