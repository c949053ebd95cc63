#pragma once

// Program traces, the synthetic corpus generator, fold partitioning and the
// trace file format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shmd/error.hpp"
#include "shmd/rng.hpp"

namespace shmd {

inline constexpr std::size_t kNumFeatures = 50;

/// Instruction-category frequencies of one detection window (a point on the simplex).
using FeatureVector = std::array<double, kNumFeatures>;
using CountVector = std::array<std::uint64_t, kNumFeatures>;

enum class Label : std::uint8_t { benign = 0, malware = 1 };

inline std::string_view to_string(Label l) { return l == Label::malware ? "malware" : "benign"; }

inline Label parse_label(std::string_view s) {
  if (s == "malware") return Label::malware;
  if (s == "benign") return Label::benign;
  throw Error("unknown label '" + std::string(s) + "'");
}

inline constexpr std::array<std::string_view, 5> kMalwareFamilies = {
    "backdoor", "rogue", "password_stealer", "trojan", "worm"};
inline constexpr std::array<std::string_view, 4> kBenignFamilies = {
    "browser", "text_editor", "system_program", "cpu_benchmark"};

inline std::span<const std::string_view> families_for(Label l) {
  if (l == Label::malware) return kMalwareFamilies;
  return kBenignFamilies;
}

inline bool is_known_family(Label l, std::string_view family) {
  const auto fams = families_for(l);
  return std::find(fams.begin(), fams.end(), family) != fams.end();
}

/// Raw instruction-category counts observed in one detection window.
struct TraceWindow {
  CountVector counts{};
  std::uint64_t basic_blocks = 0;

  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

  FeatureVector features() const {
    const auto t = total();
    if (t == 0) throw Error("window has zero instructions");
    FeatureVector f{};
    const double inv = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < kNumFeatures; ++i) f[i] = static_cast<double>(counts[i]) * inv;
    return f;
  }

  void validate() const {
    if (total() == 0) throw Error("window has zero instructions");
    if (basic_blocks == 0) throw Error("non-empty window must span at least one basic block");
  }

  friend bool operator==(const TraceWindow&, const TraceWindow&) = default;
};

/// One labelled program: an ordered list of detection windows.
class ProgramTrace {
 public:
  ProgramTrace(std::string program_id, Label label, std::string family,
               std::vector<TraceWindow> windows)
      : program_id_(std::move(program_id)),
        label_(label),
        family_(std::move(family)),
        windows_(std::move(windows)) {
    if (windows_.empty()) throw Error("trace '" + program_id_ + "' has no windows");
    if (!is_known_family(label_, family_))
      throw Error("trace '" + program_id_ + "': family '" + family_ + "' is not a " +
                  std::string(to_string(label_)) + " family");
    for (const auto& w : windows_) w.validate();
  }

  const std::string& program_id() const { return program_id_; }
  Label label() const { return label_; }
  const std::string& family() const { return family_; }
  const std::vector<TraceWindow>& windows() const { return windows_; }

  /// Same program (id, label, family) with different window contents.
  ProgramTrace with_windows(std::vector<TraceWindow> windows) const {
    return ProgramTrace(program_id_, label_, family_, std::move(windows));
  }

  std::vector<FeatureVector> window_features() const {
    std::vector<FeatureVector> out;
    out.reserve(windows_.size());
    for (const auto& w : windows_) out.push_back(w.features());
    return out;
  }

  /// Mean of the per-window feature vectors.
  FeatureVector mean_features() const {
    FeatureVector m{};
    for (const auto& w : windows_) {
      const auto f = w.features();
      for (std::size_t i = 0; i < kNumFeatures; ++i) m[i] += f[i];
    }
    const double inv = 1.0 / static_cast<double>(windows_.size());
    for (auto& v : m) v *= inv;
    return m;
  }

  friend bool operator==(const ProgramTrace&, const ProgramTrace&) = default;

 private:
  std::string program_id_;
  Label label_;
  std::string family_;
  std::vector<TraceWindow> windows_;
};

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Parameters of the synthetic Dirichlet-multinomial corpus.
///
/// Every (label, family) cell has a mean instruction mix. Each program draws its
/// own mix around its cell mean (program_concentration), each window draws around
/// the program mix (window_concentration), and counts are multinomial over
/// window_instructions. Malware programs may start with a dormant prefix whose
/// windows follow a shared loader profile before the payload behaviour begins.
struct CorpusSpec {
  std::size_t n_malware = 3000;
  std::size_t n_benign = 600;
  std::size_t n_families = 5;
  std::size_t windows_min = 8;
  std::size_t windows_max = 16;
  std::uint64_t seed = 7;

  std::uint64_t window_instructions = 10000;
  double instructions_per_block = 8.0;

  double class_separation = 0.4;
  double family_spread = 0.2;
  double base_concentration = 2.0;
  double program_concentration = 100.0;
  double window_concentration = 3000.0;
  std::size_t dormant_max_windows = 6;

  void validate() const {
    if (n_families == 0) throw ConfigError("corpus.n_families", "must be at least 1");
    if (n_families > kMalwareFamilies.size())
      throw ConfigError("corpus.n_families", "at most " + std::to_string(kMalwareFamilies.size()));
    if (n_malware < 4 || n_benign < 4)
      throw ConfigError("corpus", "n_malware and n_benign must both be >= 4");
    if (windows_min == 0 || windows_max < windows_min)
      throw ConfigError("corpus.windows_per_program", "need 1 <= min <= max");
    if (window_instructions == 0) throw ConfigError("corpus.window_instructions", "must be > 0");
    if (!(instructions_per_block >= 1.0))
      throw ConfigError("corpus.instructions_per_block", "must be >= 1");
    if (!(program_concentration > 0) || !(window_concentration > 0) || !(base_concentration > 0))
      throw ConfigError("corpus", "concentrations must be > 0");
  }
};

namespace detail {

inline FeatureVector sample_dirichlet(Rng& rng, const FeatureVector& alpha) {
  FeatureVector g{};
  double sum = 0.0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    sum = 0.0;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      std::gamma_distribution<double> gamma(alpha[i], 1.0);
      g[i] = gamma(rng);
      sum += g[i];
    }
    if (sum > 0.0) break;
  }
  if (!(sum > 0.0)) throw Error("dirichlet draw degenerated");
  for (auto& v : g) v /= sum;
  return g;
}

inline CountVector sample_multinomial(Rng& rng, std::uint64_t n, const FeatureVector& p) {
  CountVector c{};
  std::uint64_t remaining = n;
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < kNumFeatures && remaining > 0; ++i) {
    const double q = mass > 0.0 ? std::clamp(p[i] / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::uint64_t> bin(remaining, q);
    c[i] = bin(rng);
    remaining -= c[i];
    mass -= p[i];
  }
  c[kNumFeatures - 1] += remaining;
  return c;
}

inline FeatureVector softmax(const std::array<double, kNumFeatures>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  FeatureVector out{};
  double s = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    out[i] = std::exp(logits[i] - mx);
    s += out[i];
  }
  for (auto& v : out) v /= s;
  return out;
}

}  // namespace detail

/// Deterministic synthetic corpus; malware first, then benign, families round-robin.
inline std::vector<ProgramTrace> generate_synthetic_corpus(const CorpusSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "corpus.profiles"));
  std::normal_distribution<double> normal(0.0, 1.0);

  FeatureVector base_alpha;
  base_alpha.fill(spec.base_concentration);
  const FeatureVector base = detail::sample_dirichlet(rng, base_alpha);
  std::array<double, kNumFeatures> class_dir{};
  for (auto& v : class_dir) v = normal(rng);

  auto cell_mean = [&](double class_sign) {
    std::array<double, kNumFeatures> logit{};
    for (std::size_t i = 0; i < kNumFeatures; ++i)
      logit[i] = std::log(base[i]) + 0.5 * class_sign * spec.class_separation * class_dir[i] +
                 spec.family_spread * normal(rng);
    return detail::softmax(logit);
  };

  const std::size_t n_benign_fams = std::min(spec.n_families, kBenignFamilies.size());
  std::vector<FeatureVector> malware_means, benign_means;
  for (std::size_t f = 0; f < spec.n_families; ++f) malware_means.push_back(cell_mean(+1.0));
  for (std::size_t f = 0; f < n_benign_fams; ++f) benign_means.push_back(cell_mean(-1.0));
  const FeatureVector loader_mean = cell_mean(-1.0);

  const auto block_count = [&](std::uint64_t total) {
    return std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(static_cast<double>(total) / spec.instructions_per_block)));
  };

  auto draw_window = [&](Rng& r, const FeatureVector& program_mix) {
    FeatureVector alpha;
    for (std::size_t i = 0; i < kNumFeatures; ++i)
      alpha[i] = std::max(program_mix[i] * spec.window_concentration, 1e-3);
    for (;;) {
      const auto mix = detail::sample_dirichlet(r, alpha);
      TraceWindow w;
      w.counts = detail::sample_multinomial(r, spec.window_instructions, mix);
      const auto t = w.total();
      if (t == 0) continue;  // redraw empty windows
      w.basic_blocks = block_count(t);
      return w;
    }
  };

  auto program_mix = [&](Rng& r, const FeatureVector& mean) {
    FeatureVector alpha;
    for (std::size_t i = 0; i < kNumFeatures; ++i)
      alpha[i] = std::max(mean[i] * spec.program_concentration, 1e-3);
    return detail::sample_dirichlet(r, alpha);
  };

  std::vector<ProgramTrace> corpus;
  corpus.reserve(spec.n_malware + spec.n_benign);
  auto emit = [&](Label label, std::size_t n, const std::vector<FeatureVector>& means) {
    const auto fams = families_for(label);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t fam = i % means.size();
      const std::string id = std::string(to_string(label)) + "_" + std::to_string(i);
      Rng r(derive_seed(spec.seed, id));
      const auto mix = program_mix(r, means[fam]);
      std::uniform_int_distribution<std::size_t> nwin(spec.windows_min, spec.windows_max);
      const std::size_t n_windows = nwin(r);
      std::size_t dormant = 0;
      if (label == Label::malware && spec.dormant_max_windows > 0) {
        std::uniform_int_distribution<std::size_t> d(0, std::min(spec.dormant_max_windows, n_windows - 1));
        dormant = d(r);
      }
      std::vector<TraceWindow> windows;
      windows.reserve(n_windows);
      const auto loader_mix = dormant > 0 ? program_mix(r, loader_mean) : mix;
      for (std::size_t w = 0; w < n_windows; ++w)
        windows.push_back(draw_window(r, w < dormant ? loader_mix : mix));
      corpus.emplace_back(id, label, std::string(fams[fam]), std::move(windows));
    }
  };
  emit(Label::malware, spec.n_malware, malware_means);
  emit(Label::benign, spec.n_benign, benign_means);
  return corpus;
}

// ---------------------------------------------------------------------------
// Folds

inline constexpr std::size_t kNumFolds = 4;

enum class FoldRole : std::uint8_t { victim_training_1, victim_training_2, attacker_training, testing };

/// Four disjoint, class- and family-balanced folds. Folds hold indices into the corpus.
struct CorpusSplits {
  std::array<std::vector<std::size_t>, kNumFolds> folds;
  std::uint64_t seed = 0;

  /// Fold index that plays `role` under cross-validation rotation `rotation` (0..3).
  static std::size_t fold_for(FoldRole role, std::size_t rotation) {
    return (static_cast<std::size_t>(role) + rotation) % kNumFolds;
  }

  const std::vector<std::size_t>& fold(FoldRole role, std::size_t rotation = 0) const {
    return folds[fold_for(role, rotation)];
  }

  std::vector<std::size_t> victim_training(std::size_t rotation = 0) const {
    auto out = fold(FoldRole::victim_training_1, rotation);
    const auto& b = fold(FoldRole::victim_training_2, rotation);
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

/// Stratified split: every (label, family) cell is shuffled and dealt round-robin,
/// continuing the dealer position across cells so fold sizes differ by at most one.
inline CorpusSplits split_folds(std::span<const ProgramTrace> corpus, std::uint64_t seed) {
  std::vector<std::pair<std::pair<Label, std::string>, std::vector<std::size_t>>> cells;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto key = std::make_pair(corpus[i].label(), corpus[i].family());
    auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) { return c.first == key; });
    if (it == cells.end()) {
      cells.push_back({key, {}});
      it = cells.end() - 1;
    }
    it->second.push_back(i);
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [key, members] : cells) {
    if (members.size() < kNumFolds)
      throw Error("cannot balance folds: cell (" + std::string(to_string(key.first)) + ", " +
                  key.second + ") has " + std::to_string(members.size()) + " traces, need >= " +
                  std::to_string(kNumFolds));
  }
  CorpusSplits out;
  out.seed = seed;
  Rng rng(derive_seed(seed, "folds"));
  std::size_t dealer = 0;
  for (auto& [key, members] : cells) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto idx : members) out.folds[dealer++ % kNumFolds].push_back(idx);
  }
  for (auto& f : out.folds) std::sort(f.begin(), f.end());
  return out;
}

template <class Indices>
std::vector<ProgramTrace> select(std::span<const ProgramTrace> corpus, const Indices& idx) {
  std::vector<ProgramTrace> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Trace file: JSON Lines, one trace per line:
//   {"program_id":"malware_0","label":"malware","family":"worm",
//    "windows":[{"counts":[50 integers],"basic_blocks":1250}, ...]}

inline nlohmann::json trace_to_json(const ProgramTrace& t) {
  nlohmann::json j;
  j["program_id"] = t.program_id();
  j["label"] = std::string(to_string(t.label()));
  j["family"] = t.family();
  auto& ws = j["windows"] = nlohmann::json::array();
  for (const auto& w : t.windows())
    ws.push_back({{"counts", w.counts}, {"basic_blocks", w.basic_blocks}});
  return j;
}

inline ProgramTrace trace_from_json(const nlohmann::json& j) {
  const auto& ws = j.at("windows");
  if (!ws.is_array()) throw Error("windows must be an array");
  std::vector<TraceWindow> windows;
  for (const auto& wj : ws) {
    const auto& cj = wj.at("counts");
    if (!cj.is_array() || cj.size() != kNumFeatures)
      throw Error("counts must hold exactly " + std::to_string(kNumFeatures) + " integers");
    TraceWindow w;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      if (!cj[i].is_number_integer()) throw Error("counts must be integers");
      if (cj[i].get<std::int64_t>() < 0) throw Error("negative count at category " + std::to_string(i));
      w.counts[i] = cj[i].get<std::uint64_t>();
    }
    const auto& bj = wj.at("basic_blocks");
    if (!bj.is_number_integer() || bj.get<std::int64_t>() < 0) throw Error("basic_blocks must be a non-negative integer");
    w.basic_blocks = bj.get<std::uint64_t>();
    windows.push_back(w);
  }
  return ProgramTrace(j.at("program_id").get<std::string>(), parse_label(j.at("label").get<std::string>()),
                      j.at("family").get<std::string>(), std::move(windows));
}

inline void save_traces(std::span<const ProgramTrace> traces, std::ostream& os) {
  for (const auto& t : traces) os << trace_to_json(t).dump() << '\n';
}

inline std::vector<ProgramTrace> load_traces(std::istream& is) {
  std::vector<ProgramTrace> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trace_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("trace file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void save_traces(std::span<const ProgramTrace> traces, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  save_traces(traces, os);
}

inline std::vector<ProgramTrace> load_traces(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return load_traces(is);
}

}  // namespace shmd
