// Acceptance run on the frozen benchmark. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.
//
// usage: acceptance <scratch dir> [config.json]

#include <chrono>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "shmd/config.hpp"
#include "shmd/pipeline.hpp"

using namespace shmd;

namespace {

// pinned tolerances
constexpr std::size_t kEquivalenceInputs = 10'000;
constexpr std::uint64_t kCalibrationOps = 1'000'000;
constexpr double kCalibrationSigmas = 3.0;
constexpr double kF1Target = 0.952;
constexpr double kF1Tolerance = 0.0005;
constexpr std::size_t kGradientPairs = 100;
constexpr double kGradientRelError = 1e-4;
constexpr double kFiniteDifferenceStep = 1e-6;

FeatureVector random_simplex(Rng& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  FeatureVector f{};
  double s = 0.0;
  for (auto& v : f) s += (v = g(rng));
  for (auto& v : f) v /= s;
  return f;
}

// Fixed-point forward pass written directly from the model weights; independent
// of the engine's MAC loop.
double reference_logit(const MlpModel& m, const FeatureVector& x) {
  const auto& f = m.fixed_point;
  std::vector<std::int64_t> h(m.hidden_dim());
  for (std::size_t j = 0; j < m.hidden_dim(); ++j) {
    std::int64_t acc = f.to_raw(m.b1(static_cast<Eigen::Index>(j)));
    for (std::size_t i = 0; i < kNumFeatures; ++i)
      acc += f.multiply(f.to_raw_saturating(x[i]),
                        f.to_raw(m.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    h[j] = std::max<std::int64_t>(std::clamp(acc, f.raw_min(), f.raw_max()), 0);
  }
  std::int64_t acc = f.to_raw(m.b2);
  for (std::size_t j = 0; j < m.hidden_dim(); ++j)
    acc += f.multiply(static_cast<std::int32_t>(h[j]), f.to_raw(m.w2(static_cast<Eigen::Index>(j))));
  return f.to_double(std::clamp(acc, f.raw_min(), f.raw_max()));
}

std::vector<FeatureVector> test_windows(const LoadedData& data, std::size_t rotation, std::size_t n) {
  std::vector<FeatureVector> xs;
  for (auto i : data.splits.fold(FoldRole::testing, rotation))
    for (const auto& f : data.corpus[i].window_features()) {
      if (xs.size() == n) return xs;
      xs.push_back(f);
    }
  Rng rng(derive_seed(1, "acceptance.pad"));
  while (xs.size() < n) xs.push_back(random_simplex(rng));
  return xs;
}

CriterionResult degenerate_equivalence(const MlpModel& victim, const std::vector<FeatureVector>& xs) {
  auto net = std::make_shared<const FixedPointNet>(victim);
  std::size_t mismatches = 0;
  for (auto mode : {ErrorMode::uniform_bit_flip, ErrorMode::msb_weighted_bit_flip})
    for (auto site : {FaultSite::output_layer, FaultSite::all_layers}) {
      StochasticEngine eng(net, FaultModel{0.0, mode, 12345, site});
      for (const auto& x : xs) {
        const double s = eng.predict(x).score;
        mismatches += s != predict_fixed(*net, x) || s != logistic(reference_logit(victim, x));
      }
    }
  return {"AC1", "fault rate 0 bit-exact with fixed-point inference", mismatches == 0,
          std::to_string(xs.size()) + " inputs x 4 engine variants, " + std::to_string(mismatches) + " mismatches"};
}

CriterionResult fault_calibration(const MlpModel& victim, const std::vector<FeatureVector>& xs,
                                  const FaultModel& base) {
  auto net = std::make_shared<const FixedPointNet>(victim);
  CriterionResult c{"AC2", "corrupted-MAC fraction within 3 binomial sigma", true, ""};
  for (double p : {0.01, 0.1, 0.5, 0.9}) {
    FaultModel fm = base;
    fm.fault_rate = p;
    fm.rng_seed = derive_seed(2, "acceptance.calibration", std::bit_cast<std::uint64_t>(p));
    StochasticEngine eng(net, fm);
    for (std::size_t i = 0; eng.macs() < kCalibrationOps; ++i) eng.predict(xs[i % xs.size()]);
    const auto n = static_cast<double>(eng.macs());
    const double sigma = std::sqrt(n * p * (1 - p));
    const double z = (static_cast<double>(eng.faults()) - n * p) / sigma;
    const bool ok = std::abs(z) <= kCalibrationSigmas;
    c.pass = c.pass && ok;
    c.detail += "p=" + fmt_short(p) + " frac=" + fmt_short(eng.faults() / n) + " z=" + fmt_short(z) + "; ";
  }
  return c;
}

CriterionResult metric_identity() {
  const auto f1 = f1_score(0.980, 0.926);
  const bool ok = f1 && std::abs(*f1 - kF1Target) <= kF1Tolerance;
  return {"AC3", "F1 from precision 0.980 and sensitivity 0.926", ok,
          "F1=" + (f1 ? fmt_short(*f1) : std::string("undefined")) + " target 0.952 +- 0.0005"};
}

CriterionResult gradient_correctness() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  Rng rng(derive_seed(4, "acceptance.gradients"));
  std::normal_distribution<double> n(0.0, 1.0);
  while (checked < kGradientPairs) {
    MlpModel m = MlpModel::zeros();
    for (Eigen::Index i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = n(rng) * 2.0;
    for (Eigen::Index j = 0; j < m.b1.size(); ++j) {
      m.b1(j) = n(rng) * 0.1;
      m.w2(j) = n(rng) * 0.5;
    }
    const auto x = random_simplex(rng);
    const double h = kFiniteDifferenceStep;
    // keep every pre-activation further from 0 than the probe can move it
    const Eigen::VectorXd z = m.w1.transpose() * Eigen::Map<const Eigen::VectorXd>(x.data(), kNumFeatures) + m.b1;
    if ((z.array().abs() < 4.0 * h * m.w1.cwiseAbs().maxCoeff()).any()) {
      ++skipped;
      continue;
    }
    const Label target = checked % 2 ? Label::malware : Label::benign;
    const auto g = gradient_wrt_input(m, x, target);
    double num = 0.0, den = 0.0;
    auto xp = x, xm = x;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      const double fd = (loss(m, xp, target) - loss(m, xm, target)) / (2 * h);
      num += (g[i] - fd) * (g[i] - fd);
      den += fd * fd;
      xp[i] = xm[i] = x[i];
    }
    if (den < 1e-16) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, std::sqrt(num / den));
    ++checked;
  }
  std::ostringstream detail;
  detail << checked << " pairs, worst relative error " << std::scientific << std::setprecision(2) << worst << " ("
         << skipped << " near-kink draws skipped)";
  return {"AC4", "input gradients match central differences", worst < kGradientRelError, detail.str()};
}

CriterionResult reproducibility(const fs::path& a, const fs::path& b) {
  std::vector<std::string> differing;
  for (const auto& t : repro_tables()) {
    if (!fs::exists(a / t) || !fs::exists(b / t) || read_file(a / t) != read_file(b / t)) differing.push_back(t);
  }
  std::string detail = differing.empty() ? std::to_string(repro_tables().size()) + " tables byte-identical" : "differ:";
  for (const auto& d : differing) detail += " " + d;
  return {"AC11", "repro twice gives byte-identical tables", differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <scratch dir> [config.json]\n";
    return 2;
  }
  const fs::path root = argv[1];
  try {
    RunConfig cfg = argc > 2 ? load_config(argv[2]) : RunConfig{};
    const auto t0 = std::chrono::steady_clock::now();

    RunConfig run_a = cfg, run_b = cfg;
    run_a.output_dir = (root / "run_a").string();
    run_b.output_dir = (root / "run_b").string();
    fs::remove_all(root);

    const auto table_results = cmd_repro(run_a);
    const auto t1 = std::chrono::steady_clock::now();

    Workspace ws(run_a.output_dir);
    const auto data = load_data(ws);
    const auto victim = load_victim(ws);
    const auto xs = test_windows(data, cfg.rotation, kEquivalenceInputs);

    std::vector<CriterionResult> results;
    results.push_back(degenerate_equivalence(victim, xs));
    results.push_back(fault_calibration(victim, xs, cfg.fault_model));
    results.push_back(metric_identity());
    results.push_back(gradient_correctness());
    results.insert(results.end(), table_results.begin(), table_results.end());

    cmd_repro(run_b);
    results.push_back(reproducibility(run_a.output_dir, run_b.output_dir));
    const auto t2 = std::chrono::steady_clock::now();

    bool all = true;
    for (const auto& r : results) {
      std::cout << r.id << ' ' << r.name << ": " << (r.pass ? "PASS" : "FAIL") << "  [" << r.detail << "]\n";
      all = all && r.pass;
    }
    std::cout << "repro " << std::chrono::duration<double>(t1 - t0).count() << " s, total "
              << std::chrono::duration<double>(t2 - t0).count() << " s\n";
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance run failed: " << e.what() << '\n';
    return 2;
  }
}
