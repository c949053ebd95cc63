#pragma once

// Shared generators for the hand-rolled property tests.

#include <random>
#include <vector>

#include "shmd/dataset.hpp"
#include "shmd/model.hpp"

namespace testutil {

using namespace shmd;

/// Random point on the 50-simplex, the shape of real window features.
inline FeatureVector random_simplex(Rng& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  FeatureVector f{};
  double s = 0.0;
  for (auto& v : f) s += (v = g(rng));
  for (auto& v : f) v /= s;
  return f;
}

/// Untrained MLP with weights scaled like a trained one. Quantized.
inline MlpModel random_model(std::uint64_t seed, std::size_t hidden = kNumFeatures) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MlpModel m = MlpModel::zeros(kNumFeatures, hidden);
  for (Eigen::Index i = 0; i < m.w1.size(); ++i) m.w1.data()[i] = n(rng) * 2.0;
  for (Eigen::Index j = 0; j < m.b1.size(); ++j) {
    m.b1(j) = n(rng) * 0.1;
    m.w2(j) = n(rng) * 0.5;
  }
  m.b2 = n(rng) * 0.1;
  return quantize(m);
}

/// Small corpus for pipeline-level tests; same generator, fewer programs.
inline CorpusSpec small_corpus_spec(std::uint64_t seed = 5) {
  CorpusSpec s;
  s.n_malware = 240;
  s.n_benign = 80;
  s.windows_min = 4;
  s.windows_max = 8;
  s.seed = seed;
  return s;
}

}  // namespace testutil
