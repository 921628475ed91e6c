// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "promptmol/encoder/tensor.hpp"
#include "promptmol/error.hpp"
#include "promptmol/spacemetrics/rogi.hpp"

namespace promptmol::pipeline {

using Weights3 = std::array<double, 3>;

struct PromptWeights {
  Weights3 weights{};  // softmax(logits)
  Weights3 logits{};
};

inline Weights3 softmax3(const Weights3& logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  Weights3 w{};
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) total += (w[c] = std::exp(logits[c] - m));
  for (double& v : w) v /= total;
  return w;
}

inline PromptWeights weights_from_simplex(const Weights3& w) {
  PromptWeights p;
  for (std::size_t c = 0; c < 3; ++c) p.logits[c] = std::log(w[c] + 1e-8);
  p.weights = softmax3(p.logits);
  return p;
}

// All (a, b, c) with a + b + c = 1 on multiples of `step`, in lexicographic
// order (a ascending, then b); the first point is (0, 0, 1).
inline std::vector<Weights3> simplex_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw InputError("grid step must lie in (0, 1]");
  const double m_real = 1.0 / step;
  const auto m = static_cast<int>(std::llround(m_real));
  if (std::abs(m_real - m) > 1e-9 * m_real) throw InputError("grid step must divide 1");
  std::vector<Weights3> out;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m - i; ++j) {
      out.push_back({static_cast<double>(i) / m, static_cast<double>(j) / m, static_cast<double>(m - i - j) / m});
    }
  }
  return out;
}

inline encoder::Matrix composite(const std::array<encoder::Matrix, 3>& channels, const Weights3& w) {
  return w[0] * channels[0] + w[1] * channels[1] + w[2] * channels[2];
}

struct PromptInitResult {
  PromptWeights prompt;
  Weights3 grid_point{};  // the exact grid minimizer
  double best_rogi = 0.0;
  std::vector<Weights3> candidates;
  std::vector<double> rogi_values;  // aligned with candidates
};

// Exhaustive grid search for the channel mixture whose composite
// representation has the lowest ROGI against min-max normalized labels.
// Ties keep the first candidate in grid order.
inline PromptInitResult init_prompt_weights(const std::array<encoder::Matrix, 3>& channels,
                                            const std::vector<double>& labels, double step = 0.05) {
  PromptInitResult res;
  res.candidates = simplex_grid(step);
  const std::vector<double> y = spacemetrics::minmax_normalize(labels);
  bool first = true;
  for (const Weights3& w : res.candidates) {
    const double r = spacemetrics::rogi({composite(channels, w), y, spacemetrics::Metric::Euclidean});
    res.rogi_values.push_back(r);
    if (first || r < res.best_rogi) {
      res.best_rogi = r;
      res.grid_point = w;
      first = false;
    }
  }
  res.prompt = weights_from_simplex(res.grid_point);
  return res;
}

}  // namespace promptmol::pipeline
