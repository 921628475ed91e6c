// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <utility>
#include <vector>

#include "promptmol/chemfeat/descriptors.hpp"
#include "promptmol/chemfeat/fingerprint.hpp"
#include "promptmol/encoder/tensor.hpp"
#include "promptmol/error.hpp"
#include "promptmol/random.hpp"

namespace promptmol::spacemetrics {

inline constexpr std::size_t kDefaultPairSample = 1000;

using PairList = std::vector<std::pair<int, int>>;
using PairSimilarity = std::function<double(int, int)>;

// Pearson correlation. A constant series gives r = 0 and a warning.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("pearson: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    std::clog << "warning: zero-variance series in correlation; r set to 0\n";
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// All i<j pairs when there are at most `size` of them, otherwise `size`
// distinct pairs drawn uniformly, in draw order.
inline PairList sample_pairs(std::size_t n, std::size_t size, Rng& rng) {
  PairList out;
  const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;
  if (total <= size) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    return out;
  }
  std::set<std::pair<int, int>> seen;
  while (out.size() < size) {
    auto i = static_cast<int>(uniform_index(rng, n));
    auto j = static_cast<int>(uniform_index(rng, n - 1));
    if (j >= i) ++j;
    if (i > j) std::swap(i, j);
    if (seen.insert({i, j}).second) out.emplace_back(i, j);
  }
  return out;
}

// Binary presence vector over functional-group types, for Tanimoto.
inline chemfeat::Fingerprint functional_group_bits(const chemfeat::FunctionalGroupVector& fg) {
  chemfeat::Fingerprint fp(static_cast<int>(chemfeat::kNumFunctionalGroups));
  for (std::size_t t = 0; t < chemfeat::kNumFunctionalGroups; ++t) {
    if (fg.counts[t] > 0) fp.set(static_cast<int>(t));
  }
  return fp;
}

struct QsprCorrelation {
  std::array<double, 3> raw{};
  std::array<double, 3> normalized{};
};

// Per feature channel, Pearson r between (1 - similarity) and |label gap| over
// the sampled pairs; negatives are clamped to zero before normalizing to sum
// one. If no r is positive the normalized vector is uniform.
inline QsprCorrelation qspr_correlation(const std::array<PairSimilarity, 3>& sims, const std::vector<double>& labels,
                                        const PairList& pairs) {
  if (labels.size() < 2) throw InputError("qspr_correlation needs at least 2 molecules");
  QsprCorrelation out;
  std::vector<double> gap;
  gap.reserve(pairs.size());
  for (auto [i, j] : pairs) gap.push_back(std::abs(labels.at(static_cast<std::size_t>(i)) - labels.at(static_cast<std::size_t>(j))));
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> diff;
    diff.reserve(pairs.size());
    for (auto [i, j] : pairs) diff.push_back(1.0 - sims[c](i, j));
    out.raw[c] = pearson(diff, gap);
    total += std::max(0.0, out.raw[c]);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (total > 0.0) {
      out.normalized[c] = std::max(0.0, out.raw[c]) / total;
    } else {
      out.normalized[c] = 1.0 / 3.0;
    }
  }
  if (total <= 0.0) std::clog << "warning: no positive feature correlation; using uniform weights\n";
  return out;
}

struct ChannelCorrelation {
  double r = 0.0;
  std::vector<double> distance;    // L2 distance divided by its maximum over the pairs
  std::vector<double> similarity;  // conventional similarity of the same pair
};

// For each channel, correlates normalized embedding distance with the
// matching conventional similarity.
inline std::array<ChannelCorrelation, 3> correlation_report(const std::array<encoder::Matrix, 3>& embeddings,
                                                            const std::array<PairSimilarity, 3>& sims,
                                                            const PairList& pairs) {
  std::array<ChannelCorrelation, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    ChannelCorrelation& cc = out[c];
    for (auto [i, j] : pairs) {
      cc.distance.push_back((embeddings[c].row(i) - embeddings[c].row(j)).norm());
      cc.similarity.push_back(sims[c](i, j));
    }
    const double dmax = cc.distance.empty() ? 0.0 : *std::max_element(cc.distance.begin(), cc.distance.end());
    if (dmax > 0.0) {
      for (double& d : cc.distance) d /= dmax;
    }
    cc.r = pearson(cc.distance, cc.similarity);
  }
  return out;
}

}  // namespace promptmol::spacemetrics
