// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "promptmol/pipeline/dataset.hpp"
#include "promptmol/random.hpp"
#include "promptmol/spacemetrics/clustering.hpp"

namespace promptmol::pipeline {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
  std::vector<int> unused;  // training-pool molecules left out by a few-shot fraction
};

namespace detail {

inline void check_ratios(const std::array<double, 3>& r) {
  double total = 0.0;
  for (double v : r) {
    if (v < 0.0) throw InputError("split ratios must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");
}

inline std::size_t quota(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

}  // namespace detail

// Groups molecules by scaffold key (acyclic molecules share the empty key),
// orders groups by size descending then key, and fills train, validation and
// test in that order. A split stays open until a group would push a
// non-empty split past its quota; an empty split always accepts the group.
inline SplitIndices scaffold_split(const std::vector<std::string>& scaffold_keys, const std::array<double, 3>& ratios) {
  detail::check_ratios(ratios);
  const std::size_t n = scaffold_keys.size();
  std::map<std::string, std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[scaffold_keys[i]].push_back(static_cast<int>(i));
  std::vector<const std::pair<const std::string, std::vector<int>>*> order;
  for (const auto& g : groups) order.push_back(&g);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->second.size() > b->second.size(); });

  const std::array<std::size_t, 2> caps = {detail::quota(ratios[0], n), detail::quota(ratios[1], n)};
  SplitIndices out;
  std::array<std::vector<int>*, 3> parts = {&out.train, &out.validation, &out.test};
  std::size_t stage = 0;
  for (const auto* g : order) {
    while (stage < 2) {
      const auto* part = parts[stage];
      if (part->empty() && caps[stage] > 0) break;
      if (part->size() + g->second.size() <= caps[stage] && caps[stage] > 0) break;
      ++stage;
    }
    parts[stage]->insert(parts[stage]->end(), g->second.begin(), g->second.end());
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return out;
}

inline SplitIndices scaffold_split(const Dataset& ds, const std::array<double, 3>& ratios) {
  std::vector<std::string> keys;
  for (const auto& g : ds.molecules) keys.push_back(scaffold_key(g));
  return scaffold_split(keys, ratios);
}

// Diversity-ordered sampling: k-means on the rows of `x`, then a round robin
// over clusters (by id) taking each cluster's members nearest-to-centroid
// first. The first share of that order is the training pool, the next the
// validation set and the remainder the test set. The training split keeps the
// first `few_shot_fraction` of the pool (at least one molecule), so a small
// fraction still spans the clusters.
inline SplitIndices stratified_split(const encoder::Matrix& x, const std::array<double, 3>& ratios,
                                     double few_shot_fraction, int k, Rng& rng) {
  detail::check_ratios(ratios);
  if (!(few_shot_fraction > 0.0 && few_shot_fraction <= 1.0)) throw InputError("few-shot fraction must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw InputError("stratified split of an empty dataset");
  const spacemetrics::KMeansResult km = spacemetrics::kmeans(x, std::min<int>(k, static_cast<int>(n)), rng);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(km.clusters.k));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(km.clusters.assignment[i])].push_back(static_cast<int>(i));
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto centroid = km.centroids.row(static_cast<Eigen::Index>(c));
    std::stable_sort(members[c].begin(), members[c].end(), [&](int a, int b) {
      return (x.row(a) - centroid).squaredNorm() < (x.row(b) - centroid).squaredNorm();
    });
  }
  std::vector<int> order;
  for (std::size_t round = 0; order.size() < n; ++round) {
    for (const auto& m : members) {
      if (round < m.size()) order.push_back(m[round]);
    }
  }
  const std::size_t n_train = std::min(n, detail::quota(ratios[0], n));
  const std::size_t n_val = std::min(n - n_train, detail::quota(ratios[1], n));
  SplitIndices out;
  const std::size_t keep =
      n_train == 0 ? 0 : std::max<std::size_t>(1, detail::quota(few_shot_fraction, n_train));
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(keep, n_train)));
  out.unused.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(keep, n_train)),
                    order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

}  // namespace promptmol::pipeline
