// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "promptmol/chemfeat/fingerprint.hpp"
#include "promptmol/spacemetrics/clustering.hpp"

namespace promptmol::spacemetrics {

struct HierarchyInputs {
  // Graph-level embeddings indexed mcd, scd, cp.
  std::array<Matrix, 3> channels;
  Matrix functional_groups;  // one descriptor row per molecule
  std::vector<chemfeat::Fingerprint> scaffold_fps;
  std::vector<std::string> scaffold_keys;  // canonical scaffold string per molecule
};

struct StageClusterReport {
  int stage = 0;  // 1, 2 or 3
  int cluster = 0;
  int size = 0;
  int unique_scaffolds = 0;
  // Mean intra-cluster over mean cluster-to-rest distance of the stage's
  // reference features; NaN when undefined or when the stage has none.
  double intra_inter_ratio = std::numeric_limits<double>::quiet_NaN();
};

struct HierarchyResult {
  std::array<ClusterAssignment, 3> stages;
  std::vector<StageClusterReport> report;
};

namespace detail {

// Mean within-cluster distance over mean distance from members to non-members.
inline double intra_inter_ratio(const std::vector<int>& members, const std::vector<bool>& inside,
                                const std::function<double(int, int)>& dist) {
  double intra = 0.0, inter = 0.0;
  std::size_t ni = 0, ne = 0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      intra += dist(members[a], members[b]);
      ++ni;
    }
    for (std::size_t o = 0; o < inside.size(); ++o) {
      if (inside[o]) continue;
      inter += dist(members[a], static_cast<int>(o));
      ++ne;
    }
  }
  if (ni == 0 || ne == 0 || inter == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (intra / static_cast<double>(ni)) / (inter / static_cast<double>(ne));
}

// Splits every parent cluster with k-means on `x`; clusters with fewer than
// k members are kept whole. Child ids are dense and ordered by parent.
inline ClusterAssignment refine(const ClusterAssignment& parent, const Matrix& x, int k, Rng& rng) {
  ClusterAssignment out;
  out.assignment.assign(parent.assignment.size(), -1);
  for (int p = 0; p < parent.k; ++p) {
    std::vector<int> members;
    for (std::size_t i = 0; i < parent.assignment.size(); ++i) {
      if (parent.assignment[i] == p) members.push_back(static_cast<int>(i));
    }
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < k || k <= 1) {
      for (int i : members) out.assignment[static_cast<std::size_t>(i)] = out.k;
      ++out.k;
      continue;
    }
    Matrix sub(static_cast<Eigen::Index>(members.size()), x.cols());
    for (std::size_t r = 0; r < members.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = x.row(members[r]);
    const KMeansResult km = kmeans(sub, k, rng);
    for (std::size_t r = 0; r < members.size(); ++r) {
      out.assignment[static_cast<std::size_t>(members[r])] = out.k + km.clusters.assignment[r];
    }
    out.k += km.clusters.k;
  }
  return out;
}

}  // namespace detail

// Three nested k-means stages on the cp, then scd, then mcd embeddings.
// For the top_m largest clusters of each stage, reports size, number of
// distinct scaffolds and, for stages 1 and 2, the intra/inter distance ratio
// of functional-group descriptors (Euclidean) and scaffold fingerprints
// (Tanimoto distance) respectively.
inline HierarchyResult hierarchical_three_stage(const HierarchyInputs& in, const std::array<int, 3>& stage_ks, Rng& rng,
                                                int top_m = 10) {
  const auto n = static_cast<std::size_t>(in.channels[0].rows());
  for (const Matrix& m : in.channels) {
    if (static_cast<std::size_t>(m.rows()) != n) throw InputError("hierarchy: channel row counts differ");
  }
  if (n == 0) throw InputError("hierarchy: no molecules");
  if (static_cast<std::size_t>(in.functional_groups.rows()) != n || in.scaffold_fps.size() != n ||
      in.scaffold_keys.size() != n) {
    throw InputError("hierarchy: descriptor inputs do not match embeddings");
  }
  HierarchyResult res;
  ClusterAssignment root{std::vector<int>(n, 0), 1};
  constexpr std::array<int, 3> kStageChannel = {2, 1, 0};  // cp, scd, mcd
  const ClusterAssignment* parent = &root;
  for (int s = 0; s < 3; ++s) {
    res.stages[static_cast<std::size_t>(s)] =
        detail::refine(*parent, in.channels[static_cast<std::size_t>(kStageChannel[static_cast<std::size_t>(s)])],
                       stage_ks[static_cast<std::size_t>(s)], rng);
    parent = &res.stages[static_cast<std::size_t>(s)];
  }

  auto fg_dist = [&](int a, int b) { return (in.functional_groups.row(a) - in.functional_groups.row(b)).norm(); };
  auto scaffold_dist = [&](int a, int b) {
    return 1.0 - chemfeat::tanimoto(in.scaffold_fps[static_cast<std::size_t>(a)], in.scaffold_fps[static_cast<std::size_t>(b)]);
  };
  for (int s = 0; s < 3; ++s) {
    const ClusterAssignment& ca = res.stages[static_cast<std::size_t>(s)];
    std::vector<std::vector<int>> members(static_cast<std::size_t>(ca.k));
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(ca.assignment[i])].push_back(static_cast<int>(i));
    std::vector<int> order(static_cast<std::size_t>(ca.k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return members[static_cast<std::size_t>(a)].size() > members[static_cast<std::size_t>(b)].size();
    });
    const std::size_t shown = std::min(order.size(), static_cast<std::size_t>(std::max(0, top_m)));
    for (std::size_t r = 0; r < shown; ++r) {
      const auto& mem = members[static_cast<std::size_t>(order[r])];
      StageClusterReport rep;
      rep.stage = s + 1;
      rep.cluster = order[r];
      rep.size = static_cast<int>(mem.size());
      std::set<std::string> keys;
      for (int i : mem) keys.insert(in.scaffold_keys[static_cast<std::size_t>(i)]);
      rep.unique_scaffolds = static_cast<int>(keys.size());
      std::vector<bool> inside(n, false);
      for (int i : mem) inside[static_cast<std::size_t>(i)] = true;
      if (s == 0) rep.intra_inter_ratio = detail::intra_inter_ratio(mem, inside, fg_dist);
      if (s == 1) rep.intra_inter_ratio = detail::intra_inter_ratio(mem, inside, scaffold_dist);
      res.report.push_back(rep);
    }
  }
  return res;
}

}  // namespace promptmol::spacemetrics
