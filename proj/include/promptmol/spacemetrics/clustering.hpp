// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "promptmol/encoder/tensor.hpp"
#include "promptmol/error.hpp"
#include "promptmol/random.hpp"

namespace promptmol::spacemetrics {

using encoder::Matrix;

struct ClusterAssignment {
  std::vector<int> assignment;
  int k = 0;
};

struct KMeansResult {
  ClusterAssignment clusters;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
};

namespace detail {

inline double sq_dist(const Matrix& x, Eigen::Index i, const Matrix& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

inline int count_distinct_rows(const Matrix& x) {
  std::vector<Eigen::Index> reps;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    bool seen = false;
    for (Eigen::Index r : reps) {
      if (x.row(i) == x.row(r)) {
        seen = true;
        break;
      }
    }
    if (!seen) reps.push_back(i);
  }
  return static_cast<int>(reps.size());
}

// Relabels ids in order of first appearance and drops unused ids.
inline ClusterAssignment compact(const std::vector<int>& raw) {
  ClusterAssignment out;
  std::vector<int> remap;
  out.assignment.reserve(raw.size());
  for (int id : raw) {
    if (static_cast<std::size_t>(id) >= remap.size()) remap.resize(static_cast<std::size_t>(id) + 1, -1);
    int& m = remap[static_cast<std::size_t>(id)];
    if (m < 0) m = out.k++;
    out.assignment.push_back(m);
  }
  return out;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. When the data hold fewer distinct
// points than k, the effective k is the number of distinct points so that no
// cluster is empty. Ties in assignment go to the lowest centroid index.
inline KMeansResult kmeans(const Matrix& x, int k, Rng& rng, int max_iter = 100, double tol = 1e-6) {
  const auto n = static_cast<int>(x.rows());
  if (n == 0) throw InputError("kmeans: no points");
  if (k < 1) throw InputError("kmeans: k must be at least 1");
  if (k > n) throw InputError("kmeans: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  k = std::min(k, detail::count_distinct_rows(x));

  Matrix centroids(k, x.cols());
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, static_cast<std::size_t>(n));
  centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
  for (int c = 1; c < k; ++c) {
    for (int i = 0; i < n; ++i) {
      nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], detail::sq_dist(x, i, centroids, c - 1));
    }
    centroids.row(c) = x.row(static_cast<Eigen::Index>(weighted_index(rng, nearest)));
  }

  KMeansResult res;
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  std::vector<double> best_d(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = detail::sq_dist(x, i, centroids, 0);
      for (int c = 1; c < k; ++c) {
        const double d = detail::sq_dist(x, i, centroids, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      assign[static_cast<std::size_t>(i)] = best;
      best_d[static_cast<std::size_t>(i)] = bd;
    }
    Matrix next = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it to the point currently farthest from its centroid.
      const auto far = static_cast<int>(std::max_element(best_d.begin(), best_d.end()) - best_d.begin());
      next.row(c) = x.row(far);
      best_d[static_cast<std::size_t>(far)] = 0.0;
    }
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    if (shift < tol) break;
  }
  // Final assignment against the converged centroids.
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double bd = detail::sq_dist(x, i, centroids, 0);
    for (int c = 1; c < k; ++c) {
      const double d = detail::sq_dist(x, i, centroids, c);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
    res.inertia += bd;
  }
  res.clusters = detail::compact(assign);
  Matrix used(res.clusters.k, x.cols());
  std::vector<int> old_of_new(static_cast<std::size_t>(res.clusters.k), -1);
  for (int i = 0; i < n; ++i) {
    old_of_new[static_cast<std::size_t>(res.clusters.assignment[static_cast<std::size_t>(i)])] = assign[static_cast<std::size_t>(i)];
  }
  for (int c = 0; c < res.clusters.k; ++c) used.row(c) = centroids.row(old_of_new[static_cast<std::size_t>(c)]);
  res.centroids = std::move(used);
  return res;
}

// Fraction of point pairs on which the two partitions agree, via the
// contingency table.
inline double rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
  if (a.assignment.size() != b.assignment.size()) throw InputError("rand_index: assignments differ in length");
  const std::size_t n = a.assignment.size();
  if (n < 2) return 1.0;
  const int ka = 1 + *std::max_element(a.assignment.begin(), a.assignment.end());
  const int kb = 1 + *std::max_element(b.assignment.begin(), b.assignment.end());
  std::vector<double> table(static_cast<std::size_t>(ka) * static_cast<std::size_t>(kb), 0.0);
  std::vector<double> ra(static_cast<std::size_t>(ka), 0.0), rb(static_cast<std::size_t>(kb), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<std::size_t>(a.assignment[i]);
    const auto y = static_cast<std::size_t>(b.assignment[i]);
    table[x * static_cast<std::size_t>(kb) + y] += 1.0;
    ra[x] += 1.0;
    rb[y] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double both = 0.0, in_a = 0.0, in_b = 0.0;
  for (double v : table) both += pairs(v);
  for (double v : ra) in_a += pairs(v);
  for (double v : rb) in_b += pairs(v);
  const double total = pairs(static_cast<double>(n));
  // Agreements: together in both, plus apart in both.
  return (total + 2.0 * both - in_a - in_b) / total;
}

inline int default_rand_k(std::size_t n) {
  return std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n) / 2.0))));
}

}  // namespace promptmol::spacemetrics
