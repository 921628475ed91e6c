// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/encoder/tensor.hpp"
#include "promptmol/error.hpp"

namespace promptmol::spacemetrics {

using encoder::Matrix;

enum class Metric { Euclidean, TanimotoDistance };

// Points are the rows of `vectors`.
struct LabeledSpace {
  Matrix vectors;
  std::vector<double> labels;
  Metric metric = Metric::Euclidean;
};

// Continuous Tanimoto distance; equals 1 - Jaccard on 0/1 vectors.
inline double tanimoto_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double ab = a.dot(b);
  const double denom = a.squaredNorm() + b.squaredNorm() - ab;
  return denom <= 0.0 ? 0.0 : 1.0 - ab / denom;
}

inline Matrix pairwise_distances(const Matrix& x, Metric metric) {
  const Eigen::Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = metric == Metric::Euclidean ? (x.row(i) - x.row(j)).norm() : tanimoto_distance(x.row(i), x.row(j));
      d(i, j) = d(j, i) = v;
    }
  }
  return d;
}

struct Merge {
  int a;
  int b;
  double height;
};

// Complete-linkage agglomeration by the nearest-neighbour-chain algorithm,
// O(n^2) time. Returned merges are sorted by height; a and b are the lowest
// original point indices of the two merged clusters.
inline std::vector<Merge> complete_linkage(Matrix d) {
  const auto n = static_cast<int>(d.rows());
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  std::vector<Merge> merges;
  std::vector<int> chain;
  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (int i = 0; i < n; ++i) {
        if (active[static_cast<std::size_t>(i)]) {
          chain.push_back(i);
          break;
        }
      }
    }
    while (true) {
      const int x = chain.back();
      const int prev = chain.size() > 1 ? chain[chain.size() - 2] : -1;
      int best = prev;
      double best_d = prev >= 0 ? d(x, prev) : INFINITY;
      for (int y = 0; y < n; ++y) {
        if (y == x || !active[static_cast<std::size_t>(y)]) continue;
        if (d(x, y) < best_d) {
          best_d = d(x, y);
          best = y;
        }
      }
      if (best == prev) {
        chain.pop_back();
        chain.pop_back();
        // Cluster `x` absorbs `prev`; Lance-Williams update for complete linkage.
        const int keep = std::min(x, prev), drop = std::max(x, prev);
        merges.push_back({keep, drop, best_d});
        for (int y = 0; y < n; ++y) {
          if (!active[static_cast<std::size_t>(y)] || y == keep || y == drop) continue;
          d(keep, y) = d(y, keep) = std::max(d(keep, y), d(drop, y));
        }
        active[static_cast<std::size_t>(drop)] = false;
        --remaining;
        break;
      }
      chain.push_back(best);
    }
  }
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& l, const Merge& r) { return l.height < r.height; });
  return merges;
}

struct RogiTracePoint {
  double t;      // threshold at which this clustering starts to hold
  double sigma;  // size-weighted std of cluster-mean labels
};

struct RogiResult {
  double value = 0.0;
  double sigma0 = 0.0;
  std::vector<RogiTracePoint> trace;  // one point per distinct merge height
};

inline std::vector<double> minmax_normalize(const std::vector<double>& y) {
  if (y.empty()) return {};
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  std::vector<double> out(y.size(), 0.0);
  if (*hi - *lo <= 0.0) return out;
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - *lo) / (*hi - *lo);
  return out;
}

namespace detail {

class WeightedDispersion {
 public:
  explicit WeightedDispersion(const std::vector<double>& labels)
      : parent_(labels.size()), size_(labels.size(), 1), sum_(labels), n_(static_cast<double>(labels.size())) {
    std::iota(parent_.begin(), parent_.end(), 0);
    mean_ = std::accumulate(labels.begin(), labels.end(), 0.0) / n_;
  }

  int find(int v) {
    while (parent_[static_cast<std::size_t>(v)] != v) {
      parent_[static_cast<std::size_t>(v)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(v)])];
      v = parent_[static_cast<std::size_t>(v)];
    }
    return v;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
    sum_[static_cast<std::size_t>(a)] += sum_[static_cast<std::size_t>(b)];
  }

  // Recomputed from the current roots; a running update loses accuracy
  // through cancellation as clusters grow.
  double sigma() const {
    double ss = 0.0;
    for (std::size_t r = 0; r < parent_.size(); ++r) {
      if (parent_[r] != static_cast<int>(r)) continue;
      const double m = sum_[r] / size_[r];
      ss += size_[r] * (m - mean_) * (m - mean_);
    }
    return std::sqrt(ss / n_);
  }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  std::vector<double> sum_;
  double n_;
  double mean_ = 0.0;
};

}  // namespace detail

// Roughness index: integral over t in [0, 1] of 2 (sigma_0 - sigma_t), where
// sigma_t is the dispersion of cluster-mean labels after complete-linkage
// merging up to normalized distance t. Throws NumericError if sigma_t ever
// increases (a bug guard; merging cannot raise it).
// The matrix must be symmetric but need not satisfy the triangle inequality.
inline RogiResult rogi_from_distances(Matrix d, const std::vector<double>& labels) {
  const auto n = static_cast<std::size_t>(d.rows());
  if (n < 2) throw InputError("rogi needs at least 2 points");
  if (static_cast<std::size_t>(d.cols()) != n) throw InputError("rogi: distance matrix must be square");
  if (labels.size() != n) throw InputError("rogi: label count does not match vectors");
  for (double y : labels) {
    if (!(y >= 0.0 && y <= 1.0)) throw InputError("rogi: labels must lie in [0, 1]");
  }
  RogiResult res;
  const double dmax = d.maxCoeff();
  detail::WeightedDispersion disp(labels);
  res.sigma0 = disp.sigma();
  res.trace.push_back({0.0, res.sigma0});
  if (dmax <= 0.0) {
    res.value = 0.0;
    return res;
  }
  d /= dmax;
  const std::vector<Merge> merges = complete_linkage(std::move(d));
  double prev_sigma = res.sigma0;
  double prev_t = 0.0;
  double integral = 0.0;
  for (std::size_t m = 0; m < merges.size();) {
    const double t = std::min(1.0, merges[m].height);
    integral += 2.0 * (res.sigma0 - prev_sigma) * (t - prev_t);
    while (m < merges.size() && std::min(1.0, merges[m].height) == t) {
      disp.unite(merges[m].a, merges[m].b);
      ++m;
    }
    const double sigma = disp.sigma();
    if (sigma > prev_sigma + 1e-12) throw NumericError("rogi: dispersion increased after a merge");
    if (t == res.trace.back().t) {
      res.trace.back().sigma = sigma;
    } else {
      res.trace.push_back({t, sigma});
    }
    prev_sigma = sigma;
    prev_t = t;
  }
  integral += 2.0 * (res.sigma0 - prev_sigma) * (1.0 - prev_t);
  res.value = integral;
  return res;
}

inline RogiResult rogi_detailed(const LabeledSpace& space) {
  if (space.vectors.rows() < 2) throw InputError("rogi needs at least 2 points");
  if (space.labels.size() != static_cast<std::size_t>(space.vectors.rows())) {
    throw InputError("rogi: label count does not match vectors");
  }
  return rogi_from_distances(pairwise_distances(space.vectors, space.metric), space.labels);
}

inline double rogi(const LabeledSpace& space) { return rogi_detailed(space).value; }

}  // namespace promptmol::spacemetrics
