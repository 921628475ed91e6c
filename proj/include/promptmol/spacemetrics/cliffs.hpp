// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "promptmol/chemfeat/fingerprint.hpp"
#include "promptmol/encoder/tensor.hpp"
#include "promptmol/error.hpp"

namespace promptmol::spacemetrics {

struct MMPRecord {
  int i = 0;
  int j = 0;  // always i < j
  double similarity = 0.0;
  double label_gap = 0.0;
  bool is_cliff = false;
};

// Raised when the cliff or non-cliff class has no pairs.
class EmptyClass : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<MMPRecord> detect_mmps(const std::vector<chemfeat::Fingerprint>& fps,
                                          const std::vector<chemfeat::Fingerprint>& scaffold_fps,
                                          const std::vector<double>& labels, double sim_threshold = 0.9,
                                          double cliff_gap = 1.0) {
  const std::size_t n = fps.size();
  if (scaffold_fps.size() != n || labels.size() != n) throw InputError("detect_mmps: input lengths differ");
  std::vector<MMPRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sim = std::max(chemfeat::tanimoto(fps[i], fps[j]), chemfeat::tanimoto(scaffold_fps[i], scaffold_fps[j]));
      if (sim < sim_threshold) continue;
      const double gap = std::abs(labels[i] - labels[j]);
      out.push_back({static_cast<int>(i), static_cast<int>(j), sim, gap, gap >= cliff_gap});
    }
  }
  return out;
}

// Mean embedding distance over cliff pairs divided by the mean over non-cliff
// pairs. Both means zero gives 1.0 by convention.
inline double cliff_noncliff_ratio(const encoder::Matrix& embeddings, const std::vector<MMPRecord>& mmps) {
  double cliff = 0.0, flat = 0.0;
  std::size_t nc = 0, nf = 0;
  for (const MMPRecord& r : mmps) {
    if (r.i < 0 || r.j < 0 || r.i >= embeddings.rows() || r.j >= embeddings.rows()) {
      throw InputError("cliff_noncliff_ratio: pair index out of range");
    }
    const double d = (embeddings.row(r.i) - embeddings.row(r.j)).norm();
    if (r.is_cliff) {
      cliff += d;
      ++nc;
    } else {
      flat += d;
      ++nf;
    }
  }
  if (nc == 0) throw EmptyClass("no cliff pairs");
  if (nf == 0) throw EmptyClass("no non-cliff pairs");
  cliff /= static_cast<double>(nc);
  flat /= static_cast<double>(nf);
  if (flat == 0.0) {
    if (cliff == 0.0) {
      std::clog << "warning: cliff/non-cliff distances are all zero; ratio set to 1\n";
      return 1.0;
    }
    throw NumericError("cliff_noncliff_ratio: non-cliff mean distance is zero");
  }
  return cliff / flat;
}

}  // namespace promptmol::spacemetrics
