// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <limits>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/encoder.hpp"
#include "promptmol/pipeline/dataset.hpp"
#include "promptmol/spacemetrics.hpp"

namespace promptmol::pipeline {

// Conventional similarities matched to the channels: molecule fingerprint
// (mcd), scaffold fingerprint (scd), functional-group presence (cp).
struct ChannelSimilarities {
  std::vector<chemfeat::Fingerprint> fg_bits;
  std::array<spacemetrics::PairSimilarity, 3> sims;
};

inline ChannelSimilarities channel_similarities(const Featurized& f) {
  ChannelSimilarities cs;
  for (const auto& fg : f.functional_groups) cs.fg_bits.push_back(spacemetrics::functional_group_bits(fg));
  const Featurized* fp = &f;
  const std::vector<chemfeat::Fingerprint>* fgb = &cs.fg_bits;
  cs.sims = {
      [fp](int i, int j) { return chemfeat::tanimoto(fp->fingerprints[static_cast<std::size_t>(i)], fp->fingerprints[static_cast<std::size_t>(j)]); },
      [fp](int i, int j) {
        return chemfeat::tanimoto(fp->scaffold_fingerprints[static_cast<std::size_t>(i)], fp->scaffold_fingerprints[static_cast<std::size_t>(j)]);
      },
      [fgb](int i, int j) { return chemfeat::tanimoto((*fgb)[static_cast<std::size_t>(i)], (*fgb)[static_cast<std::size_t>(j)]); }};
  return cs;
}

// Head-averaged scd attention summed over scaffold atoms, averaged over
// molecules that have a scaffold. Returns NaN when none has one.
inline double scaffold_attention_mass(const encoder::Model& model, const std::vector<molgraph::MolecularGraph>& mols) {
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& g : mols) {
    const std::vector<bool> mask = chemfeat::scaffold_atom_mask(g);
    bool any = false;
    for (bool b : mask) any = any || b;
    if (!any) continue;
    const encoder::ChannelEmbeddings e = encoder::embed_channels(model, g);
    const encoder::Matrix& att = e.attention[encoder::kSCD];  // heads x atoms
    double mass = 0.0;
    for (Eigen::Index a = 0; a < att.cols(); ++a) {
      if (mask[static_cast<std::size_t>(a)]) mass += att.col(a).mean();
    }
    total += mass;
    ++used;
  }
  return used == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(used);
}

inline spacemetrics::HierarchyInputs hierarchy_inputs(const std::array<encoder::Matrix, 3>& channels, const Featurized& f) {
  spacemetrics::HierarchyInputs in;
  in.channels = channels;
  in.functional_groups = encoder::Matrix(static_cast<Eigen::Index>(f.functional_groups.size()),
                                         static_cast<Eigen::Index>(chemfeat::kNumFunctionalGroups));
  for (std::size_t i = 0; i < f.functional_groups.size(); ++i) {
    for (std::size_t t = 0; t < chemfeat::kNumFunctionalGroups; ++t) {
      in.functional_groups(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = f.functional_groups[i].normalized[t];
    }
  }
  in.scaffold_fps = f.scaffold_fingerprints;
  in.scaffold_keys = f.scaffold_keys;
  return in;
}

}  // namespace promptmol::pipeline
