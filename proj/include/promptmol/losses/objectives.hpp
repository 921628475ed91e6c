// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "promptmol/encoder/ops.hpp"
#include "promptmol/losses/context_label.hpp"
#include "promptmol/random.hpp"

namespace promptmol::losses {

using encoder::Matrix;
using encoder::Var;

inline constexpr double kRegularizationFactor = 0.1;
inline constexpr double kSamplingFloor = 1e-6;

struct Margins {
  double alpha1_ij = 0.0;
  double alpha1_ik = 0.0;
  double alpha2_ijk = 0.0;
};

inline Margins adaptive_margins(double sim_ij, double sim_ik, double alpha_offset = 1.0) {
  return {alpha_offset * (1.0 - sim_ij), alpha_offset * (1.0 - sim_ik), alpha_offset * (sim_ij - sim_ik)};
}

struct Quadruplet {
  int anchor = 0;
  int positive = 0;  // augmentation index in [0, positives per anchor)
  int j = 0;
  int k = 0;
  double alpha1_ij = 0.0;
  double alpha1_ik = 0.0;
  double alpha2_ijk = 0.0;
};

enum class SamplingMode { GapWeighted, Uniform };

struct SamplingConfig {
  int budget_per_anchor = 4;
  int positives_per_anchor = 5;
  double alpha_offset = 1.0;
  SamplingMode mode = SamplingMode::GapWeighted;
};

// Per anchor, ordered negative pairs (j, k) with sim_ij >= sim_ik are drawn
// without replacement, weight (sim_ij - sim_ik) + 1e-6 (or uniformly), up to
// the budget. Pairs with a negative alpha2 are never candidates.
inline std::vector<Quadruplet> sample_quadruplets(const Matrix& sim, const SamplingConfig& cfg, Rng& rng) {
  const auto n = static_cast<int>(sim.rows());
  if (sim.cols() != n) throw std::invalid_argument("similarity matrix must be square");
  if (n < 3) throw std::invalid_argument("quadruplet sampling needs a batch of at least 3");
  if (cfg.positives_per_anchor < 1 || cfg.budget_per_anchor < 0) throw std::invalid_argument("bad sampling config");
  std::vector<Quadruplet> out;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, int>> cand;
    std::vector<double> weight;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const double gap = sim(i, j) - sim(i, k);
        if (gap < 0.0) continue;
        cand.emplace_back(j, k);
        weight.push_back(cfg.mode == SamplingMode::Uniform ? 1.0 : gap + kSamplingFloor);
      }
    }
    for (int b = 0; b < cfg.budget_per_anchor && !cand.empty(); ++b) {
      const std::size_t pick = weighted_index(rng, weight);
      const auto [j, k] = cand[pick];
      const Margins m = adaptive_margins(sim(i, j), sim(i, k), cfg.alpha_offset);
      const int pos = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.positives_per_anchor)));
      out.push_back({i, pos, j, k, m.alpha1_ij, m.alpha1_ik, m.alpha2_ijk});
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
      weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return out;
}

// Switches that reduce the quadruplet loss to the plain triplet form.
struct MarginLossConfig {
  bool use_alpha2 = true;
  std::optional<double> fixed_alpha1;
};

// Mean over quadruplets of
//   [a1_ij + d(i,i') - d(i,j)]+ + [a1_ik + d(i,i') - d(i,k)]+ + [a2 + d(i,j) - d(i,k)]+
// Row i of `emb` embeds anchor i; row i*P + p of `aug` embeds its p-th positive.
inline Var adaptive_margin_loss(Var emb, Var aug, const std::vector<Quadruplet>& quads, int positives_per_anchor,
                                const MarginLossConfig& cfg = {}) {
  encoder::Tape& tape = *emb.tape;
  if (quads.empty()) return tape.constant(Matrix::Zero(1, 1));
  const auto q = static_cast<Eigen::Index>(quads.size());
  std::vector<std::pair<int, int>> pos_pairs, ij_pairs, ik_pairs;
  Matrix a1ij(q, 1), a1ik(q, 1), a2(q, 1);
  for (Eigen::Index r = 0; r < q; ++r) {
    const Quadruplet& t = quads[static_cast<std::size_t>(r)];
    pos_pairs.emplace_back(t.anchor, t.anchor * positives_per_anchor + t.positive);
    ij_pairs.emplace_back(t.anchor, t.j);
    ik_pairs.emplace_back(t.anchor, t.k);
    a1ij(r, 0) = cfg.fixed_alpha1.value_or(t.alpha1_ij);
    a1ik(r, 0) = cfg.fixed_alpha1.value_or(t.alpha1_ik);
    a2(r, 0) = t.alpha2_ijk;
  }
  using namespace encoder;
  const Var d_pos = pair_distance(emb, aug, pos_pairs);
  const Var d_ij = pair_distance(emb, emb, ij_pairs);
  const Var d_ik = pair_distance(emb, emb, ik_pairs);
  Var total = add(sum(relu(add_constant(sub(d_pos, d_ij), a1ij))), sum(relu(add_constant(sub(d_pos, d_ik), a1ik))));
  if (cfg.use_alpha2) total = add(total, sum(relu(add_constant(sub(d_ij, d_ik), a2))));
  return scale(total, 1.0 / static_cast<double>(q));
}

// BCE-with-logits over the element/bond presence vocabulary plus mean
// smooth-L1 on the functional-group vector. Row g of each prediction belongs
// to labels[g].
inline Var cp_loss(Var context_logits, Var fg_pred, const std::vector<ContextLabel>& labels) {
  const auto g = static_cast<Eigen::Index>(labels.size());
  if (context_logits.rows() != g || context_logits.cols() != static_cast<Eigen::Index>(kContextVocabulary) ||
      fg_pred.rows() != g || fg_pred.cols() != static_cast<Eigen::Index>(chemfeat::kNumFunctionalGroups)) {
    throw std::invalid_argument("cp_loss prediction dims do not match the vocabulary");
  }
  Matrix ctx(g, static_cast<Eigen::Index>(kContextVocabulary));
  Matrix fg(g, static_cast<Eigen::Index>(chemfeat::kNumFunctionalGroups));
  for (Eigen::Index r = 0; r < g; ++r) {
    const auto& l = labels[static_cast<std::size_t>(r)];
    const auto mh = l.multi_hot();
    for (std::size_t c = 0; c < mh.size(); ++c) ctx(r, static_cast<Eigen::Index>(c)) = mh[c];
    for (std::size_t c = 0; c < l.fg_target.size(); ++c) fg(r, static_cast<Eigen::Index>(c)) = l.fg_target[c];
  }
  return encoder::add(encoder::bce_with_logits(context_logits, ctx), encoder::smooth_l1_mean(fg_pred, fg));
}

enum class AttentionTarget { AllAtoms, ScaffoldOnly };

// Smooth-L1 between head-averaged attention and a uniform target, averaged
// over the atoms of each graph and then over graphs. In scaffold-only mode
// graphs without scaffold atoms are skipped. `scaffold[g][x]` flags atoms.
inline Var attention_regularizer(Var attention, const encoder::Segments& offsets, AttentionTarget mode,
                                 const std::vector<std::vector<bool>>& scaffold = {}) {
  encoder::Tape& tape = *attention.tape;
  const int graphs = static_cast<int>(offsets.size()) - 1;
  if (mode == AttentionTarget::ScaffoldOnly && static_cast<int>(scaffold.size()) != graphs) {
    throw std::invalid_argument("attention_regularizer needs one scaffold mask per graph");
  }
  const Eigen::Index n = attention.rows();
  Matrix target = Matrix::Zero(n, 1);
  Matrix weight = Matrix::Zero(n, 1);
  int used = 0;
  for (int s = 0; s < graphs; ++s) {
    const int lo = offsets[static_cast<std::size_t>(s)], hi = offsets[static_cast<std::size_t>(s) + 1];
    int count = hi - lo;
    if (mode == AttentionTarget::ScaffoldOnly) {
      const auto& mask = scaffold[static_cast<std::size_t>(s)];
      if (static_cast<int>(mask.size()) != hi - lo) throw std::invalid_argument("scaffold mask size mismatch");
      count = 0;
      for (bool b : mask) count += b ? 1 : 0;
      if (count == 0) continue;
    }
    ++used;
    for (int x = lo; x < hi; ++x) {
      const bool on = mode == AttentionTarget::AllAtoms || scaffold[static_cast<std::size_t>(s)][static_cast<std::size_t>(x - lo)];
      target(x, 0) = on ? 1.0 / count : 0.0;
      weight(x, 0) = 1.0 / (hi - lo);
    }
  }
  if (used == 0) return tape.constant(Matrix::Zero(1, 1));
  weight /= used;
  return encoder::smooth_l1(encoder::row_mean(attention), target, weight);
}

inline constexpr std::array<std::array<double, 3>, 3> kAlignmentPresets = {{
    {0.45, 0.1, 0.45},                    // molecular weight
    {0.1, 0.45, 0.45},                    // scaffold weight
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},    // heavy-atom count
}};

struct LinearHead {
  Var weight;  // D x 1
  Var bias;    // 1 x 1
};

// Sum over the three descriptor tasks of the mean smooth-L1 between
// head_t(sum_c preset_t[c] h^[c]) and the standardized target column t.
inline Var alignment_regularizer(const std::array<Var, 3>& channels, const std::array<LinearHead, 3>& heads,
                                 const Matrix& targets,
                                 const std::array<std::array<double, 3>, 3>& presets = kAlignmentPresets) {
  if (targets.cols() != 3 || targets.rows() != channels[0].rows()) {
    throw std::invalid_argument("alignment targets must be G x 3");
  }
  std::vector<Var> parts(channels.begin(), channels.end());
  Var total{};
  for (std::size_t t = 0; t < 3; ++t) {
    const std::vector<double> w(presets[t].begin(), presets[t].end());
    const Var composite = encoder::mix(w, parts);
    const Var pred = encoder::affine(composite, heads[t].weight, heads[t].bias);
    const Var term = encoder::smooth_l1_mean(pred, targets.col(static_cast<Eigen::Index>(t)));
    total = t == 0 ? term : encoder::add(total, term);
  }
  return total;
}

struct LossBreakdown {
  double mcd = 0.0;
  double scd = 0.0;
  double cp = 0.0;
  double regu = 0.0;
  double total = 0.0;
};

// mcd + scd + cp + 0.1 * regu.
inline Var combine_losses(Var mcd, Var scd, Var cp, Var regu) {
  return encoder::add(encoder::add(encoder::add(mcd, scd), cp), encoder::scale(regu, kRegularizationFactor));
}

inline double combine_losses(double mcd, double scd, double cp, double regu) {
  return mcd + scd + cp + kRegularizationFactor * regu;
}

}  // namespace promptmol::losses
