// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/encoder/model.hpp"
#include "promptmol/losses/objectives.hpp"
#include "promptmol/perturb.hpp"

namespace promptmol::losses {

// Prediction heads used only during pre-training (names head.*).
struct PretrainHeads {
  encoder::Parameter* ctx_w = nullptr;
  encoder::Parameter* ctx_b = nullptr;
  encoder::Parameter* fg_w = nullptr;
  encoder::Parameter* fg_b = nullptr;
  std::array<encoder::Parameter*, 3> align_w{};
  std::array<encoder::Parameter*, 3> align_b{};
};

inline constexpr std::array<const char*, 3> kAlignmentTaskNames = {"mw", "scaffold_mw", "heavy"};

inline PretrainHeads add_pretrain_heads(encoder::ParameterStore& store, int hidden_dim, Rng* rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto make = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    encoder::Parameter& p = store.add(name, r, c);
    if (rng) encoder::init_uniform(p, bound, *rng);
    return &p;
  };
  PretrainHeads h;
  h.ctx_w = make("head.cp_ctx.w", hidden_dim, static_cast<Eigen::Index>(kContextVocabulary));
  h.ctx_b = make("head.cp_ctx.b", 1, static_cast<Eigen::Index>(kContextVocabulary));
  h.fg_w = make("head.cp_fg.w", hidden_dim, static_cast<Eigen::Index>(chemfeat::kNumFunctionalGroups));
  h.fg_b = make("head.cp_fg.b", 1, static_cast<Eigen::Index>(chemfeat::kNumFunctionalGroups));
  for (std::size_t t = 0; t < 3; ++t) {
    const std::string pre = std::string("head.align.") + kAlignmentTaskNames[t];
    h.align_w[t] = make(pre + ".w", hidden_dim, 1);
    h.align_b[t] = make(pre + ".b", 1, 1);
  }
  return h;
}

inline PretrainHeads bind_pretrain_heads(encoder::ParameterStore& store) {
  PretrainHeads h;
  h.ctx_w = &store.get("head.cp_ctx.w");
  h.ctx_b = &store.get("head.cp_ctx.b");
  h.fg_w = &store.get("head.cp_fg.w");
  h.fg_b = &store.get("head.cp_fg.b");
  for (std::size_t t = 0; t < 3; ++t) {
    const std::string pre = std::string("head.align.") + kAlignmentTaskNames[t];
    h.align_w[t] = &store.get(pre + ".w");
    h.align_b[t] = &store.get(pre + ".b");
  }
  return h;
}

// One anchor molecule with its positives for both contrastive channels.
// mcd_positives[0] doubles as the masked input of the CP channel.
struct PretrainItem {
  const molgraph::MolecularGraph* molecule = nullptr;
  const chemfeat::Fingerprint* fingerprint = nullptr;
  const chemfeat::Fingerprint* scaffold_fingerprint = nullptr;
  std::vector<bool> scaffold_atoms;
  std::vector<perturb::MaskedGraph> mcd_positives;
  std::vector<const molgraph::MolecularGraph*> scd_positives;
  std::array<double, 3> descriptor_targets{};  // standardized
};

struct PretrainLossConfig {
  SamplingConfig sampling;
  MarginLossConfig margin;
};

struct BatchQuadruplets {
  std::vector<Quadruplet> mcd;
  std::vector<Quadruplet> scd;
};

inline Matrix similarity_matrix(const std::vector<const chemfeat::Fingerprint*>& fps) {
  const auto n = static_cast<Eigen::Index>(fps.size());
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      s(i, j) = s(j, i) = chemfeat::tanimoto(*fps[static_cast<std::size_t>(i)], *fps[static_cast<std::size_t>(j)]);
    }
  }
  return s;
}

// MCD margins use molecule fingerprints, SCD margins scaffold fingerprints.
inline BatchQuadruplets sample_batch_quadruplets(const std::vector<PretrainItem>& items,
                                                 const SamplingConfig& cfg, Rng& rng) {
  std::vector<const chemfeat::Fingerprint*> mol, scaf;
  for (const auto& it : items) {
    mol.push_back(it.fingerprint);
    scaf.push_back(it.scaffold_fingerprint);
  }
  BatchQuadruplets q;
  q.mcd = sample_quadruplets(similarity_matrix(mol), cfg, rng);
  q.scd = sample_quadruplets(similarity_matrix(scaf), cfg, rng);
  return q;
}

struct PretrainLoss {
  Var total;
  LossBreakdown breakdown;
};

namespace detail {

// Rows of `nodes` belonging to the listed graphs, with matching segments.
inline std::pair<Var, encoder::Segments> select_graphs(Var nodes, const encoder::GraphBatch& batch,
                                                       const std::vector<int>& graphs) {
  std::vector<int> rows;
  encoder::Segments seg{0};
  for (int g : graphs) {
    for (int r = batch.offsets[static_cast<std::size_t>(g)]; r < batch.offsets[static_cast<std::size_t>(g) + 1]; ++r) {
      rows.push_back(r);
    }
    seg.push_back(static_cast<int>(rows.size()));
  }
  return {encoder::gather_rows(nodes, rows), seg};
}

inline std::vector<int> iota(int begin, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = begin + i;
  return v;
}

}  // namespace detail

// Full pre-training objective for one batch:
//   mcd + scd + cp + 0.1 * (att_mcd + att_scd + alignment).
inline PretrainLoss overall_pretrain_loss(encoder::Tape& tape, const encoder::Model& model, const PretrainHeads& heads,
                                          const std::vector<PretrainItem>& items, const BatchQuadruplets& quads,
                                          const PretrainLossConfig& cfg) {
  using namespace encoder;
  const int b = static_cast<int>(items.size());
  if (b < 3) throw std::invalid_argument("pre-training batch needs at least 3 molecules");
  const int p = cfg.sampling.positives_per_anchor;
  GraphBatch batch;
  for (const auto& it : items) batch.add(*it.molecule);
  for (const auto& it : items) {
    if (static_cast<int>(it.mcd_positives.size()) != p) throw std::invalid_argument("wrong number of MCD positives");
    for (const auto& m : it.mcd_positives) batch.add(m);
  }
  for (const auto& it : items) {
    if (static_cast<int>(it.scd_positives.size()) != p) throw std::invalid_argument("wrong number of SCD positives");
    for (const auto* g : it.scd_positives) batch.add(*g);
  }
  const Var nodes = encode_nodes(tape, model.encoder, batch);
  const std::vector<int> anchors = detail::iota(0, b);

  auto channel = [&](int c, const std::vector<int>& graphs) {
    const auto [rows, seg] = detail::select_graphs(nodes, batch, graphs);
    return prompt_aggregate(tape, model.aggregators[static_cast<std::size_t>(c)], rows, seg);
  };
  auto with_anchors = [&](std::vector<int> extra) {
    std::vector<int> g = anchors;
    g.insert(g.end(), extra.begin(), extra.end());
    return g;
  };

  // Contrastive channels: anchors then their positives in one aggregation.
  const AggregateVars mcd = channel(kMCD, with_anchors(detail::iota(b, b * p)));
  const AggregateVars scd = channel(kSCD, with_anchors(detail::iota(b + b * p, b * p)));
  std::vector<int> cp_inputs;
  for (int i = 0; i < b; ++i) cp_inputs.push_back(b + i * p);
  const AggregateVars cp = channel(kCP, with_anchors(cp_inputs));

  auto split = [&](Var v) {
    return std::pair<Var, Var>{gather_rows(v, anchors), gather_rows(v, detail::iota(b, v.rows() - b))};
  };
  const auto [mcd_anchor, mcd_aug] = split(mcd.graph_vectors);
  const auto [scd_anchor, scd_aug] = split(scd.graph_vectors);
  const auto [cp_anchor, cp_masked] = split(cp.graph_vectors);

  const Var l_mcd = adaptive_margin_loss(mcd_anchor, mcd_aug, quads.mcd, p, cfg.margin);
  const Var l_scd = adaptive_margin_loss(scd_anchor, scd_aug, quads.scd, p, cfg.margin);

  std::vector<ContextLabel> labels;
  for (const auto& it : items) labels.push_back(it.mcd_positives[0].context_label);
  const Var ctx = affine(cp_masked, tape.parameter(*heads.ctx_w), tape.parameter(*heads.ctx_b));
  const Var fg = affine(cp_masked, tape.parameter(*heads.fg_w), tape.parameter(*heads.fg_b));
  const Var l_cp = cp_loss(ctx, fg, labels);

  // Attention rows of the anchors come first in each channel's aggregation.
  const int anchor_atoms = batch.offsets[static_cast<std::size_t>(b)];
  std::vector<int> anchor_rows = detail::iota(0, anchor_atoms);
  const Segments anchor_seg(batch.offsets.begin(), batch.offsets.begin() + b + 1);
  std::vector<std::vector<bool>> scaffolds;
  for (const auto& it : items) scaffolds.push_back(it.scaffold_atoms);
  const Var att_mcd = attention_regularizer(gather_rows(mcd.attention, anchor_rows), anchor_seg, AttentionTarget::AllAtoms);
  const Var att_scd =
      attention_regularizer(gather_rows(scd.attention, anchor_rows), anchor_seg, AttentionTarget::ScaffoldOnly, scaffolds);

  Matrix targets(b, 3);
  for (int i = 0; i < b; ++i) {
    for (int t = 0; t < 3; ++t) targets(i, t) = items[static_cast<std::size_t>(i)].descriptor_targets[static_cast<std::size_t>(t)];
  }
  std::array<LinearHead, 3> align_heads;
  for (std::size_t t = 0; t < 3; ++t) {
    align_heads[t] = {tape.parameter(*heads.align_w[t]), tape.parameter(*heads.align_b[t])};
  }
  const Var l_align = alignment_regularizer({mcd_anchor, scd_anchor, cp_anchor}, align_heads, targets);
  const Var regu = add(add(att_mcd, att_scd), l_align);

  PretrainLoss out;
  out.total = combine_losses(l_mcd, l_scd, l_cp, regu);
  out.breakdown = {l_mcd.scalar(), l_scd.scalar(), l_cp.scalar(), regu.scalar(), out.total.scalar()};
  return out;
}

}  // namespace promptmol::losses
