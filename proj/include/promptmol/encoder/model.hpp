// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "promptmol/encoder/ops.hpp"
#include "promptmol/encoder/tensor.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/perturb.hpp"
#include "promptmol/random.hpp"

namespace promptmol::encoder {

// Atom features are a tuple of categorical fields; the embedding of a tuple
// is the sum of one learned row per field. Masked atoms use the mask row only.
namespace features {
inline constexpr int kElementOffset = 0;  // 10 elements
inline constexpr int kMaskRow = 10;
inline constexpr int kDegreeOffset = 11;  // degree 0..5 (clamped)
inline constexpr int kChargeOffset = 17;  // charge -2..+2 (clamped)
inline constexpr int kHydrogenOffset = 22;  // total H 0..4 (clamped)
inline constexpr int kAromaticOffset = 27;
inline constexpr int kRingOffset = 29;
inline constexpr int kNumRows = 31;
}  // namespace features

inline std::vector<int> atom_feature_rows(const molgraph::MolecularGraph& g, int i) {
  using namespace features;
  const auto& a = g.atom(i);
  return {kElementOffset + molgraph::element_index(a.element),
          kDegreeOffset + std::min(g.degree(i), 5),
          kChargeOffset + std::clamp(a.formal_charge, -2, 2) + 2,
          kHydrogenOffset + std::min(a.total_h(), 4),
          kAromaticOffset + (a.aromatic ? 1 : 0),
          kRingOffset + (a.in_ring ? 1 : 0)};
}

// Disjoint union of several graphs, ready for message passing.
struct GraphBatch {
  std::vector<std::vector<int>> atom_rows;
  std::vector<MessageEdge> edges;  // both directions
  Segments offsets{0};

  int num_graphs() const { return static_cast<int>(offsets.size()) - 1; }
  int num_atoms() const { return offsets.back(); }

  void add(const molgraph::MolecularGraph& g, const std::vector<int>& masked_atoms = {}) {
    if (g.num_atoms() == 0) throw std::invalid_argument("cannot encode an empty graph");
    const int base = offsets.back();
    std::vector<bool> masked(static_cast<std::size_t>(g.num_atoms()), false);
    for (int m : masked_atoms) masked[static_cast<std::size_t>(m)] = true;
    for (int i = 0; i < g.num_atoms(); ++i) {
      atom_rows.push_back(masked[static_cast<std::size_t>(i)] ? std::vector<int>{features::kMaskRow}
                                                              : atom_feature_rows(g, i));
    }
    for (const auto& b : g.bonds()) {
      const int type = molgraph::bond_order_index(b.order);
      edges.push_back({base + b.begin, base + b.end, type});
      edges.push_back({base + b.end, base + b.begin, type});
    }
    offsets.push_back(base + g.num_atoms());
  }

  void add(const perturb::MaskedGraph& m) { add(m.base, m.masked_atoms); }
};

enum class ValueMode : int { Projected = 0, Identity = 1 };

struct EncoderConfig {
  int hidden_dim = 64;
  int num_layers = 5;
  int num_heads = 4;
  ValueMode value_mode = ValueMode::Projected;
  bool layer_norm = false;
};

inline constexpr std::array<const char*, 3> kChannelNames = {"mcd", "scd", "cp"};
enum Channel : int { kMCD = 0, kSCD = 1, kCP = 2 };

struct GinLayer {
  Parameter* eps;
  Parameter* w1;
  Parameter* b1;
  Parameter* w2;
  Parameter* b2;
};

// Views into a ParameterStore; the store owns the tensors.
struct EncoderParams {
  EncoderConfig config;
  Parameter* atom_embedding = nullptr;
  Parameter* bond_embedding = nullptr;
  std::vector<GinLayer> layers;
};

struct PromptAggregator {
  std::string channel;
  int heads = 4;
  ValueMode value_mode = ValueMode::Projected;
  Parameter* prompt = nullptr;
  Parameter* wq = nullptr;
  Parameter* bq = nullptr;
  Parameter* wk = nullptr;  // no key bias: it shifts all logits of a head equally
  Parameter* wv = nullptr;
  Parameter* bv = nullptr;
  Parameter* wo = nullptr;
  Parameter* bo = nullptr;

  std::vector<Parameter*> parameters() const { return {prompt, wq, bq, wk, wv, bv, wo, bo}; }
  bool frozen() const { return prompt->frozen; }
  void set_frozen(bool f) const {
    for (Parameter* p : parameters()) p->frozen = f;
  }
};

inline void init_uniform(Parameter& p, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = uniform(rng, -bound, bound);
}

// Registers encoder and aggregator tensors in `store` (names enc.*, agg.*).
// A null rng leaves everything zero.
inline EncoderParams add_encoder_params(ParameterStore& store, const EncoderConfig& cfg, Rng* rng) {
  if (cfg.num_layers < 1 || cfg.hidden_dim < 1) throw std::invalid_argument("encoder needs >= 1 layer and D >= 1");
  const int d = cfg.hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto make = [&](const std::string& name, Eigen::Index r, Eigen::Index c) -> Parameter* {
    Parameter& p = store.add(name, r, c);
    if (rng) init_uniform(p, bound, *rng);
    return &p;
  };
  EncoderParams ep;
  ep.config = cfg;
  ep.atom_embedding = make("enc.atom_embedding", features::kNumRows, d);
  ep.bond_embedding = make("enc.bond_embedding", static_cast<Eigen::Index>(molgraph::kNumBondOrders), d);
  for (int k = 0; k < cfg.num_layers; ++k) {
    const std::string pre = "enc.layer" + std::to_string(k) + ".";
    GinLayer l{};
    l.eps = &store.add(pre + "eps", 1, 1);  // GIN epsilon starts at 0
    l.w1 = make(pre + "w1", d, d);
    l.b1 = make(pre + "b1", 1, d);
    l.w2 = make(pre + "w2", d, d);
    l.b2 = make(pre + "b2", 1, d);
    ep.layers.push_back(l);
  }
  return ep;
}

inline PromptAggregator add_aggregator_params(ParameterStore& store, const std::string& channel,
                                              const EncoderConfig& cfg, Rng* rng) {
  const int d = cfg.hidden_dim;
  if (cfg.num_heads < 1 || d % cfg.num_heads != 0) throw std::invalid_argument("hidden_dim must divide into heads");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto make = [&](const std::string& name, Eigen::Index r, Eigen::Index c) -> Parameter* {
    Parameter& p = store.add("agg." + channel + "." + name, r, c);
    if (rng) init_uniform(p, bound, *rng);
    return &p;
  };
  PromptAggregator a;
  a.channel = channel;
  a.heads = cfg.num_heads;
  a.value_mode = cfg.value_mode;
  a.prompt = make("prompt", 1, d);
  a.wq = make("wq", d, d);
  a.bq = make("bq", 1, d);
  a.wk = make("wk", d, d);
  a.wv = make("wv", d, d);
  a.bv = make("bv", 1, d);
  a.wo = make("wo", d, d);
  a.bo = make("bo", 1, d);
  return a;
}

// Binds views onto tensors already present in a store (e.g. after loading).
inline EncoderParams bind_encoder_params(ParameterStore& store, const EncoderConfig& cfg) {
  EncoderParams ep;
  ep.config = cfg;
  ep.atom_embedding = &store.get("enc.atom_embedding");
  ep.bond_embedding = &store.get("enc.bond_embedding");
  for (int k = 0; k < cfg.num_layers; ++k) {
    const std::string pre = "enc.layer" + std::to_string(k) + ".";
    ep.layers.push_back({&store.get(pre + "eps"), &store.get(pre + "w1"), &store.get(pre + "b1"),
                         &store.get(pre + "w2"), &store.get(pre + "b2")});
  }
  return ep;
}

inline PromptAggregator bind_aggregator_params(ParameterStore& store, const std::string& channel,
                                               const EncoderConfig& cfg) {
  const std::string pre = "agg." + channel + ".";
  PromptAggregator a;
  a.channel = channel;
  a.heads = cfg.num_heads;
  a.value_mode = cfg.value_mode;
  a.prompt = &store.get(pre + "prompt");
  a.wq = &store.get(pre + "wq");
  a.bq = &store.get(pre + "bq");
  a.wk = &store.get(pre + "wk");
  a.wv = &store.get(pre + "wv");
  a.bv = &store.get(pre + "bv");
  a.wo = &store.get(pre + "wo");
  a.bo = &store.get(pre + "bo");
  return a;
}

// h^k = mlp_k((1 + eps_k) h^{k-1} + sum over neighbours of (h_u^{k-1} + bond embedding)).
inline Var encode_nodes(Tape& tape, const EncoderParams& p, const GraphBatch& batch) {
  Var h = embedding_bag(tape.parameter(*p.atom_embedding), batch.atom_rows);
  const Var bonds = tape.parameter(*p.bond_embedding);
  for (const GinLayer& l : p.layers) {
    const Var messages = neighbor_sum(h, bonds, batch.edges);
    const Var combined = add(add(h, scale_by(h, tape.parameter(*l.eps))), messages);
    const Var hidden = relu(affine(combined, tape.parameter(*l.w1), tape.parameter(*l.b1)));
    h = affine(hidden, tape.parameter(*l.w2), tape.parameter(*l.b2));
    if (p.config.layer_norm) h = row_normalize(h);
  }
  return h;
}

struct AggregateVars {
  Var graph_vectors;  // G x D
  Var attention;      // N x heads
};

// Multi-head attention pooling with a learned prompt as the single query.
inline AggregateVars prompt_aggregate(Tape& tape, const PromptAggregator& agg, Var nodes, const Segments& offsets) {
  const Var q = affine(tape.parameter(*agg.prompt), tape.parameter(*agg.wq), tape.parameter(*agg.bq));
  const Var k = matmul(nodes, tape.parameter(*agg.wk));
  const Var att = segment_attention(q, k, offsets, agg.heads);
  if (agg.value_mode == ValueMode::Identity) return {segment_pool(att, nodes, offsets, agg.heads), att};
  const Var v = affine(nodes, tape.parameter(*agg.wv), tape.parameter(*agg.bv));
  const Var pooled = segment_pool(att, v, offsets, agg.heads);
  return {affine(pooled, tape.parameter(*agg.wo), tape.parameter(*agg.bo)), att};
}

// Encoder plus the three channel aggregators, all inside one store.
struct Model {
  ParameterStore store;
  EncoderConfig config;
  EncoderParams encoder;
  std::array<PromptAggregator, 3> aggregators;

  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

inline void init_model(Model& m, const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  m.config = cfg;
  m.encoder = add_encoder_params(m.store, cfg, &rng);
  for (int c = 0; c < 3; ++c) m.aggregators[static_cast<std::size_t>(c)] = add_aggregator_params(m.store, kChannelNames[static_cast<std::size_t>(c)], cfg, &rng);
}

inline void bind_model(Model& m, const EncoderConfig& cfg) {
  m.config = cfg;
  m.encoder = bind_encoder_params(m.store, cfg);
  for (int c = 0; c < 3; ++c) m.aggregators[static_cast<std::size_t>(c)] = bind_aggregator_params(m.store, kChannelNames[static_cast<std::size_t>(c)], cfg);
}

// Plain (tape-free from the caller's view) forward results for one graph.
struct ChannelEmbeddings {
  Matrix node_embeddings;                 // atoms x D
  std::array<Matrix, 3> graph_vectors;    // each 1 x D
  std::array<Matrix, 3> attention;        // each heads x atoms
};

inline ChannelEmbeddings embed_channels(const Model& m, const molgraph::MolecularGraph& g) {
  Tape tape;
  GraphBatch batch;
  batch.add(g);
  const Var nodes = encode_nodes(tape, m.encoder, batch);
  ChannelEmbeddings out;
  out.node_embeddings = nodes.value();
  for (std::size_t c = 0; c < 3; ++c) {
    const AggregateVars r = prompt_aggregate(tape, m.aggregators[c], nodes, batch.offsets);
    out.graph_vectors[c] = r.graph_vectors.value();
    out.attention[c] = r.attention.value().transpose();
  }
  return out;
}

// Channel graph vectors for many molecules: three G x D matrices.
inline std::array<Matrix, 3> embed_dataset(const Model& m, const std::vector<molgraph::MolecularGraph>& mols,
                                           std::size_t chunk = 64) {
  std::array<Matrix, 3> out;
  for (auto& o : out) o = Matrix::Zero(static_cast<Eigen::Index>(mols.size()), m.config.hidden_dim);
  for (std::size_t start = 0; start < mols.size(); start += chunk) {
    const std::size_t end = std::min(mols.size(), start + chunk);
    Tape tape;
    GraphBatch batch;
    for (std::size_t i = start; i < end; ++i) batch.add(mols[i]);
    const Var nodes = encode_nodes(tape, m.encoder, batch);
    for (std::size_t c = 0; c < 3; ++c) {
      const Matrix v = prompt_aggregate(tape, m.aggregators[c], nodes, batch.offsets).graph_vectors.value();
      out[c].middleRows(static_cast<Eigen::Index>(start), v.rows()) = v;
    }
  }
  return out;
}

}  // namespace promptmol::encoder
