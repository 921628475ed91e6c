// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "promptmol/encoder.hpp"
#include "promptmol/pipeline/config.hpp"
#include "promptmol/pipeline/csv.hpp"
#include "promptmol/pipeline/dataset.hpp"
#include "promptmol/pipeline/metrics.hpp"
#include "promptmol/pipeline/pretrain.hpp"
#include "promptmol/pipeline/prompt_init.hpp"
#include "promptmol/pipeline/split.hpp"
#include "promptmol/spacemetrics.hpp"

namespace promptmol::pipeline {

struct ProbeRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_rogi = 0.0;
  double train_rand_index = 0.0;
  double val_metric = 0.0;  // R^2 or ROC-AUC
  double val_cliff_ratio = std::numeric_limits<double>::quiet_NaN();
  Weights3 weights{};
};

struct FinetuneOptions {
  // When set, channel weights are fixed to this mixture and not learned.
  std::optional<Weights3> fixed_weights;
  std::string out_dir;  // empty: no files
  std::string tag = "finetune";
  bool dump_embeddings = true;
};

struct FinetuneResult {
  std::vector<ProbeRecord> probes;
  std::optional<PromptInitResult> prompt_init;
  Weights3 final_weights{};
  bool aggregators_unchanged = false;
};

inline std::vector<double> aggregator_bytes(const encoder::Model& m) {
  std::vector<double> out;
  for (const encoder::Parameter* p : m.store.all()) {
    if (p->name.rfind("agg.", 0) != 0) continue;
    out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
  }
  return out;
}

inline bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

namespace detail {

struct FinetuneParams {
  encoder::Parameter* logits = nullptr;  // null when weights are fixed
  encoder::Parameter* head_w = nullptr;
  encoder::Parameter* head_b = nullptr;
};

inline Weights3 current_weights(const FinetuneParams& p, const std::optional<Weights3>& fixed) {
  if (fixed) return *fixed;
  return softmax3({p.logits->value(0, 0), p.logits->value(0, 1), p.logits->value(0, 2)});
}

// Composite representation and raw prediction for a list of molecules.
inline std::pair<encoder::Var, encoder::Var> forward(encoder::Tape& tape, const encoder::Model& model,
                                                     const FinetuneParams& fp, const std::optional<Weights3>& fixed,
                                                     const std::vector<const molgraph::MolecularGraph*>& mols) {
  using namespace encoder;
  GraphBatch batch;
  for (const auto* g : mols) batch.add(*g);
  const Var nodes = encode_nodes(tape, model.encoder, batch);
  std::vector<Var> parts;
  for (std::size_t c = 0; c < 3; ++c) parts.push_back(prompt_aggregate(tape, model.aggregators[c], nodes, batch.offsets).graph_vectors);
  Var rep = fixed ? mix(std::vector<double>(fixed->begin(), fixed->end()), parts)
                  : mix(softmax_row(tape.parameter(*fp.logits)), parts);
  Var pred = affine(rep, tape.parameter(*fp.head_w), tape.parameter(*fp.head_b));
  return {rep, pred};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Fine-tunes `model` on the split's training molecules with aggregators (and
// any pre-training heads) frozen. Probes run at every cfg.probe_epochs entry.
inline FinetuneResult finetune(encoder::Model& model, const Dataset& ds, const SplitIndices& split,
                               const TrainConfig& cfg, const FinetuneOptions& opt = {}) {
  validate(cfg);
  if (!ds.labeled()) throw InputError("fine-tuning needs a labeled dataset");
  if (split.train.empty()) throw InputError("fine-tuning needs training molecules");
  if (split.validation.empty()) throw InputError("fine-tuning needs validation molecules");
  if (model.store.contains("ft.head.w")) throw InputError("model already carries fine-tuning parameters");
  const bool classify = cfg.task == Task::Classification;
  const auto& labels = *ds.labels;
  if (classify) {
    for (double y : labels) {
      if (y != 0.0 && y != 1.0) throw InputError("classification labels must be 0 or 1");
    }
  }

  model.store.set_frozen("agg.", true);
  model.store.set_frozen("head.", true);
  const std::vector<double> agg_before = aggregator_bytes(model);

  std::vector<const molgraph::MolecularGraph*> train_mols, val_mols;
  std::vector<double> train_y, val_y;
  for (int i : split.train) {
    train_mols.push_back(&ds.molecules.at(static_cast<std::size_t>(i)));
    train_y.push_back(labels.at(static_cast<std::size_t>(i)));
  }
  for (int i : split.validation) {
    val_mols.push_back(&ds.molecules.at(static_cast<std::size_t>(i)));
    val_y.push_back(labels.at(static_cast<std::size_t>(i)));
  }
  auto deref = [](const std::vector<const molgraph::MolecularGraph*>& v) {
    std::vector<molgraph::MolecularGraph> out;
    for (const auto* g : v) out.push_back(*g);
    return out;
  };
  const std::vector<molgraph::MolecularGraph> train_copy = deref(train_mols), val_copy = deref(val_mols);

  FinetuneResult result;
  detail::FinetuneParams fp;
  const int d = model.config.hidden_dim;
  if (!opt.fixed_weights) {
    const PromptInitResult init = init_prompt_weights(encoder::embed_dataset(model, train_copy), train_y, cfg.grid_step);
    fp.logits = &model.store.add("ft.prompt_logits", 1, 3);
    for (int c = 0; c < 3; ++c) fp.logits->value(0, c) = init.prompt.logits[static_cast<std::size_t>(c)];
    result.prompt_init = init;
  }
  fp.head_w = &model.store.add("ft.head.w", d, 1);
  fp.head_b = &model.store.add("ft.head.b", 1, 1);
  const double mean_y = std::accumulate(train_y.begin(), train_y.end(), 0.0) / static_cast<double>(train_y.size());
  if (classify) {
    const double p = std::clamp(mean_y, 1e-3, 1.0 - 1e-3);
    fp.head_b->value(0, 0) = std::log(p / (1.0 - p));
  } else {
    fp.head_b->value(0, 0) = mean_y;
  }

  // Fixed probe inputs.
  const Featurized train_feat = featurize(train_copy);
  const Featurized val_feat = featurize(val_copy);
  const int rand_k = std::min<int>(static_cast<int>(train_copy.size()),
                                   cfg.rand_k > 0 ? cfg.rand_k : spacemetrics::default_rand_k(train_copy.size()));
  Rng ecfp_rng = derive_rng(cfg.seed, 0xECF9);
  const spacemetrics::ClusterAssignment ecfp_clusters =
      spacemetrics::kmeans(fingerprint_matrix(train_feat.fingerprints), rand_k, ecfp_rng).clusters;
  const std::vector<spacemetrics::MMPRecord> val_mmps = spacemetrics::detect_mmps(
      val_feat.fingerprints, val_feat.scaffold_fingerprints, val_y, cfg.mmp_similarity, cfg.cliff_gap);
  const std::vector<double> train_y01 = spacemetrics::minmax_normalize(train_y);

  std::optional<CsvWriter> csv;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    csv.emplace(opt.out_dir + "/" + opt.tag + "_probes.csv",
                CsvRow{"epoch", "train_loss", "train_rogi", "train_rand_index", classify ? "val_roc_auc" : "val_r2",
                       "val_cliff_ratio", "w_mcd", "w_scd", "w_cp"});
  }

  auto predict = [&](const std::vector<const molgraph::MolecularGraph*>& mols, encoder::Matrix* reps) {
    std::vector<double> out;
    encoder::Matrix all_reps(static_cast<Eigen::Index>(mols.size()), d);
    for (std::size_t s = 0; s < mols.size(); s += 64) {
      const std::vector<const molgraph::MolecularGraph*> chunk(mols.begin() + static_cast<std::ptrdiff_t>(s),
                                                                mols.begin() + static_cast<std::ptrdiff_t>(std::min(mols.size(), s + 64)));
      encoder::Tape tape;
      const auto [rep, pred] = detail::forward(tape, model, fp, opt.fixed_weights, chunk);
      all_reps.middleRows(static_cast<Eigen::Index>(s), rep.rows()) = rep.value();
      for (Eigen::Index r = 0; r < pred.rows(); ++r) out.push_back(pred.value()(r, 0));
    }
    if (reps) *reps = std::move(all_reps);
    return out;
  };

  auto dump = [&](int epoch, const encoder::Matrix& train_rep, const encoder::Matrix& val_rep) {
    if (opt.out_dir.empty() || !opt.dump_embeddings) return;
    CsvRow header{"split", "index", "label"};
    for (int c = 0; c < d; ++c) header.push_back("e" + std::to_string(c));
    CsvWriter w(opt.out_dir + "/" + opt.tag + "_embeddings_epoch" + std::to_string(epoch) + ".csv", header);
    auto emit = [&](const char* name, const std::vector<int>& idx, const encoder::Matrix& rep) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        CsvRow row{name, std::to_string(idx[r]), format_number(labels[static_cast<std::size_t>(idx[r])])};
        for (int c = 0; c < d; ++c) row.push_back(format_number(rep(static_cast<Eigen::Index>(r), c)));
        w.row(row);
      }
    };
    emit("train", split.train, train_rep);
    emit("validation", split.validation, val_rep);
  };

  auto probe = [&](int epoch) {
    ProbeRecord rec;
    rec.epoch = epoch;
    rec.weights = detail::current_weights(fp, opt.fixed_weights);
    encoder::Matrix train_rep, val_rep;
    const std::vector<double> train_pred = predict(train_mols, &train_rep);
    const std::vector<double> val_pred = predict(val_mols, &val_rep);
    double loss = 0.0;
    for (std::size_t i = 0; i < train_pred.size(); ++i) {
      if (classify) {
        const double z = train_pred[i];
        loss += std::max(z, 0.0) - z * train_y[i] + std::log1p(std::exp(-std::abs(z)));
      } else {
        loss += (train_pred[i] - train_y[i]) * (train_pred[i] - train_y[i]);
      }
    }
    rec.train_loss = loss / static_cast<double>(train_pred.size());
    rec.train_rogi = train_copy.size() >= 2
                         ? spacemetrics::rogi({train_rep, train_y01, spacemetrics::Metric::Euclidean})
                         : std::numeric_limits<double>::quiet_NaN();
    Rng rep_rng = derive_rng(cfg.seed, 0xECF9);
    rec.train_rand_index =
        spacemetrics::rand_index(spacemetrics::kmeans(train_rep, rand_k, rep_rng).clusters, ecfp_clusters);
    if (classify) {
      std::vector<double> prob;
      for (double z : val_pred) prob.push_back(detail::sigmoid(z));
      rec.val_metric = roc_auc(val_y, prob);
    } else {
      rec.val_metric = r_squared(val_y, val_pred);
    }
    try {
      rec.val_cliff_ratio = spacemetrics::cliff_noncliff_ratio(val_rep, val_mmps);
    } catch (const spacemetrics::EmptyClass&) {
      rec.val_cliff_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    result.probes.push_back(rec);
    if (csv) {
      csv->row({std::to_string(epoch), format_number(rec.train_loss), format_number(rec.train_rogi),
                format_number(rec.train_rand_index), format_number(rec.val_metric), format_number(rec.val_cliff_ratio),
                format_number(rec.weights[0]), format_number(rec.weights[1]), format_number(rec.weights[2])});
    }
    dump(epoch, train_rep, val_rep);
  };
  auto is_probe = [&](int e) {
    return std::find(cfg.probe_epochs.begin(), cfg.probe_epochs.end(), e) != cfg.probe_epochs.end();
  };

  encoder::Adam adam(cfg.adam(cfg.finetune_learning_rate));
  if (is_probe(0)) probe(0);
  std::vector<std::size_t> order(train_mols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = derive_rng(cfg.seed, 0xF1000000ULL + static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const molgraph::MolecularGraph*> mols;
      encoder::Matrix y(static_cast<Eigen::Index>(e - s), 1);
      for (std::size_t k = s; k < e; ++k) {
        mols.push_back(train_mols[order[k]]);
        y(static_cast<Eigen::Index>(k - s), 0) = train_y[order[k]];
      }
      const std::string where = "fine-tune epoch " + std::to_string(epoch) + " batch " + std::to_string(s / static_cast<std::size_t>(cfg.batch_size));
      detail::with_context(where, [&] {
        encoder::Tape tape;
        const auto [rep, pred] = detail::forward(tape, model, fp, opt.fixed_weights, mols);
        const encoder::Var loss = classify ? encoder::bce_with_logits(pred, y) : encoder::mse(pred, y);
        tape.backward(loss);
        adam.step(model.store);
        model.store.zero_grad();
        return 0;
      });
    }
    if (is_probe(epoch)) probe(epoch);
  }
  result.final_weights = detail::current_weights(fp, opt.fixed_weights);
  result.aggregators_unchanged = same_bytes(agg_before, aggregator_bytes(model));
  if (!opt.out_dir.empty()) encoder::save_model(opt.out_dir + "/" + opt.tag + ".mspc", model);
  return result;
}

// Subsets of {mcd, scd, cp} in a fixed order: singles, pairs, all three.
inline std::vector<std::array<bool, 3>> activation_masks() {
  return {{true, false, false}, {false, true, false}, {false, false, true}, {true, true, false},
          {true, false, true},  {false, true, true},  {true, true, true}};
}

inline Weights3 uniform_over(const std::array<bool, 3>& mask) {
  const int on = static_cast<int>(mask[0]) + static_cast<int>(mask[1]) + static_cast<int>(mask[2]);
  if (on == 0) throw InputError("channel activation mask is empty");
  Weights3 w{};
  for (std::size_t c = 0; c < 3; ++c) w[c] = mask[c] ? 1.0 / on : 0.0;
  return w;
}

inline std::string mask_name(const std::array<bool, 3>& mask) {
  std::string s;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!mask[c]) continue;
    if (!s.empty()) s += '+';
    s += encoder::kChannelNames[c];
  }
  return s;
}

struct AblationRow {
  std::string mask;
  Weights3 weights{};
  double val_metric = 0.0;
};

// Fine-tunes a fresh copy of the checkpoint once per activation mask with
// the channel weights fixed uniform over the active channels.
inline std::vector<AblationRow> channel_ablation(const std::string& checkpoint, const Dataset& ds,
                                                 const SplitIndices& split, TrainConfig cfg,
                                                 const std::vector<std::array<bool, 3>>& masks = activation_masks()) {
  cfg.probe_epochs = {cfg.epochs};
  std::vector<AblationRow> rows;
  for (const auto& mask : masks) {
    encoder::Model model;
    encoder::load_model(checkpoint, model);
    FinetuneOptions opt;
    opt.fixed_weights = uniform_over(mask);
    const FinetuneResult r = finetune(model, ds, split, cfg, opt);
    rows.push_back({mask_name(mask), *opt.fixed_weights, r.probes.back().val_metric});
  }
  return rows;
}

}  // namespace promptmol::pipeline
