// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "promptmol/encoder.hpp"
#include "promptmol/losses.hpp"
#include "promptmol/perturb.hpp"
#include "promptmol/pipeline/config.hpp"
#include "promptmol/pipeline/csv.hpp"
#include "promptmol/pipeline/dataset.hpp"

namespace promptmol::pipeline {

// Everything about one corpus molecule that does not change between epochs.
struct PretrainEntry {
  int index = 0;  // row in the source dataset
  const molgraph::MolecularGraph* molecule = nullptr;
  chemfeat::Fingerprint fingerprint;
  chemfeat::Fingerprint scaffold_fingerprint;
  std::vector<bool> scaffold_atoms;
  chemfeat::FunctionalGroupVector functional_groups;
  std::vector<molgraph::MolecularGraph> scd_positives;
  std::array<double, 3> descriptor_targets{};
};

struct SkippedMolecule {
  int index = 0;
  std::string reason;
};

struct PretrainCorpus {
  std::vector<PretrainEntry> entries;
  std::vector<SkippedMolecule> skipped;
};

inline constexpr int kPerturbAttempts = 20;

// Keeps molecules that have a scaffold, at least two atoms and `positives`
// successful scaffold-invariant perturbations. Descriptor targets are
// z-scored over the kept molecules.
inline PretrainCorpus prepare_pretrain_corpus(const Dataset& ds, const perturb::FragmentPool& pool, int positives,
                                              std::uint64_t seed) {
  PretrainCorpus corpus;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& g = ds.molecules[i];
    const int idx = static_cast<int>(i);
    if (g.num_atoms() < 2) {
      corpus.skipped.push_back({idx, "fewer than 2 atoms"});
      continue;
    }
    PretrainEntry e;
    e.index = idx;
    e.molecule = &g;
    e.scaffold_atoms = chemfeat::scaffold_atom_mask(g);
    if (std::find(e.scaffold_atoms.begin(), e.scaffold_atoms.end(), true) == e.scaffold_atoms.end()) {
      corpus.skipped.push_back({idx, "no scaffold"});
      continue;
    }
    Rng rng = derive_rng(seed, 0x5CD00000ULL + i);
    std::string failure;
    for (int p = 0; p < positives && failure.empty(); ++p) {
      for (int attempt = 0;; ++attempt) {
        try {
          e.scd_positives.push_back(perturb::scaffold_invariant_perturb(g, pool, rng));
          break;
        } catch (const perturb::NoPerturbationSite& ex) {
          failure = ex.what();
          break;
        } catch (const perturb::NoValidFragment& ex) {
          if (attempt + 1 >= kPerturbAttempts) {
            failure = ex.what();
            break;
          }
        }
      }
    }
    if (!failure.empty()) {
      corpus.skipped.push_back({idx, failure});
      continue;
    }
    e.fingerprint = chemfeat::morgan_fingerprint(g);
    e.scaffold_fingerprint = chemfeat::morgan_fingerprint(chemfeat::bemis_murcko_scaffold(g));
    e.functional_groups = chemfeat::functional_group_descriptors(g);
    const auto d = chemfeat::scalar_descriptors(g);
    e.descriptor_targets = {d.molecular_weight, d.scaffold_weight, static_cast<double>(d.heavy_atom_count)};
    corpus.entries.push_back(std::move(e));
  }
  if (!corpus.entries.empty()) {
    for (std::size_t t = 0; t < 3; ++t) {
      double mean = 0.0, sq = 0.0;
      for (const auto& e : corpus.entries) mean += e.descriptor_targets[t];
      mean /= static_cast<double>(corpus.entries.size());
      for (const auto& e : corpus.entries) sq += (e.descriptor_targets[t] - mean) * (e.descriptor_targets[t] - mean);
      double sd = std::sqrt(sq / static_cast<double>(corpus.entries.size()));
      if (sd == 0.0) sd = 1.0;
      for (auto& e : corpus.entries) e.descriptor_targets[t] = (e.descriptor_targets[t] - mean) / sd;
    }
  }
  return corpus;
}

// Contiguous chunks of `batch` items; a trailing chunk smaller than 3 is
// merged into its predecessor.
inline std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) out.emplace_back(s, std::min(n, s + batch));
  if (out.size() > 1 && out.back().second - out.back().first < 3) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

struct EpochLoss {
  int epoch = 0;
  losses::LossBreakdown loss;  // mean over the epoch's batches
};

struct PretrainReport {
  std::vector<EpochLoss> epochs;
  std::vector<std::string> checkpoints;
  std::size_t used = 0;
  std::vector<SkippedMolecule> skipped;
};

inline std::string checkpoint_name(const std::string& stem, int epoch) {
  return stem + "_epoch" + std::to_string(epoch) + ".mspc";
}

namespace detail {

template <typename F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  }
}

}  // namespace detail

// Self-supervised pre-training. `model` is initialized here from cfg.seed.
// Files (when out_dir is non-empty): pretrain_loss.csv, a checkpoint per
// probe epoch within [0, epochs], and pretrain.mspc at the end.
inline PretrainReport pretrain(encoder::Model& model, const Dataset& corpus_ds, const TrainConfig& cfg,
                               const std::string& out_dir = {},
                               const std::function<void(const EpochLoss&)>& on_epoch = {}) {
  validate(cfg);
  const perturb::FragmentPool pool =
      perturb::build_fragment_pool(cfg.fragment_pool.empty() ? std::nullopt : std::optional<std::string>(cfg.fragment_pool));
  const PretrainCorpus corpus = prepare_pretrain_corpus(corpus_ds, pool, cfg.positives, cfg.seed);
  if (corpus.entries.size() < 3) {
    throw InputError("pre-training needs at least 3 perturbable molecules, got " + std::to_string(corpus.entries.size()));
  }
  PretrainReport report;
  report.used = corpus.entries.size();
  report.skipped = corpus.skipped;

  encoder::init_model(model, cfg.encoder_config(), cfg.seed);
  Rng head_rng = derive_rng(cfg.seed, 0x4EAD);
  const losses::PretrainHeads heads = losses::add_pretrain_heads(model.store, cfg.hidden_dim, &head_rng);
  encoder::Adam adam(cfg.adam(cfg.learning_rate));
  losses::PretrainLossConfig loss_cfg;
  loss_cfg.sampling = cfg.sampling();

  std::optional<CsvWriter> csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.emplace(out_dir + "/pretrain_loss.csv", CsvRow{"epoch", "mcd", "scd", "cp", "regu", "total"});
  }
  auto maybe_checkpoint = [&](int epoch) {
    if (out_dir.empty()) return;
    if (std::find(cfg.probe_epochs.begin(), cfg.probe_epochs.end(), epoch) == cfg.probe_epochs.end()) return;
    const std::string path = out_dir + "/" + checkpoint_name("pretrain", epoch);
    encoder::save_model(path, model);
    report.checkpoints.push_back(path);
  };
  maybe_checkpoint(0);

  std::vector<std::size_t> order(corpus.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batches = make_batches(order.size(), static_cast<std::size_t>(cfg.batch_size));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = derive_rng(cfg.seed, 0xE0000000ULL + static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    losses::LossBreakdown acc;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(bi);
      const losses::LossBreakdown b = detail::with_context(where, [&] {
        std::vector<losses::PretrainItem> items;
        for (std::size_t k = batches[bi].first; k < batches[bi].second; ++k) {
          const PretrainEntry& e = corpus.entries[order[k]];
          losses::PretrainItem it;
          it.molecule = e.molecule;
          it.fingerprint = &e.fingerprint;
          it.scaffold_fingerprint = &e.scaffold_fingerprint;
          it.scaffold_atoms = e.scaffold_atoms;
          for (int p = 0; p < cfg.positives; ++p) {
            it.mcd_positives.push_back(perturb::subgraph_mask(*e.molecule, rng, e.functional_groups));
          }
          for (const auto& g : e.scd_positives) it.scd_positives.push_back(&g);
          it.descriptor_targets = e.descriptor_targets;
          items.push_back(std::move(it));
        }
        const losses::BatchQuadruplets quads = losses::sample_batch_quadruplets(items, loss_cfg.sampling, rng);
        encoder::Tape tape;
        const losses::PretrainLoss loss = losses::overall_pretrain_loss(tape, model, heads, items, quads, loss_cfg);
        tape.backward(loss.total);
        adam.step(model.store);
        model.store.zero_grad();
        return loss.breakdown;
      });
      acc.mcd += b.mcd;
      acc.scd += b.scd;
      acc.cp += b.cp;
      acc.regu += b.regu;
      acc.total += b.total;
    }
    const double nb = static_cast<double>(batches.size());
    EpochLoss row{epoch, {acc.mcd / nb, acc.scd / nb, acc.cp / nb, acc.regu / nb, acc.total / nb}};
    report.epochs.push_back(row);
    if (csv) {
      csv->row({std::to_string(epoch), format_number(row.loss.mcd), format_number(row.loss.scd),
                format_number(row.loss.cp), format_number(row.loss.regu), format_number(row.loss.total)});
    }
    if (on_epoch) on_epoch(row);
    maybe_checkpoint(epoch);
  }
  if (!out_dir.empty()) {
    const std::string path = out_dir + "/pretrain.mspc";
    encoder::save_model(path, model);
    report.checkpoints.push_back(path);
  }
  return report;
}

}  // namespace promptmol::pipeline
