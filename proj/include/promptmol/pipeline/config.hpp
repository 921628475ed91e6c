// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptmol/encoder/model.hpp"
#include "promptmol/encoder/optim.hpp"
#include "promptmol/error.hpp"
#include "promptmol/losses/objectives.hpp"

namespace promptmol::pipeline {

enum class SplitKind { Scaffold, Stratified };
enum class Task { Regression, Classification };

struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;           // pre-training
  double finetune_learning_rate = 1e-4;  // fine-tuning
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double alpha_offset = 1.0;
  int quadruplet_budget = 4;
  int positives = 5;
  std::vector<int> probe_epochs = {0, 10, 20, 50, 100};
  SplitKind split = SplitKind::Scaffold;
  std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
  double few_shot_fraction = 1.0;
  int stratify_k = 10;

  // Model shape.
  int hidden_dim = 64;
  int num_layers = 5;
  int num_heads = 4;

  // Fine-tuning and probing.
  Task task = Task::Regression;
  double grid_step = 0.05;
  int rand_k = 0;  // 0 selects max(2, round(sqrt(n / 2)))
  std::size_t pair_sample = 1000;
  double mmp_similarity = 0.9;
  double cliff_gap = 1.0;
  std::array<int, 3> hierarchy_ks = {10, 3, 2};
  std::string smiles_column = "smiles";
  std::string label_column = "label";
  std::string fragment_pool;  // empty selects the built-in pool

  encoder::EncoderConfig encoder_config() const {
    encoder::EncoderConfig c;
    c.hidden_dim = hidden_dim;
    c.num_layers = num_layers;
    c.num_heads = num_heads;
    return c;
  }

  encoder::AdamConfig adam(double lr) const { return {lr, beta1, beta2, epsilon}; }

  losses::SamplingConfig sampling() const {
    losses::SamplingConfig s;
    s.budget_per_anchor = quadruplet_budget;
    s.positives_per_anchor = positives;
    s.alpha_offset = alpha_offset;
    return s;
  }
};

inline void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw InputError("config: " + m); };
  if (c.epochs < 0) fail("epochs must be >= 0");
  if (c.batch_size < 3) fail("batch_size must be >= 3");
  if (!(c.learning_rate > 0.0) || !(c.finetune_learning_rate > 0.0)) fail("learning rates must be > 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) fail("moment decays must lie in [0, 1)");
  if (!(c.epsilon > 0.0)) fail("epsilon must be > 0");
  if (c.positives < 1) fail("positives must be >= 1");
  if (c.quadruplet_budget < 0) fail("quadruplet_budget must be >= 0");
  for (int e : c.probe_epochs) {
    if (e < 0 || e > c.epochs) fail("probe epoch " + std::to_string(e) + " outside [0, epochs]");
  }
  double total = 0.0;
  for (double r : c.split_ratios) {
    if (r < 0.0) fail("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("split ratios must sum to 1");
  if (!(c.few_shot_fraction > 0.0 && c.few_shot_fraction <= 1.0)) fail("few_shot_fraction must lie in (0, 1]");
  if (c.stratify_k < 1) fail("stratify_k must be >= 1");
  if (c.hidden_dim < 1 || c.num_layers < 1 || c.num_heads < 1 || c.hidden_dim % c.num_heads != 0) {
    fail("hidden_dim must be a positive multiple of num_heads");
  }
  if (!(c.grid_step > 0.0 && c.grid_step <= 1.0)) fail("grid_step must lie in (0, 1]");
  if (c.rand_k < 0) fail("rand_k must be >= 0");
  if (c.pair_sample < 1) fail("pair_sample must be >= 1");
  for (int k : c.hierarchy_ks) {
    if (k < 1) fail("hierarchy_ks entries must be >= 1");
  }
}

// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_json(TrainConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("config: top level must be an object");
  static const std::set<std::string> known = {
      "seed", "epochs", "batch_size", "learning_rate", "finetune_learning_rate", "beta1", "beta2", "epsilon", "alpha_offset",
      "quadruplet_budget", "positives", "probe_epochs", "split", "split_ratios", "few_shot_fraction", "stratify_k",
      "hidden_dim", "num_layers", "num_heads", "task", "grid_step", "rand_k", "pair_sample", "mmp_similarity",
      "cliff_gap", "hierarchy_ks", "smiles_column", "label_column", "fragment_pool"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("learning_rate", c.learning_rate);
    get("finetune_learning_rate", c.finetune_learning_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("epsilon", c.epsilon);
    get("alpha_offset", c.alpha_offset);
    get("quadruplet_budget", c.quadruplet_budget);
    get("positives", c.positives);
    get("probe_epochs", c.probe_epochs);
    get("split_ratios", c.split_ratios);
    get("few_shot_fraction", c.few_shot_fraction);
    get("stratify_k", c.stratify_k);
    get("hidden_dim", c.hidden_dim);
    get("num_layers", c.num_layers);
    get("num_heads", c.num_heads);
    get("grid_step", c.grid_step);
    get("rand_k", c.rand_k);
    get("pair_sample", c.pair_sample);
    get("mmp_similarity", c.mmp_similarity);
    get("cliff_gap", c.cliff_gap);
    get("hierarchy_ks", c.hierarchy_ks);
    get("smiles_column", c.smiles_column);
    get("label_column", c.label_column);
    get("fragment_pool", c.fragment_pool);
    if (j.contains("split")) {
      const auto s = j.at("split").get<std::string>();
      if (s == "scaffold") {
        c.split = SplitKind::Scaffold;
      } else if (s == "stratified") {
        c.split = SplitKind::Stratified;
      } else {
        throw InputError("config: split must be 'scaffold' or 'stratified'");
      }
    }
    if (j.contains("task")) {
      const auto t = j.at("task").get<std::string>();
      if (t == "regression") {
        c.task = Task::Regression;
      } else if (t == "classification") {
        c.task = Task::Classification;
      } else {
        throw InputError("config: task must be 'regression' or 'classification'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  apply_json(base, j);
  return base;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"finetune_learning_rate", c.finetune_learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"alpha_offset", c.alpha_offset},
          {"quadruplet_budget", c.quadruplet_budget},
          {"positives", c.positives},
          {"probe_epochs", c.probe_epochs},
          {"split", c.split == SplitKind::Scaffold ? "scaffold" : "stratified"},
          {"split_ratios", c.split_ratios},
          {"few_shot_fraction", c.few_shot_fraction},
          {"stratify_k", c.stratify_k},
          {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"task", c.task == Task::Regression ? "regression" : "classification"},
          {"grid_step", c.grid_step},
          {"rand_k", c.rand_k},
          {"pair_sample", c.pair_sample},
          {"mmp_similarity", c.mmp_similarity},
          {"cliff_gap", c.cliff_gap},
          {"hierarchy_ks", c.hierarchy_ks},
          {"smiles_column", c.smiles_column},
          {"label_column", c.label_column},
          {"fragment_pool", c.fragment_pool}};
}

}  // namespace promptmol::pipeline
