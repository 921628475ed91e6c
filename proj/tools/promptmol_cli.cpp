// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 2 input error, 3 numeric
// failure, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/encoder.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/perturb.hpp"
#include "promptmol/pipeline.hpp"
#include "promptmol/spacemetrics.hpp"

namespace pm = promptmol;
namespace pl = promptmol::pipeline;
namespace sm = promptmol::spacemetrics;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
};

pl::TrainConfig resolve_config(const Globals& g) {
  pl::TrainConfig cfg = g.config.empty() ? pl::TrainConfig{} : pl::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  pl::validate(cfg);
  return cfg;
}

std::string out_path(const Globals& g, const std::string& name) {
  std::filesystem::create_directories(g.out);
  return (std::filesystem::path(g.out) / name).string();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw pm::InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// NaN and infinities become null in JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

pl::LoadResult load_input(const std::string& path, const pl::TrainConfig& cfg, bool need_labels) {
  pl::LoadResult r = pl::load_any(path, cfg.smiles_column, cfg.label_column);
  if (need_labels && !r.dataset.labeled()) {
    throw pm::InputError(path + ": no '" + cfg.label_column + "' column");
  }
  for (const auto& rej : r.rejects) std::cerr << path << ":" << rej.row << ": rejected: " << rej.reason << '\n';
  return r;
}

void write_rejects(const Globals& g, const std::vector<pl::Reject>& rejects) {
  pl::CsvWriter w(out_path(g, "rejects.csv"), {"row", "smiles", "reason"});
  for (const auto& r : rejects) w.row({std::to_string(r.row), r.smiles, r.reason});
}

pl::SplitIndices make_split(const pl::Dataset& ds, const pl::TrainConfig& cfg) {
  if (cfg.split == pl::SplitKind::Scaffold) {
    if (cfg.few_shot_fraction != 1.0) throw pm::InputError("few_shot_fraction requires the stratified split");
    return pl::scaffold_split(ds, cfg.split_ratios);
  }
  const pl::Featurized f = pl::featurize(ds.molecules);
  pm::Rng rng = pm::derive_rng(cfg.seed, 0x5B117);
  return pl::stratified_split(pl::fingerprint_matrix(f.fingerprints), cfg.split_ratios, cfg.few_shot_fraction,
                              cfg.stratify_k, rng);
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> w;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = pl::parse_double(item);
    if (!v || *v < 0.0) throw pm::InputError("bad weight '" + item + "'");
    w.push_back(*v);
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (w.size() != 3 || std::abs(total - 1.0) > 1e-9) throw pm::InputError("--weights needs three values summing to 1");
  return w;
}

// ---- subcommands ----

int cmd_parse(const Globals& g, const std::string& input) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  pl::CsvWriter w(out_path(g, "parsed.csv"), {"index", "input", "canonical", "atoms", "bonds", "ring_atoms"});
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    const auto& m = r.dataset.molecules[i];
    int ring = 0;
    for (const auto& a : m.atoms()) ring += a.in_ring ? 1 : 0;
    w.row({std::to_string(i), r.dataset.smiles[i], pm::molgraph::write_smiles(m), std::to_string(m.num_atoms()),
           std::to_string(m.num_bonds()), std::to_string(ring)});
  }
  write_rejects(g, r.rejects);
  write_json(out_path(g, "parse_summary.json"), {{"parsed", r.dataset.size()}, {"rejected", r.rejects.size()}});
  return 0;
}

int cmd_featurize(const Globals& g, const std::string& input, int radius, int nbits) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  const pl::Featurized f = pl::featurize(r.dataset.molecules, radius, nbits);
  pl::CsvRow header{"index", "smiles", "scaffold", "molecular_weight", "scaffold_weight", "heavy_atoms"};
  for (auto name : pm::chemfeat::kFunctionalGroupNames) header.push_back("fg_" + std::string(name));
  header.push_back("fingerprint_hex");
  pl::CsvWriter w(out_path(g, "features.csv"), header);
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    const auto d = pm::chemfeat::scalar_descriptors(r.dataset.molecules[i]);
    pl::CsvRow row{std::to_string(i), r.dataset.smiles[i], f.scaffold_keys[i], pl::format_number(d.molecular_weight),
                   pl::format_number(d.scaffold_weight), std::to_string(d.heavy_atom_count)};
    for (int c : f.functional_groups[i].counts) row.push_back(std::to_string(c));
    row.push_back(f.fingerprints[i].to_hex());
    w.row(row);
  }
  write_rejects(g, r.rejects);
  return 0;
}

int cmd_split(const Globals& g, const std::string& input) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  const pl::SplitIndices s = make_split(r.dataset, cfg);
  std::vector<std::string> name(r.dataset.size());
  for (int i : s.train) name[static_cast<std::size_t>(i)] = "train";
  for (int i : s.validation) name[static_cast<std::size_t>(i)] = "validation";
  for (int i : s.test) name[static_cast<std::size_t>(i)] = "test";
  for (int i : s.unused) name[static_cast<std::size_t>(i)] = "unused";
  pl::CsvWriter w(out_path(g, "split.csv"), {"index", "smiles", "split"});
  for (std::size_t i = 0; i < name.size(); ++i) w.row({std::to_string(i), r.dataset.smiles[i], name[i]});
  write_json(out_path(g, "split_summary.json"), {{"train", s.train.size()},
                                                  {"validation", s.validation.size()},
                                                  {"test", s.test.size()},
                                                  {"unused", s.unused.size()}});
  return 0;
}

int cmd_perturb(const Globals& g, const std::string& input, int count) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  const pm::perturb::FragmentPool pool = pm::perturb::build_fragment_pool(
      cfg.fragment_pool.empty() ? std::nullopt : std::optional<std::string>(cfg.fragment_pool));
  pl::CsvWriter w(out_path(g, "perturbations.csv"),
                  {"index", "input", "output", "atoms_removed", "atoms_added", "fragment", "status"});
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    pm::Rng rng = pm::derive_rng(cfg.seed, i);
    for (int k = 0; k < count; ++k) {
      try {
        const auto o = pm::perturb::perturb_side_chain(r.dataset.molecules[i], pool, rng);
        w.row({std::to_string(i), r.dataset.smiles[i], pm::molgraph::write_smiles(o.graph),
               std::to_string(o.atoms_removed), std::to_string(o.atoms_added), o.fragment, "ok"});
      } catch (const std::runtime_error& e) {
        w.row({std::to_string(i), r.dataset.smiles[i], "", "", "", "", e.what()});
        break;
      }
    }
  }
  return 0;
}

int cmd_pretrain(const Globals& g, const std::string& input) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  pm::encoder::Model model;
  const pl::PretrainReport rep = pl::pretrain(model, r.dataset, cfg, g.out, [](const pl::EpochLoss& e) {
    std::cerr << "epoch " << e.epoch << " total " << e.loss.total << '\n';
  });
  json skipped = json::array();
  for (const auto& s : rep.skipped) skipped.push_back({{"index", s.index}, {"reason", s.reason}});
  write_json(out_path(g, "pretrain_summary.json"),
             {{"molecules_used", rep.used}, {"skipped", skipped}, {"checkpoints", rep.checkpoints},
              {"config", pl::to_json(cfg)}});
  return 0;
}

int cmd_finetune(const Globals& g, const std::string& input, const std::string& checkpoint, bool scratch) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, true);
  pm::encoder::Model model;
  if (scratch) {
    pm::encoder::init_model(model, cfg.encoder_config(), cfg.seed);
  } else {
    if (checkpoint.empty()) throw pm::InputError("finetune needs --checkpoint or --scratch");
    pm::encoder::load_model(checkpoint, model);
  }
  const pl::SplitIndices split = make_split(r.dataset, cfg);
  pl::FinetuneOptions opt;
  opt.out_dir = g.out;
  opt.tag = scratch ? "scratch" : "finetune";
  const pl::FinetuneResult res = pl::finetune(model, r.dataset, split, cfg, opt);
  json probes = json::array();
  for (const auto& p : res.probes) {
    probes.push_back({{"epoch", p.epoch}, {"val_metric", num(p.val_metric)}, {"train_rogi", num(p.train_rogi)}});
  }
  json summary = {{"aggregators_unchanged", res.aggregators_unchanged},
                  {"final_weights", res.final_weights},
                  {"probes", probes}};
  if (res.prompt_init) {
    summary["initial_weights"] = res.prompt_init->grid_point;
    summary["initial_rogi"] = res.prompt_init->best_rogi;
  }
  write_json(out_path(g, opt.tag + "_summary.json"), summary);
  if (!res.aggregators_unchanged) throw pm::NumericError("aggregator parameters changed during fine-tuning");
  return 0;
}

int cmd_ablate(const Globals& g, const std::string& input, const std::string& checkpoint) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, true);
  const pl::SplitIndices split = make_split(r.dataset, cfg);
  const auto rows = pl::channel_ablation(checkpoint, r.dataset, split, cfg);
  pl::CsvWriter w(out_path(g, "ablation.csv"),
                  {"mask", "w_mcd", "w_scd", "w_cp", cfg.task == pl::Task::Regression ? "val_r2" : "val_roc_auc"});
  for (const auto& row : rows) {
    w.row({row.mask, pl::format_number(row.weights[0]), pl::format_number(row.weights[1]),
           pl::format_number(row.weights[2]), pl::format_number(row.val_metric)});
  }
  return 0;
}

int cmd_rogi(const Globals& g, const std::string& input, const std::string& checkpoint, const std::string& weights) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, true);
  sm::LabeledSpace space;
  space.labels = sm::minmax_normalize(*r.dataset.labels);
  std::string representation;
  if (checkpoint.empty()) {
    if (!weights.empty()) throw pm::InputError("--weights needs --checkpoint");
    space.vectors = pl::fingerprint_matrix(pl::featurize(r.dataset.molecules).fingerprints);
    space.metric = sm::Metric::TanimotoDistance;
    representation = "ecfp4";
  } else {
    pm::encoder::Model model;
    pm::encoder::load_model(checkpoint, model);
    const auto w = weights.empty() ? std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3} : parse_weights(weights);
    space.vectors = pl::composite(pm::encoder::embed_dataset(model, r.dataset.molecules), {w[0], w[1], w[2]});
    space.metric = sm::Metric::Euclidean;
    representation = "composite";
  }
  const sm::RogiResult res = sm::rogi_detailed(space);
  pl::CsvWriter w(out_path(g, "rogi_trace.csv"), {"t", "sigma"});
  for (const auto& p : res.trace) w.row({pl::format_number(p.t), pl::format_number(p.sigma)});
  write_json(out_path(g, "rogi.json"),
             {{"rogi", res.value}, {"sigma0", res.sigma0}, {"representation", representation}, {"n", r.dataset.size()}});
  return 0;
}

int cmd_probe(const Globals& g, const std::string& input, const std::string& checkpoint) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, true);
  pm::encoder::Model model;
  pm::encoder::load_model(checkpoint, model);
  const auto& ds = r.dataset;
  const auto channels = pm::encoder::embed_dataset(model, ds.molecules);
  const pl::Featurized f = pl::featurize(ds.molecules);
  const std::vector<double> y01 = sm::minmax_normalize(*ds.labels);
  const int k = std::min<int>(static_cast<int>(ds.size()), cfg.rand_k > 0 ? cfg.rand_k : sm::default_rand_k(ds.size()));
  pm::Rng ecfp_rng = pm::derive_rng(cfg.seed, 0xECF9);
  const auto ecfp = sm::kmeans(pl::fingerprint_matrix(f.fingerprints), k, ecfp_rng).clusters;
  const auto mmps = sm::detect_mmps(f.fingerprints, f.scaffold_fingerprints, *ds.labels, cfg.mmp_similarity, cfg.cliff_gap);

  std::vector<std::pair<std::string, pm::encoder::Matrix>> reps;
  for (std::size_t c = 0; c < 3; ++c) reps.emplace_back(pm::encoder::kChannelNames[c], channels[c]);
  if (model.store.contains("ft.prompt_logits")) {
    const auto& l = model.store.get("ft.prompt_logits").value;
    reps.emplace_back("composite", pl::composite(channels, pl::softmax3({l(0, 0), l(0, 1), l(0, 2)})));
  } else {
    reps.emplace_back("composite", pl::composite(channels, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  }
  pl::CsvWriter w(out_path(g, "probe.csv"), {"representation", "rogi", "rand_index", "cliff_ratio"});
  for (const auto& [name, m] : reps) {
    pm::Rng rng = pm::derive_rng(cfg.seed, 0xECF9);
    double ratio = std::numeric_limits<double>::quiet_NaN();
    try {
      ratio = sm::cliff_noncliff_ratio(m, mmps);
    } catch (const sm::EmptyClass& e) {
      std::cerr << "cliff ratio undefined: " << e.what() << '\n';
    }
    w.row({name, pl::format_number(sm::rogi({m, y01, sm::Metric::Euclidean})),
           pl::format_number(sm::rand_index(sm::kmeans(m, k, rng).clusters, ecfp)), pl::format_number(ratio)});
  }
  std::size_t cliffs = 0;
  for (const auto& m : mmps) cliffs += m.is_cliff ? 1 : 0;
  write_json(out_path(g, "probe_summary.json"),
             {{"molecules", ds.size()}, {"rand_k", k}, {"mmps", mmps.size()}, {"cliff_mmps", cliffs}});
  return 0;
}

int cmd_cluster(const Globals& g, const std::string& input, const std::string& checkpoint, int top_m) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  pm::encoder::Model model;
  pm::encoder::load_model(checkpoint, model);
  const pl::Featurized f = pl::featurize(r.dataset.molecules);
  pm::Rng rng = pm::derive_rng(cfg.seed, 0xC1u);
  const sm::HierarchyResult h = sm::hierarchical_three_stage(
      pl::hierarchy_inputs(pm::encoder::embed_dataset(model, r.dataset.molecules), f), cfg.hierarchy_ks, rng, top_m);
  pl::CsvWriter a(out_path(g, "hierarchy_assignments.csv"), {"index", "smiles", "stage1", "stage2", "stage3"});
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    a.row({std::to_string(i), r.dataset.smiles[i], std::to_string(h.stages[0].assignment[i]),
           std::to_string(h.stages[1].assignment[i]), std::to_string(h.stages[2].assignment[i])});
  }
  pl::CsvWriter rep(out_path(g, "hierarchy_report.csv"),
                    {"stage", "cluster", "size", "unique_scaffolds", "intra_inter_ratio"});
  for (const auto& row : h.report) {
    rep.row({std::to_string(row.stage), std::to_string(row.cluster), std::to_string(row.size),
             std::to_string(row.unique_scaffolds), pl::format_number(row.intra_inter_ratio)});
  }
  return 0;
}

int cmd_correlate(const Globals& g, const std::string& input, const std::string& checkpoint) {
  const pl::TrainConfig cfg = resolve_config(g);
  const pl::LoadResult r = load_input(input, cfg, false);
  const pl::Featurized f = pl::featurize(r.dataset.molecules);
  const pl::ChannelSimilarities cs = pl::channel_similarities(f);
  pm::Rng rng = pm::derive_rng(cfg.seed, 0xC0EE);
  const sm::PairList pairs = sm::sample_pairs(r.dataset.size(), cfg.pair_sample, rng);
  json summary = {{"pairs", pairs.size()}};
  if (!checkpoint.empty()) {
    pm::encoder::Model model;
    pm::encoder::load_model(checkpoint, model);
    const auto rep = sm::correlation_report(pm::encoder::embed_dataset(model, r.dataset.molecules), cs.sims, pairs);
    pl::CsvWriter w(out_path(g, "correlation_series.csv"), {"channel", "i", "j", "distance", "similarity"});
    for (std::size_t c = 0; c < 3; ++c) {
      summary[std::string("r_") + pm::encoder::kChannelNames[c]] = rep[c].r;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        w.row({pm::encoder::kChannelNames[c], std::to_string(pairs[p].first), std::to_string(pairs[p].second),
               pl::format_number(rep[c].distance[p]), pl::format_number(rep[c].similarity[p])});
      }
    }
  }
  if (r.dataset.labeled()) {
    const sm::QsprCorrelation q = sm::qspr_correlation(cs.sims, *r.dataset.labels, pairs);
    summary["qspr_raw"] = q.raw;
    summary["qspr_normalized"] = q.normalized;
  }
  write_json(out_path(g, "correlation.json"), summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptmol: prompt-guided molecular representation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed (overrides the config file)");
  app.add_option("--config", g.config, "JSON file with training configuration")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");

  std::string input, checkpoint, weights;
  int radius = 2, nbits = 512, count = 1, top_m = 10;
  bool scratch = false;
  auto add_input = [&](CLI::App* sub) { sub->add_option("input", input, "CSV (smiles[,label]) or SMILES list")->required(); };

  auto* parse = app.add_subcommand("parse", "parse SMILES and report canonical forms");
  add_input(parse);
  auto* featurize = app.add_subcommand("featurize", "fingerprints, scaffolds and descriptors");
  add_input(featurize);
  featurize->add_option("--radius", radius, "Morgan radius");
  featurize->add_option("--nbits", nbits, "fingerprint length");
  auto* split = app.add_subcommand("split", "scaffold or stratified split");
  add_input(split);
  auto* perturb = app.add_subcommand("perturb", "scaffold-invariant side-chain perturbation");
  add_input(perturb);
  perturb->add_option("--count", count, "perturbations per molecule")->check(CLI::PositiveNumber);
  auto* pretrain = app.add_subcommand("pretrain", "self-supervised pre-training");
  add_input(pretrain);
  auto* finetune = app.add_subcommand("finetune", "fine-tune with probes");
  add_input(finetune);
  finetune->add_option("--checkpoint", checkpoint, "pre-trained checkpoint");
  finetune->add_flag("--scratch", scratch, "start from a random initialization");
  auto* ablate = app.add_subcommand("ablate", "channel activation ablation");
  add_input(ablate);
  ablate->add_option("--checkpoint", checkpoint, "pre-trained checkpoint")->required();
  auto* rogi = app.add_subcommand("rogi", "roughness index of a labeled set");
  add_input(rogi);
  rogi->add_option("--checkpoint", checkpoint, "use model embeddings instead of fingerprints");
  rogi->add_option("--weights", weights, "channel weights a,b,c for the composite");
  auto* probe = app.add_subcommand("probe", "representation-space probes");
  add_input(probe);
  probe->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  auto* cluster = app.add_subcommand("cluster-hierarchy", "three-stage channel clustering");
  add_input(cluster);
  cluster->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  cluster->add_option("--top", top_m, "clusters reported per stage");
  auto* correlate = app.add_subcommand("correlate", "embedding distance vs conventional similarity");
  add_input(correlate);
  correlate->add_option("--checkpoint", checkpoint, "model checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (parse->parsed()) return cmd_parse(g, input);
    if (featurize->parsed()) return cmd_featurize(g, input, radius, nbits);
    if (split->parsed()) return cmd_split(g, input);
    if (perturb->parsed()) return cmd_perturb(g, input, count);
    if (pretrain->parsed()) return cmd_pretrain(g, input);
    if (finetune->parsed()) return cmd_finetune(g, input, checkpoint, scratch);
    if (ablate->parsed()) return cmd_ablate(g, input, checkpoint);
    if (rogi->parsed()) return cmd_rogi(g, input, checkpoint, weights);
    if (probe->parsed()) return cmd_probe(g, input, checkpoint);
    if (cluster->parsed()) return cmd_cluster(g, input, checkpoint, top_m);
    if (correlate->parsed()) return cmd_correlate(g, input, checkpoint);
  } catch (const pm::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const pm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
