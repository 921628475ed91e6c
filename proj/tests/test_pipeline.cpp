// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "promptmol/pipeline.hpp"
#include "support/oracles.hpp"

using namespace promptmol;
using namespace promptmol::pipeline;
using encoder::Matrix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "promptmol_pipeline_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const fs::path& path, const std::string& body) {
  std::ofstream(path) << body;
  return path.string();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_partition(const SplitIndices& s, std::size_t n) {
  std::vector<int> all;
  for (const auto* p : {&s.train, &s.validation, &s.test, &s.unused}) all.insert(all.end(), p->begin(), p->end());
  std::sort(all.begin(), all.end());
  CHECK(all.size() == n);
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  if (!all.empty()) {
    CHECK(all.front() == 0);
    CHECK(all.back() == static_cast<int>(n) - 1);
  }
}

Dataset toy_dataset(int per_scaffold = toy::kMoleculesPerScaffold) {
  Dataset ds;
  ds.name = "toy";
  ds.labels.emplace();
  for (const auto& m : toy::generate(toy::kDefaultSeed, per_scaffold)) {
    ds.smiles.push_back(m.smiles);
    ds.molecules.push_back(molgraph::parse_smiles(m.smiles));
    ds.labels->push_back(m.label);
    ds.groups.push_back(m.scaffold_id);
  }
  return ds;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.seed = 5;
  c.epochs = 1;
  c.batch_size = 8;
  c.hidden_dim = 8;
  c.num_layers = 2;
  c.num_heads = 2;
  c.probe_epochs = {0, 1};
  c.positives = 2;
  return c;
}

}  // namespace

TEST_CASE("dataset loading") {
  const fs::path dir = scratch("load");
  const auto ok = load_dataset(write_file(dir / "three.csv", "smiles,label\nCCO,1.5\nc1ccccc1,2\nCC(=O)O,-0.25\n"));
  CHECK(ok.rejects.empty());
  CHECK(ok.dataset.size() == 3);
  REQUIRE(ok.dataset.labeled());
  CHECK(*ok.dataset.labels == std::vector<double>{1.5, 2.0, -0.25});
  CHECK(ok.dataset.name == "three");

  const auto bad = load_dataset(write_file(dir / "bad.csv", "smiles,label\nCCO,1\nC1CC,2\nCCN,x\n"));
  CHECK(bad.dataset.size() == 1);
  REQUIRE(bad.rejects.size() == 2);
  CHECK(bad.rejects[0].row == 3);
  CHECK(bad.rejects[0].smiles == "C1CC");
  CHECK_THAT(bad.rejects[0].reason, Catch::Matchers::ContainsSubstring("unclosed ring"));
  CHECK(bad.rejects[1].row == 4);

  const auto unlabeled = load_dataset(write_file(dir / "nolabel.csv", "smiles\nCCO\nCCN\n"));
  CHECK_FALSE(unlabeled.dataset.labeled());
  CHECK(unlabeled.dataset.size() == 2);

  const auto list = load_any(write_file(dir / "list.smi", "# comment\nCCO ethanol\n\nc1ccccc1\n"));
  CHECK(list.dataset.size() == 2);
  CHECK_FALSE(list.dataset.labeled());

  CHECK_THROWS_AS(load_dataset(write_file(dir / "nocol.csv", "mol,label\nCCO,1\n")), InputError);
  CHECK_THROWS_AS(load_dataset(write_file(dir / "allbad.csv", "smiles,label\nC1CC,1\n")), InputError);
  CHECK_THROWS_AS(load_dataset((dir / "missing.csv").string()), InputError);
}

TEST_CASE("scaffold split") {
  SECTION("one scaffold goes entirely to train") {
    const std::vector<std::string> keys(10, "c1ccccc1");
    const auto s = scaffold_split(keys, {0.8, 0.1, 0.1});
    CHECK(s.train.size() == 10);
    CHECK(s.validation.empty());
    CHECK(s.test.empty());
  }
  SECTION("ten singleton scaffolds split 8/1/1") {
    std::vector<std::string> keys;
    for (int i = 0; i < 10; ++i) keys.push_back("s" + std::to_string(i));
    const auto s = scaffold_split(keys, {0.8, 0.1, 0.1});
    CHECK(s.train.size() == 8);
    CHECK(s.validation.size() == 1);
    CHECK(s.test.size() == 1);
    check_partition(s, 10);
  }
  SECTION("toy corpus: disjoint, exhaustive, no scaffold straddles splits") {
    const Dataset ds = toy_dataset();
    const auto s = scaffold_split(ds, {0.8, 0.1, 0.1});
    check_partition(s, ds.size());
    CHECK_FALSE(s.validation.empty());
    CHECK_FALSE(s.test.empty());
    std::array<std::set<std::string>, 3> seen;
    const std::array<const std::vector<int>*, 3> parts = {&s.train, &s.validation, &s.test};
    for (std::size_t p = 0; p < 3; ++p) {
      for (int i : *parts[p]) seen[p].insert(scaffold_key(ds.molecules[static_cast<std::size_t>(i)]));
    }
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a + 1; b < 3; ++b) {
        for (const auto& k : seen[a]) CHECK(seen[b].count(k) == 0);
      }
    }
  }
  CHECK_THROWS_AS(scaffold_split(std::vector<std::string>{"a"}, {0.5, 0.1, 0.1}), InputError);
}

TEST_CASE("stratified split") {
  Rng rng(3);
  Matrix x(40, 2);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = (i < 20 ? 0.0 : 50.0) + testing::gaussian(rng, 0.0, 1.0);
    x(i, 1) = testing::gaussian(rng, 0.0, 1.0);
  }
  SECTION("fraction 1 keeps the whole training share") {
    Rng r(1);
    const auto s = stratified_split(x, {0.8, 0.1, 0.1}, 1.0, 2, r);
    CHECK(s.train.size() == 32);
    CHECK(s.unused.empty());
    CHECK(s.validation.size() == 4);
    CHECK(s.test.size() == 4);
    check_partition(s, 40);
  }
  SECTION("small fraction draws from both blobs") {
    Rng r(1);
    const auto s = stratified_split(x, {0.8, 0.1, 0.1}, 0.125, 2, r);
    REQUIRE(s.train.size() == 4);
    const auto left = std::count_if(s.train.begin(), s.train.end(), [](int i) { return i < 20; });
    CHECK(left == 2);
    CHECK(s.unused.size() == 28);
    check_partition(s, 40);
  }
  SECTION("all-train ratios") {
    Rng r(1);
    const auto s = stratified_split(x, {1.0, 0.0, 0.0}, 1.0, 4, r);
    CHECK(s.train.size() == 40);
    check_partition(s, 40);
  }
  SECTION("determinism and bad fractions") {
    Rng a(9), b(9);
    CHECK(stratified_split(x, {0.8, 0.1, 0.1}, 0.5, 3, a).train == stratified_split(x, {0.8, 0.1, 0.1}, 0.5, 3, b).train);
    Rng r(1);
    CHECK_THROWS_AS(stratified_split(x, {0.8, 0.1, 0.1}, 0.0, 2, r), InputError);
    CHECK_THROWS_AS(stratified_split(x, {0.8, 0.1, 0.1}, 1.5, 2, r), InputError);
  }
}

TEST_CASE("prompt weight grid search") {
  CHECK(simplex_grid(0.5).size() == 6);
  CHECK(simplex_grid(0.05).size() == 231);
  for (const auto& w : simplex_grid(0.05)) {
    CHECK(w[0] + w[1] + w[2] == Catch::Approx(1.0).margin(1e-12));
    for (double v : w) CHECK(v >= 0.0);
  }
  CHECK(simplex_grid(0.5).front() == Weights3{0.0, 0.0, 1.0});
  CHECK_THROWS_AS(simplex_grid(0.3), InputError);
  CHECK_THROWS_AS(simplex_grid(0.0), InputError);

  Rng rng(2);
  std::array<Matrix, 3> ch;
  for (auto& m : ch) {
    m.resize(15, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  }
  SECTION("constant labels tie at the first grid point") {
    const auto r = init_prompt_weights(ch, std::vector<double>(15, 3.0), 0.5);
    CHECK(r.grid_point == Weights3{0.0, 0.0, 1.0});
    CHECK(r.best_rogi == 0.0);
  }
  SECTION("result is the exhaustive minimum and lies on the simplex") {
    std::vector<double> y(15);
    for (int i = 0; i < 15; ++i) y[static_cast<std::size_t>(i)] = ch[1](i, 0) + 0.1 * uniform(rng, 0.0, 1.0);
    const auto r = init_prompt_weights(ch, y, 0.1);
    const auto yn = spacemetrics::minmax_normalize(y);
    double best = INFINITY;
    for (const auto& w : simplex_grid(0.1)) {
      const Matrix comp = w[0] * ch[0] + w[1] * ch[1] + w[2] * ch[2];
      best = std::min(best, spacemetrics::rogi({comp, yn}));
    }
    CHECK(r.best_rogi == best);
    const auto& p = r.prompt.weights;
    CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-9);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(p[c] >= 0.0);
      CHECK(std::abs(p[c] - r.grid_point[c]) <= 1e-7);
    }
  }
}

TEST_CASE("regression and classification metrics") {
  const std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>(4, 2.5)) == 0.0);
  CHECK(r_squared(y, {4.0, 3.0, 2.0, 1.0}) == Catch::Approx(-3.0));
  CHECK(std::isnan(r_squared({1.0, 1.0}, {1.0, 2.0})));
  CHECK_THROWS_AS(r_squared(y, {1.0}), InputError);

  CHECK(roc_auc({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}) == 1.0);
  CHECK(roc_auc({0, 0, 1, 1}, {0.9, 0.8, 0.2, 0.1}) == 0.0);
  CHECK(roc_auc({0, 1}, {0.5, 0.5}) == 0.5);
  // Pairs (pos, neg): (0.4 vs 0.1) win, (0.4 vs 0.6) lose, (0.8 vs both) win.
  CHECK(roc_auc({0, 1, 0, 1}, {0.1, 0.4, 0.6, 0.8}) == Catch::Approx(0.75));
  CHECK(std::isnan(roc_auc({1, 1}, {0.1, 0.2})));
}

TEST_CASE("channel activation masks") {
  const auto masks = activation_masks();
  CHECK(masks.size() == 7);
  CHECK(std::set<std::array<bool, 3>>(masks.begin(), masks.end()).size() == 7);
  CHECK(uniform_over({true, true, false}) == Weights3{0.5, 0.5, 0.0});
  CHECK(uniform_over({false, false, true}) == Weights3{0.0, 0.0, 1.0});
  const Weights3 all = uniform_over({true, true, true});
  for (double w : all) CHECK(w == Catch::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(uniform_over({false, false, false}), InputError);
  CHECK(mask_name({true, false, true}) == "mcd+cp");
}

TEST_CASE("config files") {
  const fs::path dir = scratch("config");
  const auto c = load_config(write_file(dir / "ok.json", R"({"epochs": 7, "split": "stratified", "hidden_dim": 16})"));
  CHECK(c.epochs == 7);
  CHECK(c.split == SplitKind::Stratified);
  CHECK(c.hidden_dim == 16);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.finetune_learning_rate == 1e-4);
  CHECK(c.positives == 5);
  CHECK(c.split_ratios == std::array<double, 3>{0.8, 0.1, 0.1});
  CHECK(c.probe_epochs == std::vector<int>{0, 10, 20, 50, 100});
  CHECK_THROWS_AS(load_config(write_file(dir / "unknown.json", R"({"epoch": 3})")), InputError);
  CHECK_THROWS_AS(load_config(write_file(dir / "type.json", R"({"epochs": "many"})")), InputError);
  CHECK_THROWS_AS(load_config(write_file(dir / "broken.json", "{")), InputError);
  TrainConfig bad;
  bad.hidden_dim = 10;
  bad.num_heads = 4;
  CHECK_THROWS_AS(validate(bad), InputError);
  // Round trip through JSON.
  TrainConfig back;
  apply_json(back, to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("bundled toy corpus matches its generator") {
  const auto loaded = load_dataset(std::string(PROMPTMOL_DATA_DIR) + "/toy_corpus.csv");
  const auto gen = toy::generate();
  CHECK(loaded.rejects.empty());
  REQUIRE(loaded.dataset.size() == gen.size());
  CHECK(gen.size() == 300);
  std::set<std::string> canon;
  std::set<int> scaffolds;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    CHECK(loaded.dataset.smiles[i] == gen[i].smiles);
    CHECK(loaded.dataset.labels->at(i) == gen[i].label);
    CHECK(loaded.dataset.groups.at(i) == gen[i].scaffold_id);
    // The label formula, recomputed.
    const auto g = molgraph::parse_smiles(gen[i].smiles);
    double y = 5.0 + 0.25 * ((7 * gen[i].scaffold_id) % 12) - 1.375;
    for (int b : chemfeat::morgan_fingerprint(g, 2, 512).on_bits()) y += toy::bit_weight(b);
    CHECK(std::abs(y - gen[i].label) <= 1e-12);
    canon.insert(molgraph::write_smiles(g));
    scaffolds.insert(gen[i].scaffold_id);
  }
  CHECK(canon.size() == gen.size());
  CHECK(scaffolds.size() == 12);
}

TEST_CASE("pre-training writes deterministic outputs and exact checkpoints") {
  Dataset ds = toy_dataset(1);
  ds = subset(ds, {0, 1, 2, 3, 4, 5});
  TrainConfig cfg = tiny_config();
  const fs::path a = scratch("pretrain_a"), b = scratch("pretrain_b");
  encoder::Model ma, mb;
  int callbacks = 0;
  const auto ra = pretrain(ma, ds, cfg, a.string(), [&](const EpochLoss&) { ++callbacks; });
  const auto rb = pretrain(mb, ds, cfg, b.string());
  CHECK(callbacks == 1);
  REQUIRE(ra.epochs.size() == 1);
  CHECK(ra.used + ra.skipped.size() == ds.size());
  CHECK(slurp(a / "pretrain_loss.csv") == slurp(b / "pretrain_loss.csv"));
  CHECK(slurp(a / "pretrain.mspc") == slurp(b / "pretrain.mspc"));
  CHECK(fs::exists(a / checkpoint_name("pretrain", 0)));
  CHECK(fs::exists(a / checkpoint_name("pretrain", 1)));
  CHECK(slurp(a / "pretrain_loss.csv").rfind("epoch,mcd,scd,cp,regu,total\n", 0) == 0);

  encoder::Model back;
  encoder::load_model((a / "pretrain.mspc").string(), back);
  for (const auto* p : ma.store.all()) {
    REQUIRE(back.store.contains(p->name));
    const auto& q = back.store.get(p->name);
    CHECK(std::memcmp(p->value.data(), q.value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size())) == 0);
  }
  const auto& l = ra.epochs[0].loss;
  CHECK(l.total == Catch::Approx(l.mcd + l.scd + l.cp + 0.1 * l.regu).epsilon(1e-12));

  cfg.seed = 6;
  encoder::Model mc;
  const auto rc = pretrain(mc, ds, cfg);
  CHECK(rc.epochs[0].loss.total != ra.epochs[0].loss.total);

  Dataset small = subset(ds, {0, 1});
  encoder::Model md;
  CHECK_THROWS_AS(pretrain(md, small, cfg), InputError);
}

TEST_CASE("fine-tuning contracts") {
  const Dataset ds = toy_dataset(3);
  const auto split = scaffold_split(ds, {0.8, 0.1, 0.1});
  TrainConfig cfg = tiny_config();
  cfg.epochs = 2;
  cfg.probe_epochs = {0, 2};
  cfg.grid_step = 0.25;

  SECTION("epoch-0 probe equals the untouched representation") {
    encoder::Model m;
    encoder::init_model(m, cfg.encoder_config(), 11);
    encoder::Model ref;
    encoder::init_model(ref, cfg.encoder_config(), 11);
    const auto r = finetune(m, ds, split, cfg);
    REQUIRE(r.probes.size() == 2);
    CHECK(r.aggregators_unchanged);
    REQUIRE(r.prompt_init);

    std::vector<molgraph::MolecularGraph> train;
    std::vector<double> ty, vy;
    for (int i : split.train) {
      train.push_back(ds.molecules[static_cast<std::size_t>(i)]);
      ty.push_back(ds.labels->at(static_cast<std::size_t>(i)));
    }
    for (int i : split.validation) vy.push_back(ds.labels->at(static_cast<std::size_t>(i)));
    const auto ch = encoder::embed_dataset(ref, train);
    const Weights3 w = r.probes[0].weights;
    CHECK(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-12);
    const Matrix comp = composite(ch, w);
    const double rogi0 = spacemetrics::rogi({comp, spacemetrics::minmax_normalize(ty)});
    CHECK(std::abs(r.probes[0].train_rogi - rogi0) <= 1e-9);
    // The zero-weight head predicts the training mean everywhere.
    const double mean = std::accumulate(ty.begin(), ty.end(), 0.0) / static_cast<double>(ty.size());
    CHECK(std::abs(r.probes[0].val_metric - r_squared(vy, std::vector<double>(vy.size(), mean))) <= 1e-12);
    for (const auto& p : r.probes) {
      CHECK(p.weights[0] >= 0.0);
      CHECK(std::abs(p.weights[0] + p.weights[1] + p.weights[2] - 1.0) <= 1e-12);
    }
  }
  SECTION("fixed weights stay fixed and no prompt search runs") {
    encoder::Model m;
    encoder::init_model(m, cfg.encoder_config(), 11);
    FinetuneOptions opt;
    opt.fixed_weights = Weights3{0.5, 0.5, 0.0};
    const auto r = finetune(m, ds, split, cfg, opt);
    CHECK_FALSE(r.prompt_init);
    CHECK(r.final_weights == Weights3{0.5, 0.5, 0.0});
    CHECK(r.aggregators_unchanged);
  }
  SECTION("outputs are deterministic") {
    const fs::path a = scratch("ft_a"), b = scratch("ft_b");
    for (const auto& dir : {a, b}) {
      encoder::Model m;
      encoder::init_model(m, cfg.encoder_config(), 11);
      FinetuneOptions opt;
      opt.out_dir = dir.string();
      finetune(m, ds, split, cfg, opt);
    }
    CHECK(slurp(a / "finetune_probes.csv") == slurp(b / "finetune_probes.csv"));
    CHECK(slurp(a / "finetune_embeddings_epoch2.csv") == slurp(b / "finetune_embeddings_epoch2.csv"));
    CHECK(slurp(a / "finetune_probes.csv").rfind("epoch,train_loss,train_rogi,train_rand_index,val_r2,", 0) == 0);
  }
  SECTION("input errors") {
    encoder::Model m;
    encoder::init_model(m, cfg.encoder_config(), 11);
    Dataset unlabeled = ds;
    unlabeled.labels.reset();
    CHECK_THROWS_AS(finetune(m, unlabeled, split, cfg), InputError);
    SplitIndices empty_val = split;
    empty_val.validation.clear();
    CHECK_THROWS_AS(finetune(m, ds, empty_val, cfg), InputError);
    TrainConfig cls = cfg;
    cls.task = Task::Classification;
    CHECK_THROWS_AS(finetune(m, ds, split, cls), InputError);
  }
}

TEST_CASE("channel ablation runs every mask") {
  const Dataset ds = toy_dataset(2);
  const auto split = scaffold_split(ds, {0.8, 0.1, 0.1});
  TrainConfig cfg = tiny_config();
  cfg.probe_epochs = {0, 1};
  const fs::path dir = scratch("ablate");
  encoder::Model m;
  encoder::init_model(m, cfg.encoder_config(), 4);
  encoder::save_model((dir / "m.mspc").string(), m);
  const auto rows = channel_ablation((dir / "m.mspc").string(), ds, split, cfg);
  REQUIRE(rows.size() == 7);
  CHECK(rows[3].mask == "mcd+scd");
  CHECK(rows[3].weights == Weights3{0.5, 0.5, 0.0});
  CHECK(rows[2].weights == Weights3{0.0, 0.0, 1.0});
  for (const auto& r : rows) CHECK(std::isfinite(r.val_metric));
  CHECK_THROWS_AS(channel_ablation((dir / "m.mspc").string(), ds, split, cfg, {{false, false, false}}), InputError);
}

TEST_CASE("analysis helpers") {
  const Dataset ds = toy_dataset(2);
  encoder::Model m;
  encoder::EncoderConfig ec;
  ec.hidden_dim = 8;
  ec.num_layers = 2;
  ec.num_heads = 2;
  encoder::init_model(m, ec, 1);
  // Zero key weights make attention uniform, so the mass equals the mean
  // scaffold fraction of the molecules.
  for (auto& a : m.aggregators) a.wk->value.setZero();
  double expected = 0.0;
  for (const auto& g : ds.molecules) {
    const auto mask = chemfeat::scaffold_atom_mask(g);
    expected += static_cast<double>(std::count(mask.begin(), mask.end(), true)) / g.num_atoms();
  }
  expected /= static_cast<double>(ds.size());
  CHECK(scaffold_attention_mass(m, ds.molecules) == Catch::Approx(expected).margin(1e-12));
  CHECK(std::isnan(scaffold_attention_mass(m, {molgraph::parse_smiles("CCO")})));

  const Featurized f = featurize(ds.molecules);
  const ChannelSimilarities cs = channel_similarities(f);
  CHECK(cs.sims[0](0, 0) == 1.0);
  CHECK(cs.sims[1](0, 1) == chemfeat::tanimoto(f.scaffold_fingerprints[0], f.scaffold_fingerprints[1]));
  const auto in = hierarchy_inputs(encoder::embed_dataset(m, ds.molecules), f);
  CHECK(in.functional_groups.rows() == static_cast<Eigen::Index>(ds.size()));
  CHECK(in.scaffold_keys.size() == ds.size());
}
