// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "promptmol/chemfeat.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/perturb.hpp"
#include "promptmol/pipeline/toy_corpus.hpp"

using namespace promptmol;
using namespace promptmol::perturb;
using molgraph::graphs_isomorphic;
using molgraph::parse_smiles;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "promptmol_perturb_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / name).string();
  std::ofstream(path) << body;
  return path;
}

bool same_bonds(const molgraph::MolecularGraph& a, const molgraph::MolecularGraph& b) {
  if (a.num_bonds() != b.num_bonds()) return false;
  for (int i = 0; i < a.num_bonds(); ++i) {
    const auto &x = a.bond(i), &y = b.bond(i);
    if (x.begin != y.begin || x.end != y.end || x.order != y.order) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("subgraph mask shapes") {
  const auto ethane = parse_smiles("CC");
  const auto m = subgraph_mask_at(ethane, 0, chemfeat::functional_group_descriptors(ethane));
  CHECK(m.masked_atoms == std::vector<int>{0, 1});

  const auto benzene = parse_smiles("c1ccccc1");
  for (int c = 0; c < 6; ++c) {
    const auto mb = subgraph_mask_at(benzene, c, chemfeat::functional_group_descriptors(benzene));
    CHECK(mb.masked_atoms.size() == 3);
    CHECK(same_bonds(mb.base, benzene));
  }
  Rng r1(42), r2(42);
  const auto g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  for (int i = 0; i < 20; ++i) CHECK(subgraph_mask(g, r1).masked_atoms == subgraph_mask(g, r2).masked_atoms);
  Rng r3(1);
  CHECK_THROWS(subgraph_mask(parse_smiles("C"), r3));
}

TEST_CASE("context label describes the masked region") {
  const auto g = parse_smiles("CCO");
  const auto m = subgraph_mask_at(g, 2, chemfeat::functional_group_descriptors(g));
  CHECK(m.masked_atoms == std::vector<int>{1, 2});
  const auto& l = m.context_label;
  CHECK(l.atom_presence[molgraph::element_index(molgraph::Element::C)] == 1.0);
  CHECK(l.atom_presence[molgraph::element_index(molgraph::Element::O)] == 1.0);
  CHECK(l.atom_presence[molgraph::element_index(molgraph::Element::N)] == 0.0);
  CHECK(l.bond_presence[molgraph::bond_order_index(molgraph::BondOrder::Single)] == 1.0);
  CHECK(l.bond_presence[molgraph::bond_order_index(molgraph::BondOrder::Double)] == 0.0);
}

TEST_CASE("toluene with a hydroxyl-only pool gives phenol") {
  FragmentPool pool;
  pool.fragments.push_back(make_fragment("O", 0));
  Rng rng(3);
  const auto toluene = parse_smiles("Cc1ccccc1");
  const auto out = perturb_side_chain(toluene, pool, rng);
  CHECK(graphs_isomorphic(out.graph, parse_smiles("Oc1ccccc1")));
  CHECK(graphs_isomorphic(chemfeat::bemis_murcko_scaffold(out.graph), chemfeat::bemis_murcko_scaffold(toluene)));
  CHECK(out.atoms_removed == 1);
  CHECK(out.atoms_added == 1);
}

TEST_CASE("perturbation errors") {
  const auto pool = builtin_fragment_pool();
  Rng rng(0);
  CHECK_THROWS_AS(scaffold_invariant_perturb(parse_smiles("c1ccccc1"), pool, rng), NoPerturbationSite);
  CHECK_THROWS_AS(scaffold_invariant_perturb(parse_smiles("CCCC"), pool, rng), NoPerturbationSite);
  // Phenol with only a hydroxyl fragment can only reproduce itself.
  FragmentPool oh;
  oh.fragments.push_back(make_fragment("O", 0));
  CHECK_THROWS_AS(scaffold_invariant_perturb(parse_smiles("Oc1ccccc1"), oh, rng), NoValidFragment);
}

TEST_CASE("long side chains are truncated to a terminal piece") {
  const auto g = parse_smiles("CCCCCCc1ccccc1");
  const auto pool = builtin_fragment_pool();
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto out = perturb_side_chain(g, pool, rng);
    CHECK(out.atoms_removed <= 4);
    CHECK(out.atoms_added <= 4);
    CHECK(graphs_isomorphic(chemfeat::bemis_murcko_scaffold(out.graph), chemfeat::bemis_murcko_scaffold(g)));
  }
}

TEST_CASE("scaffold preserved over part of the toy corpus") {
  const auto pool = builtin_fragment_pool();
  int done = 0;
  for (const auto& m : pipeline::toy::generate(pipeline::toy::kDefaultSeed, 4)) {
    const auto g = parse_smiles(m.smiles);
    Rng rng = derive_rng(17, static_cast<std::uint64_t>(done));
    const auto out = perturb_side_chain(g, pool, rng);
    INFO(m.smiles << " -> " << molgraph::write_smiles(out.graph));
    CHECK(graphs_isomorphic(chemfeat::bemis_murcko_scaffold(out.graph), chemfeat::bemis_murcko_scaffold(g)));
    CHECK(out.atoms_removed < 5);
    CHECK(out.atoms_added < 5);
    CHECK_FALSE(molgraph::find_valence_violation(out.graph));
    ++done;
  }
  CHECK(done == 48);
}

TEST_CASE("fragment pools") {
  const auto builtin = builtin_fragment_pool();
  CHECK(builtin.fragments.size() >= 20);
  CHECK(builtin.source == "builtin");
  for (const auto& f : builtin.fragments) CHECK(f.graph.num_atoms() <= 4);

  const auto methoxy = load_fragment_pool(write_temp("methoxy.tsv", "# methoxy\nCO\t1\n"));
  REQUIRE(methoxy.fragments.size() == 1);
  CHECK(methoxy.fragments[0].attachment == 1);
  CHECK(methoxy.fragments[0].graph.atom(1).element == molgraph::Element::O);

  try {
    load_fragment_pool(write_temp("big.tsv", "CC\t0\nCCCCCC\t0\n"));
    FAIL("expected an InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_fragment_pool(write_temp("ring.tsv", "C1CC1\t0\n")), InputError);
  CHECK_THROWS_AS(load_fragment_pool(write_temp("noidx.tsv", "CC\n")), InputError);
  CHECK_THROWS_AS(load_fragment_pool(write_temp("range.tsv", "CC\t5\n")), InputError);
  CHECK_THROWS_AS(load_fragment_pool(write_temp("full.tsv", "C(F)(F)(F)F\t0\n")), InputError);
  CHECK_THROWS_AS(load_fragment_pool("/nonexistent/pool.tsv"), InputError);
}
