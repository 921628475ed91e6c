// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/molgraph.hpp"
#include "support/random_molecules.hpp"

using namespace promptmol;
using namespace promptmol::chemfeat;
using molgraph::parse_smiles;

namespace {

Fingerprint from_bits(std::initializer_list<int> bits, int nbits = 64) {
  Fingerprint f(nbits);
  for (int b : bits) f.set(b);
  return f;
}

// Atoms within `radius` bonds of v, by breadth-first search.
std::vector<int> environment(const molgraph::MolecularGraph& g, int v, int radius) {
  std::vector<int> dist(static_cast<std::size_t>(g.num_atoms()), -1);
  std::queue<int> q;
  dist[static_cast<std::size_t>(v)] = 0;
  q.push(v);
  std::vector<int> out;
  while (!q.empty()) {
    const int a = q.front();
    q.pop();
    out.push_back(a);
    if (dist[static_cast<std::size_t>(a)] == radius) continue;
    for (const auto& nb : g.neighbors(a)) {
      if (dist[static_cast<std::size_t>(nb.atom)] >= 0) continue;
      dist[static_cast<std::size_t>(nb.atom)] = dist[static_cast<std::size_t>(a)] + 1;
      q.push(nb.atom);
    }
  }
  return out;
}

int group(const FunctionalGroupVector& v, std::string_view name) {
  const auto it = std::find(kFunctionalGroupNames.begin(), kFunctionalGroupNames.end(), name);
  REQUIRE(it != kFunctionalGroupNames.end());
  return v.counts[static_cast<std::size_t>(it - kFunctionalGroupNames.begin())];
}

int total(const FunctionalGroupVector& v) {
  int t = 0;
  for (int c : v.counts) t += c;
  return t;
}

}  // namespace

TEST_CASE("tanimoto arithmetic") {
  CHECK(tanimoto(from_bits({1, 3, 5}), from_bits({3, 5, 7})) == 0.5);
  CHECK(tanimoto(from_bits({1, 2}), from_bits({1, 2})) == 1.0);
  CHECK(tanimoto(from_bits({1}), from_bits({2})) == 0.0);
  CHECK(tanimoto(Fingerprint(64), Fingerprint(64)) == 1.0);
  CHECK_THROWS(tanimoto(Fingerprint(64), Fingerprint(128)));
  const auto a = from_bits({0, 9, 40}), b = from_bits({9, 63});
  CHECK(tanimoto(a, b) == tanimoto(b, a));
}

TEST_CASE("fingerprint determinism and isomorphism invariance") {
  const auto a = parse_smiles("OCC(=O)c1ccncc1");
  const auto b = parse_smiles("c1cc(C(=O)CO)ccn1");
  CHECK(morgan_fingerprint(a) == morgan_fingerprint(a));
  CHECK(morgan_fingerprint(a) == morgan_fingerprint(b));
  CHECK(tanimoto(morgan_fingerprint(a), morgan_fingerprint(b)) == 1.0);
  CHECK(morgan_fingerprint(a).popcount() >= 1);
  CHECK(morgan_fingerprint(parse_smiles("C")).popcount() >= 1);
  CHECK_THROWS(morgan_fingerprint(a, 2, 100));
  CHECK_THROWS(morgan_fingerprint(a, 2, 32));
  CHECK_THROWS(morgan_fingerprint(a, -1, 512));
}

TEST_CASE("radius 0 separates elements") {
  const auto c = morgan_fingerprint(parse_smiles("C"), 0, 512);
  const auto o = morgan_fingerprint(parse_smiles("O"), 0, 512);
  CHECK(c.popcount() == 1);
  CHECK(o.popcount() == 1);
  CHECK(tanimoto(c, o) == 0.0);
}

TEST_CASE("shared bits of CCO and CCN come from heteroatom-free environments") {
  const auto x = parse_smiles("CCO");
  const auto y = parse_smiles("CCN");
  for (int radius = 0; radius <= 2; ++radius) {
    std::set<int> expected;
    std::set<int> hetero_bits;
    for (const auto* g : {&x, &y}) {
      const auto inv = morgan_invariants(*g, radius);
      for (int r = 0; r <= radius; ++r) {
        for (int v = 0; v < g->num_atoms(); ++v) {
          const auto env = environment(*g, v, r);
          const bool hetero = std::any_of(env.begin(), env.end(),
                                          [&](int a) { return g->atom(a).element != molgraph::Element::C; });
          const int bit = static_cast<int>(inv[static_cast<std::size_t>(r)][static_cast<std::size_t>(v)] % 512);
          (hetero ? hetero_bits : expected).insert(bit);
        }
      }
    }
    const auto fx = morgan_fingerprint(x, radius, 512);
    const auto fy = morgan_fingerprint(y, radius, 512);
    std::set<int> shared;
    for (int b = 0; b < 512; ++b) {
      if (fx.test(b) && fy.test(b)) shared.insert(b);
    }
    INFO("radius " << radius);
    CHECK(shared == expected);
  }
}

TEST_CASE("Bemis-Murcko scaffolds") {
  CHECK(bemis_murcko_scaffold(parse_smiles("CCCC")).empty());
  const auto s = bemis_murcko_scaffold(parse_smiles("c1ccccc1CC(=O)O"));
  CHECK(molgraph::graphs_isomorphic(s, parse_smiles("c1ccccc1")));
  CHECK(molgraph::graphs_isomorphic(bemis_murcko_scaffold(parse_smiles("Cc1ccccc1")),
                                    bemis_murcko_scaffold(parse_smiles("CCc1ccccc1"))));
  // Linkers between rings stay, exocyclic carbonyls on the core stay.
  CHECK(molgraph::graphs_isomorphic(bemis_murcko_scaffold(parse_smiles("CCc1ccc(Cc2ccccc2)cc1")),
                                    parse_smiles("c1ccc(Cc2ccccc2)cc1")));
  CHECK(molgraph::graphs_isomorphic(bemis_murcko_scaffold(parse_smiles("CC1CCC(=O)CC1")),
                                    parse_smiles("O=C1CCCCC1")));
  const auto mask = scaffold_atom_mask(parse_smiles("CCc1ccccc1"));
  CHECK(std::count(mask.begin(), mask.end(), true) == 6);
  CHECK_FALSE(mask[0]);
  CHECK_FALSE(mask[1]);
}

TEST_CASE("functional group detectors") {
  const auto ethanol = functional_group_descriptors(parse_smiles("CCO"));
  CHECK(group(ethanol, "hydroxyl") == 1);
  CHECK(total(ethanol) == 1);
  CHECK(ethanol.normalized[0] == Catch::Approx(1.0 / 3.0));

  const auto benzene = functional_group_descriptors(parse_smiles("c1ccccc1"));
  CHECK(group(benzene, "aromatic_ring") == 1);
  CHECK(total(benzene) == 1);

  const auto ester = functional_group_descriptors(parse_smiles("CC(=O)OC"));
  CHECK(group(ester, "ester") == 1);
  CHECK(group(ester, "carbonyl") == 0);
  CHECK(group(ester, "ether") == 0);
  CHECK(total(ester) == 1);

  const auto acid = functional_group_descriptors(parse_smiles("CC(=O)O"));
  CHECK(group(acid, "carboxylic_acid") == 1);
  CHECK(group(acid, "hydroxyl") == 0);
  CHECK(total(acid) == 1);

  const auto amide = functional_group_descriptors(parse_smiles("CC(=O)N"));
  CHECK(group(amide, "amide") == 1);
  CHECK(group(amide, "primary_amine") == 0);

  CHECK(group(functional_group_descriptors(parse_smiles("CCN")), "primary_amine") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CN(C)C")), "secondary_tertiary_amine") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CC(=O)C")), "carbonyl") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("COC")), "ether") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CSC")), "thioether") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CC#N")), "nitrile") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("C[N+](=O)[O-]")), "nitro") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("FC(Cl)Br")), "halogen") == 3);
  CHECK(group(functional_group_descriptors(parse_smiles("C1CCCCC1")), "aliphatic_ring") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CS(=O)(=O)C")), "sulfonyl") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("CC#C")), "terminal_alkyne") == 1);
  CHECK(group(functional_group_descriptors(parse_smiles("c1ccc2ccccc2c1")), "aromatic_ring") == 2);
}

TEST_CASE("normalized descriptors stay in [0, 1]") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto g = testing::random_molecule(rng);
    const auto v = functional_group_descriptors(g);
    for (std::size_t t = 0; t < kNumFunctionalGroups; ++t) {
      CHECK(v.normalized[t] >= 0.0);
      CHECK(v.normalized[t] <= 1.0);
      CHECK(v.normalized[t] == static_cast<double>(v.counts[t]) / std::max(1, g.num_atoms()));
    }
  }
}

TEST_CASE("scalar descriptors") {
  const auto methane = scalar_descriptors(parse_smiles("C"));
  CHECK(methane.molecular_weight == Catch::Approx(16.04).margin(0.01));
  CHECK(methane.scaffold_weight == 0.0);
  CHECK(methane.heavy_atom_count == 1);
  CHECK(scalar_descriptors(parse_smiles("CCCCO")).scaffold_weight == 0.0);
  const auto benzene = scalar_descriptors(parse_smiles("c1ccccc1"));
  CHECK(benzene.molecular_weight == Catch::Approx(78.11).margin(0.01));
  CHECK(benzene.scaffold_weight == benzene.molecular_weight);
  // Toluene's scaffold is benzene.
  CHECK(scalar_descriptors(parse_smiles("Cc1ccccc1")).scaffold_weight == Catch::Approx(benzene.molecular_weight));
}

TEST_CASE("shipped chemistry tables match the compiled ones") {
  std::ifstream in(std::string(PROMPTMOL_DATA_DIR) + "/chem_tables.json");
  REQUIRE(in);
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto& masses = j.at("atomic_masses_dalton");
  CHECK(masses.at("H").get<double>() == molgraph::kHydrogenMass);
  int checked = 0;
  for (std::size_t e = 0; e < molgraph::kNumElements; ++e) {
    const auto el = static_cast<molgraph::Element>(e);
    const std::string sym(molgraph::symbol(el));
    INFO(sym);
    CHECK(masses.at(sym).get<double>() == molgraph::atomic_mass(el));
    ++checked;
  }
  CHECK(checked == 10);
  const auto& groups = j.at("functional_groups");
  REQUIRE(groups.size() == kNumFunctionalGroups);
  for (std::size_t t = 0; t < kNumFunctionalGroups; ++t) {
    CHECK(groups[t].at("index").get<std::size_t>() == t);
    CHECK(groups[t].at("name").get<std::string>() == kFunctionalGroupNames[t]);
  }
}
