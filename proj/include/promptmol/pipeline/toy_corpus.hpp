// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/perturb.hpp"
#include "promptmol/random.hpp"

// Synthetic regression corpus with structure-property signal by construction.
//
// Each molecule is one of twelve ring scaffolds decorated with one to three
// acyclic fragments from the built-in pool. Its label is
//
//   y = 5 + offset(s) + sum over set bits b of its 512-bit radius-2 Morgan
//       fingerprint of w(b)
//   offset(s) = 0.25 * ((7 s) mod 12) - 1.375
//   w(b)      = 0.6 * (u(b) - 0.5),  u(b) = top 53 bits of splitmix64(b) / 2^53
//
// so labels are an affine function of fingerprint bits plus a scaffold
// dependent offset.

namespace promptmol::pipeline::toy {

inline constexpr std::uint64_t kDefaultSeed = 20240601;
inline constexpr int kMoleculesPerScaffold = 25;

inline const std::array<const char*, 12>& scaffolds() {
  static const std::array<const char*, 12> kScaffolds = {
      "c1ccccc1",          "c1ccncc1",         "c1ccc2ccccc2c1",  "C1CCCCC1",
      "c1ccc(-c2ccccc2)cc1", "c1ccc2[nH]ccc2c1", "c1ccc2ncccc2c1",  "C1CCNCC1",
      "c1ccoc1",           "c1ccsc1",          "c1ccc(Cc2ccccc2)cc1", "c1ccc2c(c1)CCC2"};
  return kScaffolds;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double bit_weight(int bit) {
  const double u = static_cast<double>(splitmix64(static_cast<std::uint64_t>(bit)) >> 11) * 0x1.0p-53;
  return 0.6 * (u - 0.5);
}

inline double scaffold_offset(int s) { return 0.25 * static_cast<double>((7 * s) % 12) - 1.375; }

inline double label_for(const molgraph::MolecularGraph& g, int scaffold_id) {
  const chemfeat::Fingerprint fp = chemfeat::morgan_fingerprint(g, 2, 512);
  double y = 5.0 + scaffold_offset(scaffold_id);
  for (int b : fp.on_bits()) y += bit_weight(b);
  return y;
}

struct ToyMolecule {
  std::string smiles;
  double label = 0.0;
  int scaffold_id = 0;
};

// Deterministic for a given seed. Molecules are unique by canonical SMILES.
inline std::vector<ToyMolecule> generate(std::uint64_t seed = kDefaultSeed, int per_scaffold = kMoleculesPerScaffold) {
  const perturb::FragmentPool pool = perturb::builtin_fragment_pool();
  std::vector<ToyMolecule> out;
  std::set<std::string> seen;
  for (int s = 0; s < static_cast<int>(scaffolds().size()); ++s) {
    const molgraph::MolecularGraph core = molgraph::parse_smiles(scaffolds()[static_cast<std::size_t>(s)]);
    const std::string core_key = molgraph::write_smiles(core);
    std::vector<int> sites;
    for (int a = 0; a < core.num_atoms(); ++a) {
      if (!core.atom(a).bracket && core.atom(a).total_h() > 0) sites.push_back(a);
    }
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(s));
    int made = 0;
    for (int attempt = 0; made < per_scaffold; ++attempt) {
      if (attempt > 100000) throw std::runtime_error("toy corpus generation stalled");
      std::vector<int> order = sites;
      shuffle(order, rng);
      const int subs = 1 + static_cast<int>(uniform_index(rng, 3));
      molgraph::MolecularGraph g = core;
      for (int k = 0; k < subs && k < static_cast<int>(order.size()); ++k) {
        const perturb::Fragment& f = pool.fragments[uniform_index(rng, pool.fragments.size())];
        const int off = g.append(f.graph);
        g.add_bond(order[static_cast<std::size_t>(k)], off + f.attachment, molgraph::BondOrder::Single);
      }
      molgraph::update_derived(g);
      if (molgraph::find_valence_violation(g)) continue;
      const molgraph::MolecularGraph sc = chemfeat::bemis_murcko_scaffold(g);
      if (molgraph::write_smiles(sc) != core_key) continue;
      const std::string smi = molgraph::write_smiles(g);
      if (!seen.insert(smi).second) continue;
      // Keep only strings that parse back to the same molecule.
      const molgraph::MolecularGraph back = molgraph::parse_smiles(smi);
      out.push_back({smi, label_for(back, s), s});
      ++made;
    }
  }
  return out;
}

}  // namespace promptmol::pipeline::toy
