// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "promptmol/molgraph.hpp"
#include "promptmol/random.hpp"

namespace promptmol::testing {

// A ring of 3 to 6 atoms with random side atoms attached wherever a free
// valence remains, for a total of min_atoms..max_atoms heavy atoms.
inline molgraph::MolecularGraph random_molecule(Rng& rng, int min_atoms = 3, int max_atoms = 12) {
  using molgraph::Element;
  const int ring = 3 + static_cast<int>(uniform_index(rng, 4));
  const int lo = std::max(min_atoms, ring);
  const int target = lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(std::max(max_atoms, lo) - lo + 1)));
  molgraph::MolecularGraph g;
  for (int i = 0; i < ring; ++i) {
    molgraph::Atom a;
    a.element = uniform01(rng) < 0.8 ? Element::C : Element::N;
    g.add_atom(a);
  }
  for (int i = 0; i < ring; ++i) g.add_bond(i, (i + 1) % ring, molgraph::BondOrder::Single);
  molgraph::update_derived(g);
  static constexpr Element kSide[] = {Element::C, Element::C, Element::C, Element::N, Element::O, Element::F, Element::Cl, Element::S};
  while (g.num_atoms() < target) {
    std::vector<int> open;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (molgraph::free_valence(g, i) > 0) open.push_back(i);
    }
    if (open.empty()) break;
    const int host = open[uniform_index(rng, open.size())];
    molgraph::Atom a;
    a.element = kSide[uniform_index(rng, std::size(kSide))];
    const int v = g.add_atom(a);
    g.add_bond(host, v, molgraph::BondOrder::Single);
    molgraph::update_derived(g);
  }
  return g;
}

}  // namespace promptmol::testing
