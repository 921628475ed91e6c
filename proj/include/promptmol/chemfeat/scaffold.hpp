// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "promptmol/molgraph.hpp"

namespace promptmol::chemfeat {

using molgraph::BondOrder;
using molgraph::MolecularGraph;

// Atoms of the Bemis-Murcko scaffold. Terminal non-ring atoms are pruned to
// a fixpoint, which leaves ring systems plus linkers; atoms attached to that
// core by a double or triple bond (exocyclic C=O and the like) are then put
// back. Acyclic molecules have no scaffold atoms.
inline std::vector<bool> scaffold_atom_mask(const MolecularGraph& g) {
  const auto n = static_cast<std::size_t>(g.num_atoms());
  std::vector<bool> keep(n, false);
  bool any_ring = false;
  for (const auto& a : g.atoms()) any_ring = any_ring || a.in_ring;
  if (!any_ring) return keep;

  std::vector<int> degree(n);
  std::vector<int> stack;
  for (int i = 0; i < g.num_atoms(); ++i) {
    keep[static_cast<std::size_t>(i)] = true;
    degree[static_cast<std::size_t>(i)] = g.degree(i);
    if (!g.atom(i).in_ring && degree[static_cast<std::size_t>(i)] <= 1) stack.push_back(i);
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (!keep[static_cast<std::size_t>(v)]) continue;
    keep[static_cast<std::size_t>(v)] = false;
    for (const auto& nb : g.neighbors(v)) {
      const auto u = static_cast<std::size_t>(nb.atom);
      if (!keep[u]) continue;
      if (--degree[u] <= 1 && !g.atom(nb.atom).in_ring) stack.push_back(nb.atom);
    }
  }

  std::vector<bool> result = keep;
  for (int v = 0; v < g.num_atoms(); ++v) {
    if (keep[static_cast<std::size_t>(v)]) continue;
    for (const auto& nb : g.neighbors(v)) {
      const BondOrder o = g.bond(nb.bond).order;
      if (keep[static_cast<std::size_t>(nb.atom)] && (o == BondOrder::Double || o == BondOrder::Triple)) {
        result[static_cast<std::size_t>(v)] = true;
      }
    }
  }
  return result;
}

// Scaffold as a standalone graph (empty for acyclic input). Hydrogens on
// former attachment atoms are re-derived.
inline MolecularGraph bemis_murcko_scaffold(const MolecularGraph& g) {
  const std::vector<bool> mask = scaffold_atom_mask(g);
  std::vector<bool> remove(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) remove[i] = !mask[i];
  MolecularGraph s = g.without_atoms(remove);
  molgraph::update_derived(s);
  return s;
}

}  // namespace promptmol::chemfeat
