// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <vector>

#include "promptmol/molgraph/graph.hpp"

namespace promptmol::molgraph {

struct RingInfo {
  std::vector<int> atoms;  // sorted
  std::vector<int> bonds;  // sorted
};

namespace detail {

using BondSet = std::vector<std::uint64_t>;

inline BondSet make_bond_set(int num_bonds) {
  return BondSet(static_cast<std::size_t>((num_bonds + 63) / 64), 0);
}
inline void toggle(BondSet& s, int b) {
  s[static_cast<std::size_t>(b / 64)] ^= (std::uint64_t{1} << (b % 64));
}
inline bool contains(const BondSet& s, int b) {
  return (s[static_cast<std::size_t>(b / 64)] >> (b % 64)) & 1U;
}

struct BfsTree {
  std::vector<int> parent_atom;
  std::vector<int> parent_bond;
  std::vector<int> depth;
};

inline BfsTree bfs_tree(const MolecularGraph& g, int root, BfsTree tree) {
  std::queue<int> q;
  tree.depth[static_cast<std::size_t>(root)] = 0;
  q.push(root);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const Neighbor& n : g.neighbors(v)) {
      if (tree.depth[static_cast<std::size_t>(n.atom)] < 0) {
        tree.depth[static_cast<std::size_t>(n.atom)] = tree.depth[static_cast<std::size_t>(v)] + 1;
        tree.parent_atom[static_cast<std::size_t>(n.atom)] = v;
        tree.parent_bond[static_cast<std::size_t>(n.atom)] = n.bond;
        q.push(n.atom);
      }
    }
  }
  return tree;
}

inline BfsTree empty_tree(const MolecularGraph& g) {
  const auto n = static_cast<std::size_t>(g.num_atoms());
  return BfsTree{std::vector<int>(n, -1), std::vector<int>(n, -1), std::vector<int>(n, -1)};
}

}  // namespace detail

// Fundamental cycles of a BFS spanning forest, each as a list of bond indices.
// Their number equals the cyclomatic number of the graph.
inline std::vector<std::vector<int>> cycle_basis(const MolecularGraph& g) {
  detail::BfsTree tree = detail::empty_tree(g);
  for (int r = 0; r < g.num_atoms(); ++r) {
    if (tree.depth[static_cast<std::size_t>(r)] < 0) tree = detail::bfs_tree(g, r, std::move(tree));
  }
  std::vector<std::vector<int>> cycles;
  for (int b = 0; b < g.num_bonds(); ++b) {
    int u = g.bond(b).begin;
    int v = g.bond(b).end;
    if (tree.parent_bond[static_cast<std::size_t>(u)] == b || tree.parent_bond[static_cast<std::size_t>(v)] == b) continue;
    std::vector<int> cycle{b};
    while (u != v) {
      if (tree.depth[static_cast<std::size_t>(u)] >= tree.depth[static_cast<std::size_t>(v)]) {
        cycle.push_back(tree.parent_bond[static_cast<std::size_t>(u)]);
        u = tree.parent_atom[static_cast<std::size_t>(u)];
      } else {
        cycle.push_back(tree.parent_bond[static_cast<std::size_t>(v)]);
        v = tree.parent_atom[static_cast<std::size_t>(v)];
      }
    }
    cycles.push_back(std::move(cycle));
  }
  return cycles;
}

// Atoms and bonds lying on at least one simple cycle. Every such bond belongs
// to some fundamental cycle, so the union over the basis is exact.
inline RingInfo perceive_rings(const MolecularGraph& g) {
  std::vector<bool> ring_atom(static_cast<std::size_t>(g.num_atoms()), false);
  std::vector<bool> ring_bond(static_cast<std::size_t>(g.num_bonds()), false);
  for (const auto& cycle : cycle_basis(g)) {
    for (int b : cycle) {
      ring_bond[static_cast<std::size_t>(b)] = true;
      ring_atom[static_cast<std::size_t>(g.bond(b).begin)] = true;
      ring_atom[static_cast<std::size_t>(g.bond(b).end)] = true;
    }
  }
  RingInfo info;
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (ring_atom[static_cast<std::size_t>(i)]) info.atoms.push_back(i);
  }
  for (int b = 0; b < g.num_bonds(); ++b) {
    if (ring_bond[static_cast<std::size_t>(b)]) info.bonds.push_back(b);
  }
  return info;
}

inline void assign_ring_flags(MolecularGraph& g) {
  const RingInfo info = perceive_rings(g);
  for (int i = 0; i < g.num_atoms(); ++i) g.atom(i).in_ring = false;
  for (int b = 0; b < g.num_bonds(); ++b) g.bond(b).in_ring = false;
  for (int i : info.atoms) g.atom(i).in_ring = true;
  for (int b : info.bonds) g.bond(b).in_ring = true;
}

// Minimum cycle basis (smallest set of smallest rings) from Horton candidate
// cycles with GF(2) independence filtering. Each ring is returned as its
// sorted atom list.
inline std::vector<std::vector<int>> smallest_rings(const MolecularGraph& g) {
  const int num_cycles = static_cast<int>(cycle_basis(g).size());
  if (num_cycles == 0) return {};

  struct Candidate {
    std::vector<int> bonds;
    detail::BondSet set;
  };
  std::vector<Candidate> candidates;
  for (int x = 0; x < g.num_atoms(); ++x) {
    if (!g.atom(x).in_ring) continue;
    const detail::BfsTree tree = detail::bfs_tree(g, x, detail::empty_tree(g));
    for (int b = 0; b < g.num_bonds(); ++b) {
      const int u = g.bond(b).begin;
      const int v = g.bond(b).end;
      if (tree.depth[static_cast<std::size_t>(u)] < 0) continue;
      if (tree.parent_bond[static_cast<std::size_t>(u)] == b || tree.parent_bond[static_cast<std::size_t>(v)] == b) continue;
      std::vector<int> path_u;
      std::vector<int> path_v;
      std::vector<int> atoms_u{u};
      for (int a = u; a != x; a = tree.parent_atom[static_cast<std::size_t>(a)]) {
        path_u.push_back(tree.parent_bond[static_cast<std::size_t>(a)]);
        atoms_u.push_back(tree.parent_atom[static_cast<std::size_t>(a)]);
      }
      bool disjoint = true;
      for (int a = v; a != x && disjoint; a = tree.parent_atom[static_cast<std::size_t>(a)]) {
        if (std::find(atoms_u.begin(), atoms_u.end(), a) != atoms_u.end()) disjoint = false;
        path_v.push_back(tree.parent_bond[static_cast<std::size_t>(a)]);
      }
      if (!disjoint) continue;
      Candidate c;
      c.set = detail::make_bond_set(g.num_bonds());
      c.bonds.push_back(b);
      c.bonds.insert(c.bonds.end(), path_u.begin(), path_u.end());
      c.bonds.insert(c.bonds.end(), path_v.begin(), path_v.end());
      for (int bb : c.bonds) detail::toggle(c.set, bb);
      candidates.push_back(std::move(c));
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.bonds.size() < b.bonds.size(); });

  // Greedy independence test via incremental Gaussian elimination.
  std::vector<detail::BondSet> reduced;
  std::vector<int> pivots;
  std::vector<std::vector<int>> rings;
  for (const Candidate& c : candidates) {
    if (static_cast<int>(rings.size()) == num_cycles) break;
    detail::BondSet v = c.set;
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      if (detail::contains(v, pivots[r])) {
        for (std::size_t w = 0; w < v.size(); ++w) v[w] ^= reduced[r][w];
      }
    }
    int pivot = -1;
    for (int b = 0; b < g.num_bonds(); ++b) {
      if (detail::contains(v, b)) {
        pivot = b;
        break;
      }
    }
    if (pivot < 0) continue;
    for (std::size_t r = 0; r < reduced.size(); ++r) {
      if (detail::contains(reduced[r], pivot)) {
        for (std::size_t w = 0; w < v.size(); ++w) reduced[r][w] ^= v[w];
      }
    }
    reduced.push_back(v);
    pivots.push_back(pivot);
    std::vector<int> atoms;
    for (int b : c.bonds) {
      atoms.push_back(g.bond(b).begin);
      atoms.push_back(g.bond(b).end);
    }
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    rings.push_back(std::move(atoms));
  }
  return rings;
}

// Recomputes ring flags and implicit hydrogens after a structural edit.
// Organic-subset atoms that no longer fit their valence table keep zero
// implicit hydrogens; callers validate with find_valence_violation.
inline void update_derived(MolecularGraph& g) {
  assign_ring_flags(g);
  for (int i = 0; i < g.num_atoms(); ++i) {
    Atom& a = g.atom(i);
    if (!a.bracket) a.implicit_h = organic_implicit_h(g, i).value_or(0);
  }
}

}  // namespace promptmol::molgraph
