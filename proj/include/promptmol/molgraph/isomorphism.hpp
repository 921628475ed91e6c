// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "promptmol/molgraph/graph.hpp"

namespace promptmol::molgraph {

inline constexpr int kMaxIsomorphismAtoms = 64;

namespace detail {

inline auto atom_label(const MolecularGraph& g, int i) {
  const Atom& a = g.atom(i);
  return std::make_tuple(element_index(a.element), a.formal_charge, a.aromatic, g.degree(i));
}

class IsomorphismSearch {
 public:
  IsomorphismSearch(const MolecularGraph& a, const MolecularGraph& b) : a_(a), b_(b) {}

  bool run() {
    const int n = a_.num_atoms();
    map_ab_.assign(static_cast<std::size_t>(n), -1);
    map_ba_.assign(static_cast<std::size_t>(n), -1);
    order_ = bfs_order();
    return extend(0);
  }

 private:
  // Visit order where every atom after the first of its component has an
  // already-placed neighbour, so bond checks prune early.
  std::vector<int> bfs_order() const {
    const int n = a_.num_atoms();
    std::vector<int> order;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int r = 0; r < n; ++r) {
      if (seen[static_cast<std::size_t>(r)]) continue;
      std::queue<int> q;
      q.push(r);
      seen[static_cast<std::size_t>(r)] = true;
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        order.push_back(v);
        for (const Neighbor& nb : a_.neighbors(v)) {
          if (!seen[static_cast<std::size_t>(nb.atom)]) {
            seen[static_cast<std::size_t>(nb.atom)] = true;
            q.push(nb.atom);
          }
        }
      }
    }
    return order;
  }

  bool feasible(int va, int vb) const {
    if (map_ba_[static_cast<std::size_t>(vb)] >= 0) return false;
    if (atom_label(a_, va) != atom_label(b_, vb)) return false;
    int mapped_neighbors = 0;
    for (const Neighbor& nb : a_.neighbors(va)) {
      const int mb = map_ab_[static_cast<std::size_t>(nb.atom)];
      if (mb < 0) continue;
      ++mapped_neighbors;
      const auto bond_b = b_.bond_between(vb, mb);
      if (!bond_b || b_.bond(*bond_b).order != a_.bond(nb.bond).order) return false;
    }
    int mapped_b = 0;
    for (const Neighbor& nb : b_.neighbors(vb)) {
      if (map_ba_[static_cast<std::size_t>(nb.atom)] >= 0) ++mapped_b;
    }
    return mapped_b == mapped_neighbors;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    const int va = order_[depth];
    // Candidates: neighbours of the image of an already-mapped neighbour.
    int anchor = -1;
    for (const Neighbor& nb : a_.neighbors(va)) {
      if (map_ab_[static_cast<std::size_t>(nb.atom)] >= 0) {
        anchor = map_ab_[static_cast<std::size_t>(nb.atom)];
        break;
      }
    }
    std::vector<int> candidates;
    if (anchor >= 0) {
      for (const Neighbor& nb : b_.neighbors(anchor)) candidates.push_back(nb.atom);
    } else {
      for (int i = 0; i < b_.num_atoms(); ++i) candidates.push_back(i);
    }
    for (int vb : candidates) {
      if (!feasible(va, vb)) continue;
      map_ab_[static_cast<std::size_t>(va)] = vb;
      map_ba_[static_cast<std::size_t>(vb)] = va;
      if (extend(depth + 1)) return true;
      map_ab_[static_cast<std::size_t>(va)] = -1;
      map_ba_[static_cast<std::size_t>(vb)] = -1;
    }
    return false;
  }

  const MolecularGraph& a_;
  const MolecularGraph& b_;
  std::vector<int> order_;
  std::vector<int> map_ab_;
  std::vector<int> map_ba_;
};

}  // namespace detail

// True iff an isomorphism preserving element, charge, aromaticity and bond
// order exists. Backtracking with degree/element pruning; graphs above 64
// atoms are rejected.
inline bool graphs_isomorphic(const MolecularGraph& a, const MolecularGraph& b) {
  if (a.num_atoms() > kMaxIsomorphismAtoms || b.num_atoms() > kMaxIsomorphismAtoms) {
    throw std::length_error("graphs_isomorphic supports at most 64 atoms");
  }
  if (a.num_atoms() != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  auto label_multiset = [](const MolecularGraph& g) {
    std::vector<decltype(detail::atom_label(g, 0))> labels;
    for (int i = 0; i < g.num_atoms(); ++i) labels.push_back(detail::atom_label(g, i));
    std::sort(labels.begin(), labels.end());
    return labels;
  };
  if (label_multiset(a) != label_multiset(b)) return false;
  auto bond_orders = [](const MolecularGraph& g) {
    std::vector<int> orders;
    for (const Bond& bd : g.bonds()) orders.push_back(bond_order_index(bd.order));
    std::sort(orders.begin(), orders.end());
    return orders;
  };
  if (bond_orders(a) != bond_orders(b)) return false;
  return detail::IsomorphismSearch(a, b).run();
}

}  // namespace promptmol::molgraph
