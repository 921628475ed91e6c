// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/error.hpp"
#include "promptmol/molgraph/element.hpp"

namespace promptmol::molgraph {

enum class BondOrder : std::uint8_t { Single = 0, Double = 1, Triple = 2, Aromatic = 3 };

inline constexpr std::size_t kNumBondOrders = 4;

inline constexpr int bond_order_index(BondOrder o) { return static_cast<int>(o); }

// Contribution of a bond to the valence sum; aromatic bonds count once and
// the pi electron is accounted for by the hydrogen rule.
inline constexpr int valence_contribution(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

struct Atom {
  Element element = Element::C;
  int formal_charge = 0;
  int explicit_h = 0;  // hydrogens written inside brackets
  int implicit_h = 0;  // derived from the valence table for organic-subset atoms
  bool aromatic = false;
  bool bracket = false;  // hydrogen count is fixed by explicit_h
  bool in_ring = false;

  int total_h() const noexcept { return bracket ? explicit_h : implicit_h; }
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;

  int other(int atom) const noexcept { return atom == begin ? end : begin; }
};

struct Neighbor {
  int atom;
  int bond;
};

class MolecularGraph {
 public:
  MolecularGraph() = default;

  int add_atom(const Atom& atom) {
    atoms_.push_back(atom);
    adjacency_.emplace_back();
    return static_cast<int>(atoms_.size()) - 1;
  }

  int add_bond(int a, int b, BondOrder order) {
    if (a == b) throw std::invalid_argument("self-loop bond on atom " + std::to_string(a));
    if (a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms()) {
      throw std::out_of_range("bond endpoint out of range");
    }
    if (bond_between(a, b)) {
      throw std::invalid_argument("duplicate bond between atoms " + std::to_string(a) +
                                  " and " + std::to_string(b));
    }
    const int idx = static_cast<int>(bonds_.size());
    bonds_.push_back(Bond{a, b, order, false});
    adjacency_[static_cast<std::size_t>(a)].push_back({b, idx});
    adjacency_[static_cast<std::size_t>(b)].push_back({a, idx});
    return idx;
  }

  int num_atoms() const noexcept { return static_cast<int>(atoms_.size()); }
  int num_bonds() const noexcept { return static_cast<int>(bonds_.size()); }
  bool empty() const noexcept { return atoms_.empty(); }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::vector<Bond>& bonds() const noexcept { return bonds_; }
  const Atom& atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }
  Atom& atom(int i) { return atoms_.at(static_cast<std::size_t>(i)); }
  const Bond& bond(int i) const { return bonds_.at(static_cast<std::size_t>(i)); }
  Bond& bond(int i) { return bonds_.at(static_cast<std::size_t>(i)); }

  std::span<const Neighbor> neighbors(int i) const {
    return adjacency_.at(static_cast<std::size_t>(i));
  }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  std::optional<int> bond_between(int a, int b) const {
    for (const Neighbor& n : neighbors(a)) {
      if (n.atom == b) return n.bond;
    }
    return std::nullopt;
  }

  // Sum of bond valence contributions around atom i.
  int bond_order_sum(int i) const {
    int sum = 0;
    for (const Neighbor& n : neighbors(i)) sum += valence_contribution(bond(n.bond).order);
    return sum;
  }

  bool has_aromatic_bond(int i) const {
    for (const Neighbor& n : neighbors(i)) {
      if (bond(n.bond).order == BondOrder::Aromatic) return true;
    }
    return false;
  }

  // Copy of the graph without the flagged atoms. old_to_new receives -1 for
  // removed atoms. Derived data is not recomputed here.
  MolecularGraph without_atoms(const std::vector<bool>& remove, std::vector<int>* old_to_new = nullptr) const {
    MolecularGraph out;
    std::vector<int> map(atoms_.size(), -1);
    for (int i = 0; i < num_atoms(); ++i) {
      if (!remove[static_cast<std::size_t>(i)]) map[static_cast<std::size_t>(i)] = out.add_atom(atoms_[static_cast<std::size_t>(i)]);
    }
    for (const Bond& b : bonds_) {
      const int nb = map[static_cast<std::size_t>(b.begin)];
      const int ne = map[static_cast<std::size_t>(b.end)];
      if (nb >= 0 && ne >= 0) out.add_bond(nb, ne, b.order);
    }
    if (old_to_new) *old_to_new = std::move(map);
    return out;
  }

  // Appends a disjoint copy of other; returns the index offset of its atoms.
  int append(const MolecularGraph& other) {
    const int offset = num_atoms();
    for (const Atom& a : other.atoms_) add_atom(a);
    for (const Bond& b : other.bonds_) add_bond(b.begin + offset, b.end + offset, b.order);
    return offset;
  }

  bool is_connected() const {
    if (atoms_.empty()) return true;
    std::vector<bool> seen(atoms_.size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const Neighbor& n : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(n.atom)]) {
          seen[static_cast<std::size_t>(n.atom)] = true;
          ++count;
          stack.push_back(n.atom);
        }
      }
    }
    return count == num_atoms();
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

// Hydrogens an organic-subset atom would carry given its current bonds:
// smallest allowed valence that fits, minus one for the pi electron of an
// aromatic atom when there is room. Returns nullopt when nothing fits.
inline std::optional<int> organic_implicit_h(const MolecularGraph& g, int i) {
  const Atom& a = g.atom(i);
  const int sum = g.bond_order_sum(i);
  for (int v : allowed_valences(a.element, a.formal_charge)) {
    if (v < sum) continue;
    int h = v - sum;
    if (a.aromatic && h >= 1) --h;
    return h;
  }
  return std::nullopt;
}

inline int free_valence(const MolecularGraph& g, int i) {
  const Atom& a = g.atom(i);
  if (!a.bracket) return a.implicit_h;
  return max_valence(a.element, a.formal_charge) - g.bond_order_sum(i) - a.explicit_h;
}

// Index of the first atom violating its valence table, if any.
inline std::optional<int> find_valence_violation(const MolecularGraph& g) {
  for (int i = 0; i < g.num_atoms(); ++i) {
    const Atom& a = g.atom(i);
    const int maxv = max_valence(a.element, a.formal_charge);
    if (!a.bracket && !organic_implicit_h(g, i)) return i;
    if (g.bond_order_sum(i) + a.total_h() > maxv) return i;
  }
  return std::nullopt;
}

}  // namespace promptmol::molgraph
