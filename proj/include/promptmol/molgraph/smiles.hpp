// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "promptmol/error.hpp"
#include "promptmol/molgraph/graph.hpp"
#include "promptmol/molgraph/rings.hpp"

namespace promptmol::molgraph {

// SMILES subset: organic-subset atoms (B C N O P S F Cl Br I, aromatic
// b c n o p s), bracket atoms with hydrogen count and charge, branches,
// ring closures 1-9 and %nn, bond symbols - = # :. Stereo marks / \ @ are
// consumed and dropped with a warning. '.' is rejected.
class SmilesParser {
 public:
  explicit SmilesParser(std::string_view text) : text_(text) {}

  MolecularGraph parse(std::vector<std::string>* warnings) {
    if (text_.empty()) throw SmilesError("empty SMILES", 0);
    warnings_ = warnings;
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (static_cast<unsigned char>(text_[i]) > 127) throw SmilesError("non-ASCII character", i);
    }

    int prev = -1;
    std::optional<PendingBond> pending;
    std::vector<int> branch_stack;
    std::vector<std::size_t> branch_pos;

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (prev < 0) throw SmilesError("branch before first atom", pos_);
        if (pending) throw SmilesError("bond symbol before branch", pos_);
        branch_stack.push_back(prev);
        branch_pos.push_back(pos_);
        ++pos_;
      } else if (c == ')') {
        if (branch_stack.empty()) throw SmilesError("unbalanced ')'", pos_);
        if (pending) throw SmilesError("dangling bond symbol", pending->position);
        if (last_was_open_) throw SmilesError("empty branch", pos_);
        prev = branch_stack.back();
        branch_stack.pop_back();
        branch_pos.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\') {
        if (prev < 0) throw SmilesError("bond symbol before first atom", pos_);
        if (pending) throw SmilesError("consecutive bond symbols", pos_);
        BondOrder order = BondOrder::Single;
        if (c == '=') order = BondOrder::Double;
        if (c == '#') order = BondOrder::Triple;
        if (c == ':') order = BondOrder::Aromatic;
        if (c == '/' || c == '\\') warn("directional bond '" + std::string(1, c) + "' ignored", pos_);
        pending = PendingBond{order, pos_};
        ++pos_;
      } else if (c == '.') {
        throw SmilesError("multi-fragment SMILES not supported", pos_);
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (prev < 0) throw SmilesError("ring closure before first atom", pos_);
        const std::size_t start = pos_;
        const int number = read_ring_number();
        handle_ring_closure(prev, number, pending, start);
        pending.reset();
      } else {
        const std::size_t start = pos_;
        const int atom = (c == '[') ? read_bracket_atom() : read_organic_atom();
        atom_pos_.push_back(start);
        if (prev >= 0) {
          add_chain_bond(prev, atom, pending);
        } else if (pending) {
          throw SmilesError("bond symbol before first atom", pending->position);
        }
        pending.reset();
        prev = atom;
      }
      last_was_open_ = (c == '(');
    }

    if (pending) throw SmilesError("dangling bond symbol", pending->position);
    if (!branch_stack.empty()) throw SmilesError("unbalanced '('", branch_pos.back());
    if (!open_rings_.empty()) {
      throw SmilesError("unclosed ring " + std::to_string(open_rings_.begin()->first),
                        open_rings_.begin()->second.position);
    }
    if (!graph_.is_connected()) throw SmilesError("multi-fragment SMILES not supported", 0);

    assign_ring_flags(graph_);
    // Bonds between aromatic atoms default to aromatic only inside rings
    // (e.g. the biaryl bond of biphenyl is single).
    for (int b = 0; b < graph_.num_bonds(); ++b) {
      Bond& bond = graph_.bond(b);
      if (bond.order != BondOrder::Aromatic || bond.in_ring) continue;
      if (implicit_aromatic_[static_cast<std::size_t>(b)]) {
        bond.order = BondOrder::Single;
      } else {
        throw SmilesError("aromatic bond outside ring", bond_pos_[static_cast<std::size_t>(b)]);
      }
    }
    for (int i = 0; i < graph_.num_atoms(); ++i) {
      if (graph_.atom(i).aromatic && !graph_.atom(i).in_ring) {
        throw SmilesError("aromatic atom outside ring", atom_pos_[static_cast<std::size_t>(i)]);
      }
    }
    for (int i = 0; i < graph_.num_atoms(); ++i) {
      Atom& a = graph_.atom(i);
      if (!a.bracket) {
        const auto h = organic_implicit_h(graph_, i);
        if (!h) throw ValenceError("valence exceeded for " + std::string(symbol(a.element)), atom_pos_[static_cast<std::size_t>(i)]);
        a.implicit_h = *h;
      }
    }
    if (const auto bad = find_valence_violation(graph_)) {
      throw ValenceError("valence exceeded for " + std::string(symbol(graph_.atom(*bad).element)),
                         atom_pos_[static_cast<std::size_t>(*bad)]);
    }
    return std::move(graph_);
  }

 private:
  struct PendingBond {
    BondOrder order;
    std::size_t position;
  };
  struct OpenRing {
    int atom;
    std::optional<PendingBond> bond;
    std::size_t position;
  };

  void warn(const std::string& what, std::size_t at) {
    if (warnings_) warnings_->push_back(what + " at offset " + std::to_string(at));
  }

  int read_ring_number() {
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw SmilesError("malformed %nn ring closure", pos_);
      }
      const int n = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      return n;
    }
    return text_[pos_++] - '0';
  }

  BondOrder default_order(int a, int b) const {
    return (graph_.atom(a).aromatic && graph_.atom(b).aromatic) ? BondOrder::Aromatic : BondOrder::Single;
  }

  void add_bond_checked(int a, int b, BondOrder order, bool implicit, std::size_t at) {
    if (a == b) throw SmilesError("ring closure to the same atom", at);
    if (graph_.bond_between(a, b)) throw SmilesError("duplicate bond", at);
    graph_.add_bond(a, b, order);
    implicit_aromatic_.push_back(implicit && order == BondOrder::Aromatic);
    bond_pos_.push_back(at);
  }

  void add_chain_bond(int prev, int atom, const std::optional<PendingBond>& pending) {
    if (pending) {
      add_bond_checked(prev, atom, pending->order, false, pending->position);
    } else {
      add_bond_checked(prev, atom, default_order(prev, atom), true, atom_pos_.back());
    }
  }

  void handle_ring_closure(int atom, int number, const std::optional<PendingBond>& pending, std::size_t at) {
    auto it = open_rings_.find(number);
    if (it == open_rings_.end()) {
      open_rings_.emplace(number, OpenRing{atom, pending, at});
      return;
    }
    const OpenRing ring = it->second;
    open_rings_.erase(it);
    if (ring.bond && pending && ring.bond->order != pending->order) {
      throw SmilesError("conflicting ring closure bond orders", at);
    }
    if (ring.bond) {
      add_bond_checked(ring.atom, atom, ring.bond->order, false, ring.bond->position);
    } else if (pending) {
      add_bond_checked(ring.atom, atom, pending->order, false, pending->position);
    } else {
      add_bond_checked(ring.atom, atom, default_order(ring.atom, atom), true, at);
    }
  }

  int read_organic_atom() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    Atom atom;
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      atom.element = Element::Cl;
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      atom.element = Element::Br;
      pos_ += 2;
    } else {
      switch (c) {
        case 'B': atom.element = Element::B; break;
        case 'C': atom.element = Element::C; break;
        case 'N': atom.element = Element::N; break;
        case 'O': atom.element = Element::O; break;
        case 'P': atom.element = Element::P; break;
        case 'S': atom.element = Element::S; break;
        case 'F': atom.element = Element::F; break;
        case 'I': atom.element = Element::I; break;
        case 'b': atom.element = Element::B; atom.aromatic = true; break;
        case 'c': atom.element = Element::C; atom.aromatic = true; break;
        case 'n': atom.element = Element::N; atom.aromatic = true; break;
        case 'o': atom.element = Element::O; atom.aromatic = true; break;
        case 'p': atom.element = Element::P; atom.aromatic = true; break;
        case 's': atom.element = Element::S; atom.aromatic = true; break;
        default:
          throw SmilesError("unknown element '" + std::string(1, c) + "'", start);
      }
      ++pos_;
    }
    return graph_.add_atom(atom);
  }

  int read_bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;  // '['
    auto at_end = [&] { return pos_ >= text_.size(); };
    auto peek = [&] { return at_end() ? '\0' : text_[pos_]; };

    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      const std::size_t iso = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      warn("isotope label ignored", iso);
    }
    Atom atom;
    atom.bracket = true;
    const std::size_t sym_pos = pos_;
    std::string sym;
    if (std::isalpha(static_cast<unsigned char>(peek()))) {
      sym.push_back(text_[pos_++]);
      if (std::islower(static_cast<unsigned char>(peek())) && std::isupper(static_cast<unsigned char>(sym[0]))) {
        std::string two = sym + text_[pos_];
        if (element_from_symbol(two)) {
          sym = two;
          ++pos_;
        }
      }
    }
    if (sym.empty()) throw SmilesError("missing element symbol", sym_pos);
    if (std::islower(static_cast<unsigned char>(sym[0]))) {
      atom.aromatic = true;
      sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
    }
    const auto element = element_from_symbol(sym);
    if (!element || (atom.aromatic && !can_be_aromatic(*element))) {
      throw SmilesError("unknown element '" + sym + "'", sym_pos);
    }
    atom.element = *element;

    if (peek() == '@') {
      warn("chirality ignored", pos_);
      while (peek() == '@') ++pos_;
      while (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H') ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() == 'H') {
      ++pos_;
      atom.explicit_h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) atom.explicit_h = text_[pos_++] - '0';
    }
    if (peek() == '+' || peek() == '-') {
      const char sign = text_[pos_++];
      int magnitude = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = text_[pos_++] - '0';
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
    }
    if (peek() == ':') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() != ']') {
      if (at_end()) throw SmilesError("unbalanced '['", open);
      throw SmilesError("unexpected character in bracket atom", pos_);
    }
    ++pos_;
    return graph_.add_atom(atom);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  bool last_was_open_ = false;
  MolecularGraph graph_;
  std::vector<std::size_t> atom_pos_;
  std::vector<std::size_t> bond_pos_;
  std::vector<bool> implicit_aromatic_;
  std::map<int, OpenRing> open_rings_;
  std::vector<std::string>* warnings_ = nullptr;
};

// Parses text into a connected graph with ring flags and implicit
// hydrogens. Throws SmilesError / ValenceError with a 0-based offset.
inline MolecularGraph parse_smiles(std::string_view text, std::vector<std::string>* warnings = nullptr) {
  return SmilesParser(text).parse(warnings);
}

// Canonical ranks by iterative neighbourhood refinement. Initial classes come
// from (element, charge, degree, hydrogens, aromatic); remaining ties are
// broken by giving the lowest-index atom of the first tied class its own
// rank and refining again.
inline std::vector<int> canonical_ranks(const MolecularGraph& g) {
  const int n = g.num_atoms();
  std::vector<int> rank(static_cast<std::size_t>(n), 0);
  if (n == 0) return rank;

  auto rank_by = [&](const auto& keys) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
    std::vector<int> out(static_cast<std::size_t>(n));
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (i > 0 && keys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] != keys[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])]) r = i;
      out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = r;
    }
    return out;
  };
  auto count_classes = [&](const std::vector<int>& r) {
    std::vector<int> s = r;
    std::sort(s.begin(), s.end());
    return static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
  };

  using Key0 = std::tuple<int, int, int, int, int>;
  std::vector<Key0> init(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atom(i);
    init[static_cast<std::size_t>(i)] = {element_index(a.element), a.formal_charge, g.degree(i), a.total_h(), a.aromatic ? 1 : 0};
  }
  rank = rank_by(init);

  auto refine = [&](std::vector<int> r) {
    int classes = count_classes(r);
    while (true) {
      using Key = std::pair<int, std::vector<std::pair<int, int>>>;
      std::vector<Key> keys(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        std::vector<std::pair<int, int>> env;
        for (const Neighbor& nb : g.neighbors(i)) {
          env.emplace_back(r[static_cast<std::size_t>(nb.atom)], bond_order_index(g.bond(nb.bond).order));
        }
        std::sort(env.begin(), env.end());
        keys[static_cast<std::size_t>(i)] = {r[static_cast<std::size_t>(i)], std::move(env)};
      }
      std::vector<int> next = rank_by(keys);
      const int next_classes = count_classes(next);
      r = std::move(next);
      if (next_classes == classes) break;
      classes = next_classes;
    }
    return r;
  };

  rank = refine(rank);
  while (count_classes(rank) < n) {
    // First tied class = smallest rank value shared by at least two atoms.
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (int r : rank) ++counts[static_cast<std::size_t>(r)];
    int tied = -1;
    for (int r = 0; r < n; ++r) {
      if (counts[static_cast<std::size_t>(r)] > 1) {
        tied = r;
        break;
      }
    }
    std::vector<int> doubled(static_cast<std::size_t>(n));
    bool split = false;
    for (int i = 0; i < n; ++i) {
      doubled[static_cast<std::size_t>(i)] = 2 * rank[static_cast<std::size_t>(i)] + 1;
      if (!split && rank[static_cast<std::size_t>(i)] == tied) {
        doubled[static_cast<std::size_t>(i)] = 2 * rank[static_cast<std::size_t>(i)];
        split = true;
      }
    }
    rank = refine(rank_by(doubled));
  }
  return rank;
}

namespace detail {

inline std::string atom_token(const MolecularGraph& g, int i) {
  const Atom& a = g.atom(i);
  std::string sym(symbol(a.element));
  if (a.aromatic) sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
  bool organic = a.formal_charge == 0;
  if (organic) {
    const auto h = organic_implicit_h(g, i);
    organic = h && *h == a.total_h();
  }
  if (organic) return sym;
  std::string out = "[" + sym;
  const int h = a.total_h();
  if (h > 0) out += "H" + (h > 1 ? std::to_string(h) : std::string());
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? "+" : "-";
    if (std::abs(a.formal_charge) > 1) out += std::to_string(std::abs(a.formal_charge));
  }
  return out + "]";
}

inline std::string bond_token(const MolecularGraph& g, int b) {
  const Bond& bond = g.bond(b);
  const bool both_aromatic = g.atom(bond.begin).aromatic && g.atom(bond.end).aromatic;
  switch (bond.order) {
    case BondOrder::Single: return both_aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return both_aromatic ? "" : ":";
  }
  return "";
}

inline std::string ring_label(int n) {
  return n < 10 ? std::to_string(n) : "%" + std::to_string(n);
}

class SmilesWriter {
 public:
  explicit SmilesWriter(const MolecularGraph& g) : g_(g), rank_(canonical_ranks(g)) {}

  std::string write() {
    const int n = g_.num_atoms();
    if (n == 0) return "";
    visited_.assign(static_cast<std::size_t>(n), false);
    opens_.assign(static_cast<std::size_t>(n), {});
    closes_.assign(static_cast<std::size_t>(n), {});
    children_.assign(static_cast<std::size_t>(n), {});
    bond_seen_.assign(static_cast<std::size_t>(g_.num_bonds()), false);

    const int start = static_cast<int>(std::min_element(rank_.begin(), rank_.end()) - rank_.begin());
    discover(start);

    ring_digit_.assign(static_cast<std::size_t>(g_.num_bonds()), -1);
    std::string out;
    emit(start, out);
    return out;
  }

 private:
  std::vector<Neighbor> sorted_neighbors(int v) const {
    std::vector<Neighbor> nbs(g_.neighbors(v).begin(), g_.neighbors(v).end());
    std::sort(nbs.begin(), nbs.end(), [&](const Neighbor& a, const Neighbor& b) {
      return rank_[static_cast<std::size_t>(a.atom)] < rank_[static_cast<std::size_t>(b.atom)];
    });
    return nbs;
  }

  // DFS fixing tree children and ring-closure bonds (opened at the earlier atom).
  void discover(int v) {
    visited_[static_cast<std::size_t>(v)] = true;
    for (const Neighbor& nb : sorted_neighbors(v)) {
      if (bond_seen_[static_cast<std::size_t>(nb.bond)]) continue;
      bond_seen_[static_cast<std::size_t>(nb.bond)] = true;
      if (visited_[static_cast<std::size_t>(nb.atom)]) {
        opens_[static_cast<std::size_t>(nb.atom)].push_back(nb.bond);
        closes_[static_cast<std::size_t>(v)].push_back(nb.bond);
      } else {
        children_[static_cast<std::size_t>(v)].push_back(nb);
        discover(nb.atom);
      }
    }
  }

  int take_digit() {
    for (int d = 1; d < 100; ++d) {
      if (std::find(in_use_.begin(), in_use_.end(), d) == in_use_.end()) {
        in_use_.push_back(d);
        return d;
      }
    }
    throw std::runtime_error("too many open rings");
  }

  void emit(int v, std::string& out) {
    out += atom_token(g_, v);
    std::vector<int> freed;
    for (int b : closes_[static_cast<std::size_t>(v)]) {
      const int d = ring_digit_[static_cast<std::size_t>(b)];
      out += ring_label(d);
      freed.push_back(d);
    }
    for (int b : opens_[static_cast<std::size_t>(v)]) {
      const int d = take_digit();
      ring_digit_[static_cast<std::size_t>(b)] = d;
      out += bond_token(g_, b) + ring_label(d);
    }
    for (int d : freed) in_use_.erase(std::find(in_use_.begin(), in_use_.end(), d));
    const auto& kids = children_[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last) out += "(";
      out += bond_token(g_, kids[i].bond);
      emit(kids[i].atom, out);
      if (!last) out += ")";
    }
  }

  const MolecularGraph& g_;
  std::vector<int> rank_;
  std::vector<bool> visited_;
  std::vector<bool> bond_seen_;
  std::vector<std::vector<int>> opens_;
  std::vector<std::vector<int>> closes_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<int> ring_digit_;
  std::vector<int> in_use_;
};

}  // namespace detail

// Deterministic SMILES; re-parsing yields a graph isomorphic to g.
inline std::string write_smiles(const MolecularGraph& g) { return detail::SmilesWriter(g).write(); }

}  // namespace promptmol::molgraph
