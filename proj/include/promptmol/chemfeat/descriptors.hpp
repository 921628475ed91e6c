// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "promptmol/chemfeat/scaffold.hpp"
#include "promptmol/molgraph.hpp"

namespace promptmol::chemfeat {

using molgraph::Element;

inline constexpr std::size_t kNumFunctionalGroups = 16;

// Detector table, in priority order. An O/N/S atom claimed by an earlier
// detector is invisible to later ones. Definitions are documented in
// data/chem_tables.json.
inline constexpr std::array<std::string_view, kNumFunctionalGroups> kFunctionalGroupNames = {
    "hydroxyl",      "primary_amine", "secondary_tertiary_amine", "carboxylic_acid",
    "ester",         "amide",         "carbonyl",                 "ether",
    "thioether",     "nitrile",       "nitro",                    "halogen",
    "aromatic_ring", "aliphatic_ring", "sulfonyl",                "terminal_alkyne"};

struct FunctionalGroupVector {
  std::array<int, kNumFunctionalGroups> counts{};
  std::array<double, kNumFunctionalGroups> normalized{};
};

namespace detail {

class GroupMatcher {
 public:
  explicit GroupMatcher(const MolecularGraph& g) : g_(g), claimed_(static_cast<std::size_t>(g.num_atoms()), false) {}

  FunctionalGroupVector run() {
    FunctionalGroupVector out;
    auto& c = out.counts;
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_hydroxyl(v)) c[0] += claim({v});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_primary_amine(v)) c[1] += claim({v});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_secondary_tertiary_amine(v)) c[2] += claim({v});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto m = acyl_pattern(v, Acyl::Acid)) c[3] += claim(*m);
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto m = acyl_pattern(v, Acyl::Ester)) c[4] += claim(*m);
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto m = acyl_pattern(v, Acyl::Amide)) c[5] += claim(*m);
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto o = carbonyl_oxygen(v)) c[6] += claim({*o});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_chalcogen_bridge(v, Element::O)) c[7] += claim({v});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_chalcogen_bridge(v, Element::S)) c[8] += claim({v});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto n = nitrile_nitrogen(v)) c[9] += claim({*n});
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto m = nitro_pattern(v)) c[10] += claim(*m);
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      const Element e = g_.atom(v).element;
      if (e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I) ++c[11];
    }
    for (const auto& ring : molgraph::smallest_rings(g_)) {
      const bool aromatic = std::all_of(ring.begin(), ring.end(), [&](int a) { return g_.atom(a).aromatic; });
      ++c[aromatic ? 12 : 13];
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (const auto m = sulfonyl_pattern(v)) c[14] += claim(*m);
    }
    for (int v = 0; v < g_.num_atoms(); ++v) {
      if (is_terminal_alkyne_carbon(v)) ++c[15];
    }
    const double heavy = std::max(1, g_.num_atoms());
    for (std::size_t i = 0; i < kNumFunctionalGroups; ++i) out.normalized[i] = c[i] / heavy;
    return out;
  }

 private:
  enum class Acyl { Acid, Ester, Amide };

  bool free(int v) const { return !claimed_[static_cast<std::size_t>(v)]; }
  bool is(int v, Element e) const { return g_.atom(v).element == e; }
  molgraph::BondOrder order(const molgraph::Neighbor& nb) const { return g_.bond(nb.bond).order; }

  int claim(const std::vector<int>& atoms) {
    for (int a : atoms) claimed_[static_cast<std::size_t>(a)] = true;
    return 1;
  }

  // Carbon double-bonded to O or S.
  bool is_acyl_carbon(int c) const {
    if (!is(c, Element::C)) return false;
    for (const auto& nb : g_.neighbors(c)) {
      if (order(nb) == molgraph::BondOrder::Double && (is(nb.atom, Element::O) || is(nb.atom, Element::S))) return true;
    }
    return false;
  }

  bool plain_heteroatom(int v, Element e) const {
    const auto& a = g_.atom(v);
    return a.element == e && !a.aromatic && a.formal_charge == 0 && free(v);
  }

  bool single_bonds_to_carbon_only(int v, bool allow_acyl) const {
    for (const auto& nb : g_.neighbors(v)) {
      if (order(nb) != molgraph::BondOrder::Single || !is(nb.atom, Element::C)) return false;
      if (!allow_acyl && is_acyl_carbon(nb.atom)) return false;
    }
    return true;
  }

  bool is_hydroxyl(int v) const {
    return plain_heteroatom(v, Element::O) && g_.atom(v).total_h() >= 1 && g_.degree(v) == 1 &&
           single_bonds_to_carbon_only(v, false);
  }

  bool is_primary_amine(int v) const {
    return plain_heteroatom(v, Element::N) && g_.atom(v).total_h() == 2 && g_.degree(v) == 1 &&
           single_bonds_to_carbon_only(v, false);
  }

  bool is_secondary_tertiary_amine(int v) const {
    const int d = g_.degree(v);
    return plain_heteroatom(v, Element::N) && (d == 2 || d == 3) && g_.atom(v).total_h() + d == 3 &&
           single_bonds_to_carbon_only(v, false);
  }

  // C(=O) with a second single-bonded heteroatom: -OH (acid), -O-C (ester)
  // or any -N (amide). Returns the claimed heteroatoms.
  std::optional<std::vector<int>> acyl_pattern(int c, Acyl kind) const {
    if (!is(c, Element::C) || g_.atom(c).aromatic) return std::nullopt;
    int carbonyl_o = -1;
    for (const auto& nb : g_.neighbors(c)) {
      if (order(nb) == molgraph::BondOrder::Double && is(nb.atom, Element::O) && free(nb.atom) && g_.degree(nb.atom) == 1) {
        carbonyl_o = nb.atom;
      }
    }
    if (carbonyl_o < 0) return std::nullopt;
    for (const auto& nb : g_.neighbors(c)) {
      if (order(nb) != molgraph::BondOrder::Single || !free(nb.atom) || g_.atom(nb.atom).aromatic) continue;
      const int x = nb.atom;
      switch (kind) {
        case Acyl::Acid:
          if (is(x, Element::O) && g_.degree(x) == 1 && g_.atom(x).total_h() == 1) return std::vector<int>{carbonyl_o, x};
          break;
        case Acyl::Ester:
          if (is(x, Element::O) && g_.degree(x) == 2) {
            for (const auto& nb2 : g_.neighbors(x)) {
              if (nb2.atom != c && is(nb2.atom, Element::C)) return std::vector<int>{carbonyl_o, x};
            }
          }
          break;
        case Acyl::Amide:
          if (is(x, Element::N)) return std::vector<int>{carbonyl_o, x};
          break;
      }
    }
    return std::nullopt;
  }

  std::optional<int> carbonyl_oxygen(int c) const {
    if (!is(c, Element::C) || g_.atom(c).aromatic) return std::nullopt;
    for (const auto& nb : g_.neighbors(c)) {
      if (order(nb) == molgraph::BondOrder::Double && is(nb.atom, Element::O) && free(nb.atom) && g_.degree(nb.atom) == 1) {
        return nb.atom;
      }
    }
    return std::nullopt;
  }

  bool is_chalcogen_bridge(int v, Element e) const {
    return plain_heteroatom(v, e) && g_.degree(v) == 2 && single_bonds_to_carbon_only(v, true);
  }

  std::optional<int> nitrile_nitrogen(int c) const {
    if (!is(c, Element::C)) return std::nullopt;
    for (const auto& nb : g_.neighbors(c)) {
      if (order(nb) == molgraph::BondOrder::Triple && is(nb.atom, Element::N) && g_.degree(nb.atom) == 1 && free(nb.atom)) {
        return nb.atom;
      }
    }
    return std::nullopt;
  }

  std::optional<std::vector<int>> nitro_pattern(int n) const {
    if (!is(n, Element::N) || !free(n) || g_.atom(n).aromatic) return std::nullopt;
    std::vector<int> oxygens;
    bool has_double = false;
    for (const auto& nb : g_.neighbors(n)) {
      if (is(nb.atom, Element::O) && g_.degree(nb.atom) == 1 && free(nb.atom)) {
        oxygens.push_back(nb.atom);
        has_double = has_double || order(nb) == molgraph::BondOrder::Double;
      }
    }
    if (oxygens.size() != 2 || !has_double) return std::nullopt;
    oxygens.push_back(n);
    return oxygens;
  }

  std::optional<std::vector<int>> sulfonyl_pattern(int s) const {
    if (!is(s, Element::S) || g_.atom(s).aromatic) return std::nullopt;
    std::vector<int> oxygens;
    for (const auto& nb : g_.neighbors(s)) {
      if (order(nb) == molgraph::BondOrder::Double && is(nb.atom, Element::O) && free(nb.atom)) oxygens.push_back(nb.atom);
    }
    if (oxygens.size() != 2) return std::nullopt;
    return oxygens;
  }

  bool is_terminal_alkyne_carbon(int c) const {
    if (!is(c, Element::C) || g_.degree(c) != 1) return false;
    const auto& nb = g_.neighbors(c).front();
    return order(nb) == molgraph::BondOrder::Triple && is(nb.atom, Element::C);
  }

  const MolecularGraph& g_;
  std::vector<bool> claimed_;
};

}  // namespace detail

// Counts over the fixed 16-entry detector table; normalized[i] is
// counts[i] / max(1, heavy atoms).
inline FunctionalGroupVector functional_group_descriptors(const MolecularGraph& g) {
  return detail::GroupMatcher(g).run();
}

struct ScalarDescriptors {
  double molecular_weight = 0.0;
  double scaffold_weight = 0.0;
  int heavy_atom_count = 0;
};

// Average molecular mass including implicit and explicit hydrogens.
inline double molecular_weight(const MolecularGraph& g) {
  double w = 0.0;
  for (const auto& a : g.atoms()) w += molgraph::atomic_mass(a.element) + a.total_h() * molgraph::kHydrogenMass;
  return w;
}

inline ScalarDescriptors scalar_descriptors(const MolecularGraph& g) {
  return ScalarDescriptors{molecular_weight(g), molecular_weight(bemis_murcko_scaffold(g)), g.num_atoms()};
}

}  // namespace promptmol::chemfeat
