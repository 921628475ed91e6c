// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace promptmol::molgraph {

enum class Element : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I };

inline constexpr std::size_t kNumElements = 10;

inline constexpr std::array<Element, kNumElements> kAllElements = {
    Element::B, Element::C, Element::N,  Element::O,  Element::P,
    Element::S, Element::F, Element::Cl, Element::Br, Element::I};

inline constexpr int element_index(Element e) { return static_cast<int>(e); }

inline constexpr std::string_view symbol(Element e) {
  constexpr std::array<std::string_view, kNumElements> kSymbols = {
      "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
  return kSymbols[static_cast<std::size_t>(e)];
}

inline constexpr int atomic_number(Element e) {
  constexpr std::array<int, kNumElements> kZ = {5, 6, 7, 8, 15, 16, 9, 17, 35, 53};
  return kZ[static_cast<std::size_t>(e)];
}

// Standard atomic weights (IUPAC conventional values), daltons.
inline constexpr double kHydrogenMass = 1.008;

inline constexpr double atomic_mass(Element e) {
  constexpr std::array<double, kNumElements> kMass = {
      10.81, 12.011, 14.007, 15.999, 30.974, 32.06, 18.998, 35.45, 79.904, 126.904};
  return kMass[static_cast<std::size_t>(e)];
}

inline std::optional<Element> element_from_symbol(std::string_view s) {
  for (Element e : kAllElements) {
    if (symbol(e) == s) return e;
  }
  return std::nullopt;
}

// Elements that may be written lowercase (aromatic) in SMILES.
inline constexpr bool can_be_aromatic(Element e) {
  switch (e) {
    case Element::B:
    case Element::C:
    case Element::N:
    case Element::O:
    case Element::P:
    case Element::S:
      return true;
    default:
      return false;
  }
}

inline constexpr int valence_electrons(Element e) {
  switch (e) {
    case Element::B: return 3;
    case Element::C: return 4;
    case Element::N:
    case Element::P: return 5;
    case Element::O:
    case Element::S: return 6;
    default: return 7;
  }
}

inline constexpr bool is_second_row(Element e) {
  switch (e) {
    case Element::B:
    case Element::C:
    case Element::N:
    case Element::O:
    case Element::F:
      return true;
    default:
      return false;
  }
}

// Allowed total valences (bond-order sum + hydrogens), ascending. A charge
// shifts the atom to its isoelectronic neighbour, e.g. N+ behaves like C and
// O- like F.
inline std::vector<int> allowed_valences(Element e, int formal_charge) {
  const int group = valence_electrons(e) - formal_charge;
  const bool row2 = is_second_row(e);
  switch (group) {
    case 2: return {2};
    case 3: return {3};
    case 4: return {4};
    case 5: return row2 ? std::vector<int>{3} : std::vector<int>{3, 5};
    case 6: return row2 ? std::vector<int>{2} : std::vector<int>{2, 4, 6};
    case 7: return {1};
    case 8: return {0};
    default: return {};
  }
}

inline int max_valence(Element e, int formal_charge) {
  const auto v = allowed_valences(e, formal_charge);
  return v.empty() ? -1 : v.back();
}

}  // namespace promptmol::molgraph
