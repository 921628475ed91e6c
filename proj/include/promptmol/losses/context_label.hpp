// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/molgraph.hpp"

namespace promptmol::losses {

inline constexpr std::size_t kContextVocabulary = molgraph::kNumElements + molgraph::kNumBondOrders;

// Target of the context-prediction channel: which elements and bond orders
// occur inside the masked region, plus the molecule's normalized
// functional-group vector.
struct ContextLabel {
  std::array<double, molgraph::kNumElements> atom_presence{};
  std::array<double, molgraph::kNumBondOrders> bond_presence{};
  std::array<double, chemfeat::kNumFunctionalGroups> fg_target{};

  // atom_presence followed by bond_presence.
  std::array<double, kContextVocabulary> multi_hot() const {
    std::array<double, kContextVocabulary> out{};
    for (std::size_t i = 0; i < atom_presence.size(); ++i) out[i] = atom_presence[i];
    for (std::size_t i = 0; i < bond_presence.size(); ++i) out[atom_presence.size() + i] = bond_presence[i];
    return out;
  }
};

inline ContextLabel make_context_label(const molgraph::MolecularGraph& g, const std::vector<int>& masked_atoms,
                                       const chemfeat::FunctionalGroupVector& fg) {
  ContextLabel label;
  std::vector<bool> in_mask(static_cast<std::size_t>(g.num_atoms()), false);
  for (int a : masked_atoms) {
    in_mask[static_cast<std::size_t>(a)] = true;
    label.atom_presence[static_cast<std::size_t>(molgraph::element_index(g.atom(a).element))] = 1.0;
  }
  for (const auto& b : g.bonds()) {
    if (in_mask[static_cast<std::size_t>(b.begin)] && in_mask[static_cast<std::size_t>(b.end)]) {
      label.bond_presence[static_cast<std::size_t>(molgraph::bond_order_index(b.order))] = 1.0;
    }
  }
  label.fg_target = fg.normalized;
  return label;
}

}  // namespace promptmol::losses
