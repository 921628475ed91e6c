// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/error.hpp"
#include "promptmol/losses/context_label.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/random.hpp"

namespace promptmol::perturb {

using molgraph::MolecularGraph;

inline constexpr int kMaxFragmentAtoms = 4;
inline constexpr int kDefaultPositives = 5;

class NoPerturbationSite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoValidFragment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Fragment {
  MolecularGraph graph;
  int attachment = 0;
  std::string smiles;
};

struct FragmentPool {
  std::vector<Fragment> fragments;
  std::string source;  // "builtin" or the file path
};

// Throws InputError unless the fragment has at most four heavy atoms, no
// rings, and an attachment atom with a free valence.
inline void validate_fragment(const Fragment& f) {
  if (f.graph.num_atoms() > kMaxFragmentAtoms) {
    throw InputError("fragment " + f.smiles + " has " + std::to_string(f.graph.num_atoms()) +
                     " heavy atoms (max " + std::to_string(kMaxFragmentAtoms) + ")");
  }
  if (f.attachment < 0 || f.attachment >= f.graph.num_atoms()) {
    throw InputError("fragment " + f.smiles + " attachment index " + std::to_string(f.attachment) + " out of range");
  }
  if (molgraph::free_valence(f.graph, f.attachment) < 1) {
    throw InputError("fragment " + f.smiles + " attachment atom has no free valence");
  }
  for (const auto& a : f.graph.atoms()) {
    if (a.in_ring) throw InputError("fragment " + f.smiles + " contains a ring");
  }
}

inline Fragment make_fragment(const std::string& smiles, int attachment) {
  Fragment f{molgraph::parse_smiles(smiles), attachment, smiles};
  validate_fragment(f);
  return f;
}

inline FragmentPool builtin_fragment_pool() {
  static const std::vector<std::pair<const char*, int>> kBuiltin = {
      {"C", 0},        {"CC", 0},      {"CCC", 0},      {"C(C)C", 0},   {"O", 0},      {"N", 0},
      {"F", 0},        {"Cl", 0},      {"Br", 0},       {"I", 0},       {"C#N", 0},    {"CO", 1},
      {"CN", 1},       {"CS", 1},      {"C(=O)O", 0},   {"C(=O)N", 0},  {"C(=O)C", 0}, {"C(F)(F)F", 0},
      {"C=O", 0},      {"N(C)C", 0},   {"OCC", 0},      {"C=C", 0},     {"C#C", 0},    {"CCO", 0},
      {"S", 0},        {"NC=O", 0},    {"OC(F)F", 0},   {"CC#N", 0}};
  FragmentPool pool;
  pool.source = "builtin";
  for (const auto& [smi, att] : kBuiltin) pool.fragments.push_back(make_fragment(smi, att));
  return pool;
}

// Reads "SMILES<TAB>attachment_index" lines; '#' starts a comment line.
inline FragmentPool load_fragment_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fragment pool " + path);
  FragmentPool pool;
  pool.source = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError(path + ":" + std::to_string(line_no) + ": expected SMILES<TAB>index");
    const std::string smiles = line.substr(0, tab);
    int attachment = 0;
    try {
      std::size_t used = 0;
      attachment = std::stoi(line.substr(tab + 1), &used);
      if (tab + 1 + used != line.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(line_no) + ": bad attachment index");
    }
    try {
      pool.fragments.push_back(make_fragment(smiles, attachment));
    } catch (const std::exception& e) {
      throw InputError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (pool.fragments.empty()) throw InputError("fragment pool " + path + " is empty");
  return pool;
}

inline FragmentPool build_fragment_pool(const std::optional<std::string>& path = std::nullopt) {
  return path ? load_fragment_pool(*path) : builtin_fragment_pool();
}

// Attribute-level mask: the topology of base is untouched; encoders swap the
// features of masked_atoms for the mask token.
struct MaskedGraph {
  MolecularGraph base;
  std::vector<int> masked_atoms;  // sorted
  losses::ContextLabel context_label;
};

inline MaskedGraph subgraph_mask_at(const MolecularGraph& g, int center, const chemfeat::FunctionalGroupVector& fg) {
  MaskedGraph m{g, {center}, {}};
  for (const auto& nb : g.neighbors(center)) m.masked_atoms.push_back(nb.atom);
  std::sort(m.masked_atoms.begin(), m.masked_atoms.end());
  m.context_label = losses::make_context_label(g, m.masked_atoms, fg);
  return m;
}

// Masks a uniformly chosen atom together with its one-hop neighbours.
inline MaskedGraph subgraph_mask(const MolecularGraph& g, Rng& rng, const chemfeat::FunctionalGroupVector& fg) {
  if (g.num_atoms() < 2) throw std::invalid_argument("subgraph_mask needs at least 2 atoms");
  const int center = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(g.num_atoms())));
  return subgraph_mask_at(g, center, fg);
}

inline MaskedGraph subgraph_mask(const MolecularGraph& g, Rng& rng) {
  return subgraph_mask(g, rng, chemfeat::functional_group_descriptors(g));
}

struct PerturbationOutcome {
  MolecularGraph graph;
  int atoms_removed = 0;
  int atoms_added = 0;
  std::string fragment;
};

namespace detail {

// A removable terminal piece: `removed` hangs off `anchor` through a single bond.
struct Site {
  int anchor;
  std::vector<int> removed;
};

inline bool same_graph(const MolecularGraph& a, const MolecularGraph& b) {
  if (a.num_atoms() <= molgraph::kMaxIsomorphismAtoms && b.num_atoms() <= molgraph::kMaxIsomorphismAtoms) {
    return molgraph::graphs_isomorphic(a, b);
  }
  return molgraph::write_smiles(a) == molgraph::write_smiles(b);
}

inline std::vector<Site> side_chain_sites(const MolecularGraph& g, const std::vector<bool>& scaffold) {
  std::vector<Site> sites;
  const auto n = static_cast<std::size_t>(g.num_atoms());
  for (int s = 0; s < g.num_atoms(); ++s) {
    if (!scaffold[static_cast<std::size_t>(s)]) continue;
    for (const auto& root_nb : g.neighbors(s)) {
      const int root = root_nb.atom;
      if (scaffold[static_cast<std::size_t>(root)]) continue;
      // Side chains are trees; root them at the scaffold attachment.
      std::vector<int> parent(n, -1);
      std::vector<int> order{root};
      parent[static_cast<std::size_t>(root)] = s;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const int v = order[i];
        for (const auto& nb : g.neighbors(v)) {
          if (nb.atom == parent[static_cast<std::size_t>(v)] || scaffold[static_cast<std::size_t>(nb.atom)]) continue;
          parent[static_cast<std::size_t>(nb.atom)] = v;
          order.push_back(nb.atom);
        }
      }
      std::vector<std::vector<int>> subtree(n);
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        subtree[static_cast<std::size_t>(*it)].push_back(*it);
        const int p = parent[static_cast<std::size_t>(*it)];
        if (*it != root) {
          auto& ps = subtree[static_cast<std::size_t>(p)];
          const auto& cs = subtree[static_cast<std::size_t>(*it)];
          ps.insert(ps.end(), cs.begin(), cs.end());
        }
      }
      auto single_to_parent = [&](int v) {
        const auto b = g.bond_between(v, parent[static_cast<std::size_t>(v)]);
        return b && g.bond(*b).order == molgraph::BondOrder::Single;
      };
      const auto size_of = [&](int v) { return static_cast<int>(subtree[static_cast<std::size_t>(v)].size()); };
      if (size_of(root) <= kMaxFragmentAtoms) {
        if (single_to_parent(root)) sites.push_back({s, subtree[static_cast<std::size_t>(root)]});
        continue;
      }
      // Oversized chain: maximal terminal sub-fragments of at most four atoms.
      for (int v : order) {
        if (v == root) continue;
        const int p = parent[static_cast<std::size_t>(v)];
        if (size_of(v) <= kMaxFragmentAtoms && size_of(p) > kMaxFragmentAtoms && single_to_parent(v)) {
          sites.push_back({p, subtree[static_cast<std::size_t>(v)]});
        }
      }
    }
  }
  for (auto& site : sites) std::sort(site.removed.begin(), site.removed.end());
  return sites;
}

}  // namespace detail

// Replaces one terminal side-chain fragment (at most four atoms) with a pool
// fragment at the same attachment atom. The Bemis-Murcko scaffold is
// preserved and fewer than five atoms are removed and added.
inline PerturbationOutcome perturb_side_chain(const MolecularGraph& g, const FragmentPool& pool, Rng& rng) {
  const std::vector<bool> scaffold = chemfeat::scaffold_atom_mask(g);
  const bool has_scaffold = std::find(scaffold.begin(), scaffold.end(), true) != scaffold.end();
  if (!has_scaffold) throw NoPerturbationSite("molecule has no scaffold");
  const std::vector<detail::Site> sites = detail::side_chain_sites(g, scaffold);
  if (sites.empty()) throw NoPerturbationSite("molecule has no replaceable side chain");

  const detail::Site& site = sites[uniform_index(rng, sites.size())];
  std::vector<bool> remove(static_cast<std::size_t>(g.num_atoms()), false);
  for (int a : site.removed) remove[static_cast<std::size_t>(a)] = true;
  std::vector<int> old_to_new;
  MolecularGraph trimmed = g.without_atoms(remove, &old_to_new);
  molgraph::update_derived(trimmed);
  const int anchor = old_to_new[static_cast<std::size_t>(site.anchor)];
  const MolecularGraph reference_scaffold = chemfeat::bemis_murcko_scaffold(g);

  std::vector<std::size_t> order(pool.fragments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  for (std::size_t idx : order) {
    const Fragment& frag = pool.fragments[idx];
    if (molgraph::free_valence(trimmed, anchor) < 1) break;
    MolecularGraph candidate = trimmed;
    const int offset = candidate.append(frag.graph);
    candidate.add_bond(anchor, offset + frag.attachment, molgraph::BondOrder::Single);
    molgraph::update_derived(candidate);
    if (molgraph::find_valence_violation(candidate)) continue;
    if (!detail::same_graph(chemfeat::bemis_murcko_scaffold(candidate), reference_scaffold)) continue;
    if (detail::same_graph(candidate, g)) continue;
    return PerturbationOutcome{std::move(candidate), static_cast<int>(site.removed.size()), frag.graph.num_atoms(),
                               frag.smiles};
  }
  throw NoValidFragment("no pool fragment fits the attachment site");
}

inline MolecularGraph scaffold_invariant_perturb(const MolecularGraph& g, const FragmentPool& pool, Rng& rng) {
  return perturb_side_chain(g, pool, rng).graph;
}

}  // namespace promptmol::perturb
