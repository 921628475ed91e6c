// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/molgraph.hpp"

namespace promptmol::chemfeat {

using molgraph::MolecularGraph;

// Fixed-length bit vector.
class Fingerprint {
 public:
  Fingerprint() = default;
  explicit Fingerprint(int nbits, int radius = 0)
      : nbits_(nbits), radius_(radius), words_(static_cast<std::size_t>((nbits + 63) / 64), 0) {
    if (nbits <= 0) throw std::invalid_argument("fingerprint length must be positive");
  }

  int nbits() const noexcept { return nbits_; }
  int radius() const noexcept { return radius_; }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  void set(int bit) { words_.at(static_cast<std::size_t>(bit / 64)) |= std::uint64_t{1} << (bit % 64); }
  bool test(int bit) const { return (words_.at(static_cast<std::size_t>(bit / 64)) >> (bit % 64)) & 1U; }

  int popcount() const noexcept {
    int c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }

  std::vector<int> on_bits() const {
    std::vector<int> bits;
    for (int i = 0; i < nbits_; ++i) {
      if (test(i)) bits.push_back(i);
    }
    return bits;
  }

  std::vector<double> to_dense() const {
    std::vector<double> v(static_cast<std::size_t>(nbits_), 0.0);
    for (int i = 0; i < nbits_; ++i) v[static_cast<std::size_t>(i)] = test(i) ? 1.0 : 0.0;
    return v;
  }

  // Lowercase hex, most significant nibble first within each 64-bit word,
  // words in ascending order.
  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (auto w : words_) {
      for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kDigits[(w >> shift) & 0xF]);
    }
    return out;
  }

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  int nbits_ = 0;
  int radius_ = 0;
  std::vector<std::uint64_t> words_;
};

// |a AND b| / |a OR b|; two all-zero vectors have similarity 1.
inline double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits() != b.nbits()) {
    throw std::invalid_argument("tanimoto: fingerprint length mismatch (" + std::to_string(a.nbits()) +
                                " vs " + std::to_string(b.nbits()) + ")");
  }
  int inter = 0;
  int uni = 0;
  for (std::size_t w = 0; w < a.words().size(); ++w) {
    inter += std::popcount(a.words()[w] & b.words()[w]);
    uni += std::popcount(a.words()[w] | b.words()[w]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace detail

// Per-round atom invariants: result[r][v] is the hash of atom v's radius-r
// circular environment.
inline std::vector<std::vector<std::uint64_t>> morgan_invariants(const MolecularGraph& g, int radius) {
  if (radius < 0) throw std::invalid_argument("radius must be non-negative");
  const int n = g.num_atoms();
  std::vector<std::vector<std::uint64_t>> rounds;
  std::vector<std::uint64_t> inv(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const auto& a = g.atom(v);
    std::uint64_t h = 0x6d6f7267616e3031ULL;
    h = detail::hash_combine(h, static_cast<std::uint64_t>(molgraph::atomic_number(a.element)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(g.degree(v)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(a.total_h()));
    h = detail::hash_combine(h, a.in_ring ? 1U : 0U);
    h = detail::hash_combine(h, a.aromatic ? 1U : 0U);
    inv[static_cast<std::size_t>(v)] = h;
  }
  rounds.push_back(inv);
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
      for (const auto& nb : g.neighbors(v)) {
        env.emplace_back(static_cast<std::uint64_t>(molgraph::bond_order_index(g.bond(nb.bond).order)) + 1,
                         inv[static_cast<std::size_t>(nb.atom)]);
      }
      std::sort(env.begin(), env.end());
      std::uint64_t h = detail::hash_combine(static_cast<std::uint64_t>(r), inv[static_cast<std::size_t>(v)]);
      for (const auto& [order, nh] : env) {
        h = detail::hash_combine(h, order);
        h = detail::hash_combine(h, nh);
      }
      next[static_cast<std::size_t>(v)] = h;
    }
    inv = next;
    rounds.push_back(std::move(next));
  }
  return rounds;
}

// Circular (ECFP-style) fingerprint: every invariant of every round sets
// bit (invariant mod nbits). Duplicate environments are not removed.
inline Fingerprint morgan_fingerprint(const MolecularGraph& g, int radius = 2, int nbits = 512) {
  if (nbits < 64 || !std::has_single_bit(static_cast<unsigned>(nbits))) {
    throw std::invalid_argument("nbits must be a power of two >= 64");
  }
  Fingerprint fp(nbits, radius);
  for (const auto& round : morgan_invariants(g, radius)) {
    for (std::uint64_t h : round) fp.set(static_cast<int>(h % static_cast<std::uint64_t>(nbits)));
  }
  return fp;
}

}  // namespace promptmol::chemfeat
