// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

// Writes the bundled toy regression corpus as CSV (smiles,label,scaffold_id).

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "promptmol/pipeline/csv.hpp"
#include "promptmol/pipeline/toy_corpus.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::cerr << "usage: make_toy_corpus <out.csv> [seed]\n";
    return 2;
  }
  try {
    const std::uint64_t seed = argc == 3 ? std::stoull(argv[2]) : promptmol::pipeline::toy::kDefaultSeed;
    promptmol::pipeline::CsvWriter w(argv[1], {"smiles", "label", "scaffold_id"});
    for (const auto& m : promptmol::pipeline::toy::generate(seed)) {
      w.row({m.smiles, promptmol::pipeline::format_number(m.label), std::to_string(m.scaffold_id)});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
