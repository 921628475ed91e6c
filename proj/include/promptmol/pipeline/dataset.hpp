// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "promptmol/chemfeat.hpp"
#include "promptmol/encoder/tensor.hpp"
#include "promptmol/molgraph.hpp"
#include "promptmol/pipeline/csv.hpp"

namespace promptmol::pipeline {

struct Dataset {
  std::string name;
  std::vector<std::string> smiles;
  std::vector<molgraph::MolecularGraph> molecules;
  std::optional<std::vector<double>> labels;
  std::vector<int> groups;  // optional per-molecule group id (e.g. generator scaffold id)

  std::size_t size() const { return molecules.size(); }
  bool labeled() const { return labels.has_value(); }
};

struct Reject {
  std::size_t row = 0;  // 1-based line number in the source file
  std::string smiles;
  std::string reason;
};

struct LoadResult {
  Dataset dataset;
  std::vector<Reject> rejects;
};

// Reads a CSV with a header row. Rows whose SMILES fail to parse, or whose
// label is not a number, are listed in `rejects` and skipped.
inline LoadResult load_dataset(const std::string& path, const std::string& smiles_column = "smiles",
                               const std::optional<std::string>& label_column = std::string("label")) {
  const CsvTable table = read_csv(path);
  const auto sc = table.column(smiles_column);
  if (!sc) throw InputError(path + ": no column '" + smiles_column + "'");
  std::optional<std::size_t> lc;
  if (label_column) lc = table.column(*label_column);
  const auto gc = table.column("scaffold_id");
  LoadResult res;
  res.dataset.name = std::filesystem::path(path).stem().string();
  if (lc) res.dataset.labels.emplace();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const CsvRow& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    const std::string smi = *sc < row.size() ? row[*sc] : std::string();
    std::optional<double> label;
    if (lc) {
      label = *lc < row.size() ? parse_double(row[*lc]) : std::nullopt;
      if (!label) {
        res.rejects.push_back({line, smi, "label is not a number"});
        continue;
      }
    }
    try {
      molgraph::MolecularGraph g = molgraph::parse_smiles(smi);
      res.dataset.smiles.push_back(smi);
      res.dataset.molecules.push_back(std::move(g));
      if (lc) res.dataset.labels->push_back(*label);
      if (gc && *gc < row.size()) {
        const auto gid = parse_double(row[*gc]);
        res.dataset.groups.push_back(gid ? static_cast<int>(*gid) : -1);
      }
    } catch (const SmilesError& e) {
      res.rejects.push_back({line, smi, e.what()});
    }
  }
  if (res.dataset.groups.size() != res.dataset.size()) res.dataset.groups.clear();
  if (res.dataset.molecules.empty()) throw InputError(path + ": no valid molecules");
  return res;
}

// One SMILES per line; blank lines and '#' comments skipped. Anything after
// the first whitespace is ignored.
inline LoadResult load_smiles_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  LoadResult res;
  res.dataset.name = std::filesystem::path(path).stem().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_first_of(" \t", start);
    const std::string smi = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    try {
      res.dataset.molecules.push_back(molgraph::parse_smiles(smi));
      res.dataset.smiles.push_back(smi);
    } catch (const SmilesError& e) {
      res.rejects.push_back({lineno, smi, e.what()});
    }
  }
  if (res.dataset.molecules.empty()) throw InputError(path + ": no valid molecules");
  return res;
}

// Dispatches on extension: .csv is tabular, anything else a SMILES list.
inline LoadResult load_any(const std::string& path, const std::string& smiles_column = "smiles",
                           const std::optional<std::string>& label_column = std::string("label")) {
  if (std::filesystem::path(path).extension() == ".csv") return load_dataset(path, smiles_column, label_column);
  return load_smiles_list(path);
}

inline Dataset subset(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  out.name = ds.name;
  if (ds.labels) out.labels.emplace();
  for (int i : idx) {
    const auto u = static_cast<std::size_t>(i);
    out.smiles.push_back(ds.smiles.at(u));
    out.molecules.push_back(ds.molecules.at(u));
    if (ds.labels) out.labels->push_back(ds.labels->at(u));
    if (!ds.groups.empty()) out.groups.push_back(ds.groups.at(u));
  }
  return out;
}

// Cached per-molecule features shared by splits, probes and pre-training.
struct Featurized {
  std::vector<chemfeat::Fingerprint> fingerprints;
  std::vector<chemfeat::Fingerprint> scaffold_fingerprints;
  std::vector<std::string> scaffold_keys;  // canonical SMILES of the scaffold, "" if none
  std::vector<chemfeat::FunctionalGroupVector> functional_groups;
};

inline std::string scaffold_key(const molgraph::MolecularGraph& g) {
  const molgraph::MolecularGraph s = chemfeat::bemis_murcko_scaffold(g);
  return s.empty() ? std::string() : molgraph::write_smiles(s);
}

inline Featurized featurize(const std::vector<molgraph::MolecularGraph>& mols, int radius = 2, int nbits = 512) {
  Featurized f;
  for (const auto& g : mols) {
    f.fingerprints.push_back(chemfeat::morgan_fingerprint(g, radius, nbits));
    const molgraph::MolecularGraph s = chemfeat::bemis_murcko_scaffold(g);
    f.scaffold_fingerprints.push_back(chemfeat::morgan_fingerprint(s, radius, nbits));
    f.scaffold_keys.push_back(s.empty() ? std::string() : molgraph::write_smiles(s));
    f.functional_groups.push_back(chemfeat::functional_group_descriptors(g));
  }
  return f;
}

inline encoder::Matrix fingerprint_matrix(const std::vector<chemfeat::Fingerprint>& fps) {
  encoder::Matrix m(static_cast<Eigen::Index>(fps.size()), fps.empty() ? 0 : fps[0].nbits());
  for (std::size_t i = 0; i < fps.size(); ++i) {
    for (int b = 0; b < fps[i].nbits(); ++b) m(static_cast<Eigen::Index>(i), b) = fps[i].test(b) ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace promptmol::pipeline
