// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace promptmol {

// Bad user input: malformed files, missing columns, invalid configuration.
// The CLI maps this family to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses, singular statistics and similar failures of the
// numerical pipeline. The CLI maps this family to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SMILES rejection carrying the 0-based character offset of the problem.
class SmilesError : public InputError {
 public:
  SmilesError(const std::string& reason, std::size_t position)
      : InputError(reason + " at offset " + std::to_string(position)),
        reason_(reason),
        position_(position) {}

  const std::string& reason() const noexcept { return reason_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string reason_;
  std::size_t position_;
};

// An atom whose bond orders and hydrogens exceed its valence table.
class ValenceError : public SmilesError {
 public:
  using SmilesError::SmilesError;
};

}  // namespace promptmol
