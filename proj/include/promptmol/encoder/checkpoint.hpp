// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/encoder/model.hpp"
#include "promptmol/error.hpp"

namespace promptmol::encoder {

// Binary layout: "MSPC", u32 version, then until EOF records of
// (u32 name_len, name, u32 rows, u32 cols, rows*cols little-endian f64).
inline constexpr char kCheckpointMagic[4] = {'M', 'S', 'P', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using TensorRecord = std::pair<std::string, Matrix>;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline bool get_bytes(std::istream& in, unsigned char* buf, std::size_t n) {
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!get_bytes(in, b, 4)) throw InputError("truncated checkpoint " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!get_bytes(in, b, 8)) throw InputError("truncated checkpoint " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

inline Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const std::vector<TensorRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  for (const auto& [name, m] : records) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f64(out, m.data()[i]);
  }
  if (!out) throw InputError("failed writing checkpoint " + path);
}

inline std::vector<TensorRecord> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw InputError("not a checkpoint (bad magic): " + path);
  }
  const std::uint32_t version = detail::get_u32(in, path);
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  std::vector<TensorRecord> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t len = detail::get_u32(in, path);
    if (len > (1u << 16)) throw InputError("corrupt tensor name length in " + path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (static_cast<std::uint32_t>(in.gcount()) != len) throw InputError("truncated checkpoint " + path);
    const std::uint32_t rows = detail::get_u32(in, path);
    const std::uint32_t cols = detail::get_u32(in, path);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw InputError("corrupt tensor shape in " + path);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f64(in, path);
    records.emplace_back(std::move(name), std::move(m));
  }
  return records;
}

// Hyperparameters travel as 1x1 "meta.*" tensors ahead of the parameters.
inline std::vector<TensorRecord> model_records(const Model& m) {
  std::vector<TensorRecord> out;
  out.emplace_back("meta.hidden_dim", detail::scalar_matrix(m.config.hidden_dim));
  out.emplace_back("meta.num_layers", detail::scalar_matrix(m.config.num_layers));
  out.emplace_back("meta.num_heads", detail::scalar_matrix(m.config.num_heads));
  out.emplace_back("meta.value_mode", detail::scalar_matrix(static_cast<int>(m.config.value_mode)));
  out.emplace_back("meta.layer_norm", detail::scalar_matrix(m.config.layer_norm ? 1 : 0));
  for (const Parameter* p : m.store.all()) out.emplace_back(p->name, p->value);
  return out;
}

inline void save_model(const std::string& path, const Model& m) { write_checkpoint(path, model_records(m)); }

// Rebuilds a model (including any head.* and ft.* tensors) from a file.
inline void load_model(const std::string& path, Model& m) {
  const auto records = read_checkpoint(path);
  EncoderConfig cfg;
  auto meta = [&](const std::string& key) -> int {
    for (const auto& [name, v] : records) {
      if (name == key && v.size() == 1) return static_cast<int>(v(0, 0));
    }
    throw InputError("checkpoint " + path + " lacks " + key);
  };
  cfg.hidden_dim = meta("meta.hidden_dim");
  cfg.num_layers = meta("meta.num_layers");
  cfg.num_heads = meta("meta.num_heads");
  cfg.value_mode = static_cast<ValueMode>(meta("meta.value_mode"));
  cfg.layer_norm = meta("meta.layer_norm") != 0;
  for (const auto& [name, v] : records) {
    if (name.rfind("meta.", 0) == 0) continue;
    Parameter& p = m.store.add(name, v.rows(), v.cols());
    p.value = v;
  }
  try {
    bind_model(m, cfg);
  } catch (const std::out_of_range& e) {
    throw InputError("checkpoint " + path + " is incomplete: " + e.what());
  }
}

}  // namespace promptmol::encoder
