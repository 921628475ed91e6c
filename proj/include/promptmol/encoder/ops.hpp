// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptmol/encoder/tensor.hpp"

namespace promptmol::encoder {

// Differentiable operations on tape variables. Each op records its output
// and a closure that pushes the output gradient back to its inputs.

namespace detail {

inline void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("variables live on different tapes");
}

inline void require_shape(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + op);
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.cols() == b.rows(), "matmul");
  Tape* t = a.tape;
  const int ia = a.id, ib = b.id;
  Var out = t->record(a.value() * b.value(), t->requires_grad(a) || t->requires_grad(b), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, ib, io] {
    const Matrix& g = t->node(io).grad;
    if (t->node(ia).requires_grad) t->grad(ia).noalias() += g * t->node(ib).value.transpose();
    if (t->node(ib).requires_grad) t->grad(ib).noalias() += t->node(ia).value.transpose() * g;
  };
  return out;
}

// x·W + b with b broadcast over rows.
inline Var affine(Var x, Var w, Var b) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, b);
  detail::require_shape(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "affine");
  Tape* t = x.tape;
  Matrix v = x.value() * w.value();
  v.rowwise() += b.value().row(0);
  const int ix = x.id, iw = w.id, ib = b.id;
  Var out = t->record(std::move(v), t->requires_grad(x) || t->requires_grad(w) || t->requires_grad(b), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ix, iw, ib, io] {
    const Matrix& g = t->node(io).grad;
    if (t->node(ix).requires_grad) t->grad(ix).noalias() += g * t->node(iw).value.transpose();
    if (t->node(iw).requires_grad) t->grad(iw).noalias() += t->node(ix).value.transpose() * g;
    if (t->node(ib).requires_grad) t->grad(ib) += g.colwise().sum();
  };
  return out;
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape* t = a.tape;
  const int ia = a.id, ib = b.id;
  Var out = t->record(a.value() + b.value(), t->requires_grad(a) || t->requires_grad(b), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, ib, io] {
    const Matrix& g = t->node(io).grad;
    if (t->node(ia).requires_grad) t->grad(ia) += g;
    if (t->node(ib).requires_grad) t->grad(ib) += g;
  };
  return out;
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape* t = a.tape;
  const int ia = a.id, ib = b.id;
  Var out = t->record(a.value() - b.value(), t->requires_grad(a) || t->requires_grad(b), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, ib, io] {
    const Matrix& g = t->node(io).grad;
    if (t->node(ia).requires_grad) t->grad(ia) += g;
    if (t->node(ib).requires_grad) t->grad(ib) -= g;
  };
  return out;
}

inline Var add_constant(Var a, const Matrix& c) {
  detail::require_shape(a.rows() == c.rows() && a.cols() == c.cols(), "add_constant");
  Tape* t = a.tape;
  const int ia = a.id;
  Var out = t->record(a.value() + c, t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io] { t->grad(ia) += t->node(io).grad; };
  return out;
}

inline Var scale(Var a, double c) {
  Tape* t = a.tape;
  const int ia = a.id;
  Var out = t->record(a.value() * c, t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io, c] { t->grad(ia) += c * t->node(io).grad; };
  return out;
}

// s·A for a 1x1 variable s.
inline Var scale_by(Var a, Var s) {
  detail::require_same_tape(a, s);
  detail::require_shape(s.rows() == 1 && s.cols() == 1, "scale_by");
  Tape* t = a.tape;
  const int ia = a.id, is = s.id;
  Var out = t->record(a.value() * s.scalar(), t->requires_grad(a) || t->requires_grad(s), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, is, io] {
    const Matrix& g = t->node(io).grad;
    if (t->node(ia).requires_grad) t->grad(ia) += t->node(is).value(0, 0) * g;
    if (t->node(is).requires_grad) t->grad(is)(0, 0) += g.cwiseProduct(t->node(ia).value).sum();
  };
  return out;
}

inline Var relu(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  Var out = t->record(a.value().cwiseMax(0.0), t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io] {
    const Matrix& x = t->node(ia).value;
    t->grad(ia) += (x.array() > 0.0).select(t->node(io).grad, 0.0);
  };
  return out;
}

inline Var sum(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  Var out = t->record(std::move(v), t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io] { t->grad(ia).array() += t->node(io).grad(0, 0); };
  return out;
}

inline Var mean(Var a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

inline Var sum_squares(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  Matrix v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  Var out = t->record(std::move(v), t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io] { t->grad(ia) += 2.0 * t->node(io).grad(0, 0) * t->node(ia).value; };
  return out;
}

// Row i is the sum of table rows indices[i].
inline Var embedding_bag(Var table, const std::vector<std::vector<int>>& indices) {
  Tape* t = table.tape;
  const Matrix& tv = table.value();
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(indices.size()), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (int r : indices[i]) {
      if (r < 0 || r >= tv.rows()) throw std::out_of_range("embedding index out of range");
      v.row(static_cast<Eigen::Index>(i)) += tv.row(r);
    }
  }
  const int it = table.id;
  Var out = t->record(std::move(v), t->requires_grad(table), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, it, io, indices] {
    const Matrix& g = t->node(io).grad;
    Matrix& gt = t->grad(it);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      for (int r : indices[i]) gt.row(r) += g.row(static_cast<Eigen::Index>(i));
    }
  };
  return out;
}

struct MessageEdge {
  int src;
  int dst;
  int type;
};

// out[dst] += h[src] + edge_table[type] for every directed edge.
inline Var neighbor_sum(Var h, Var edge_table, const std::vector<MessageEdge>& edges) {
  detail::require_same_tape(h, edge_table);
  detail::require_shape(h.cols() == edge_table.cols(), "neighbor_sum");
  Tape* t = h.tape;
  const Matrix& hv = h.value();
  const Matrix& ev = edge_table.value();
  Matrix v = Matrix::Zero(hv.rows(), hv.cols());
  for (const auto& e : edges) v.row(e.dst) += hv.row(e.src) + ev.row(e.type);
  const int ih = h.id, ie = edge_table.id;
  Var out = t->record(std::move(v), t->requires_grad(h) || t->requires_grad(edge_table), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ih, ie, io, edges] {
    const Matrix& g = t->node(io).grad;
    const bool gh = t->node(ih).requires_grad, ge = t->node(ie).requires_grad;
    for (const auto& e : edges) {
      if (gh) t->grad(ih).row(e.src) += g.row(e.dst);
      if (ge) t->grad(ie).row(e.type) += g.row(e.dst);
    }
  };
  return out;
}

inline Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape* t = a.tape;
  Matrix v(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  const int ia = a.id;
  Var out = t->record(std::move(v), t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io, rows] {
    const Matrix& g = t->node(io).grad;
    Matrix& ga = t->grad(ia);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  };
  return out;
}

// Column vector of row means.
inline Var row_mean(Var a) {
  Tape* t = a.tape;
  const int ia = a.id;
  const double inv = 1.0 / static_cast<double>(a.cols());
  Var out = t->record(a.value().rowwise().sum() * inv, t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io, inv] {
    t->grad(ia).colwise() += t->node(io).grad.col(0) * inv;
  };
  return out;
}

// Per-row standardization (x - mean) / sqrt(var + 1e-5), no affine part.
inline Var row_normalize(Var a) {
  Tape* t = a.tape;
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + 1e-5);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  const int ia = a.id;
  Var out = t->record(xhat, t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io, inv_std] {
    const Matrix& g = t->node(io).grad;
    const Matrix& xh = t->node(io).value;
    Matrix& ga = t->grad(ia);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double gm = g.row(i).mean();
      const double gx = g.row(i).cwiseProduct(xh.row(i)).mean();
      ga.row(i).array() += inv_std(i) * (g.row(i).array() - gm - xh.row(i).array() * gx);
    }
  };
  return out;
}

// Graph g owns rows [offsets[g], offsets[g+1]).
using Segments = std::vector<int>;

// Attention logits (q_h · k_{x,h}) / sqrt(dk) per head h, softmax over the
// rows of each segment. q is 1xD, keys NxD; returns NxH.
inline Var segment_attention(Var q, Var keys, const Segments& offsets, int heads) {
  detail::require_same_tape(q, keys);
  detail::require_shape(q.rows() == 1 && q.cols() == keys.cols() && heads > 0 && keys.cols() % heads == 0,
                        "segment_attention");
  Tape* t = q.tape;
  const Eigen::Index dk = keys.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix& qv = q.value();
  const Matrix& kv = keys.value();
  Matrix att(kv.rows(), heads);
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const int lo = offsets[g], hi = offsets[g + 1];
    if (hi <= lo) throw std::invalid_argument("empty graph segment");
    for (int h = 0; h < heads; ++h) {
      double mx = -1e300;
      for (int x = lo; x < hi; ++x) {
        const double l = qv.block(0, h * dk, 1, dk).cwiseProduct(kv.block(x, h * dk, 1, dk)).sum() * inv_sqrt;
        att(x, h) = l;
        mx = std::max(mx, l);
      }
      double z = 0.0;
      for (int x = lo; x < hi; ++x) z += (att(x, h) = std::exp(att(x, h) - mx));
      for (int x = lo; x < hi; ++x) att(x, h) /= z;
    }
  }
  const int iq = q.id, ik = keys.id;
  Var out = t->record(std::move(att), t->requires_grad(q) || t->requires_grad(keys), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, iq, ik, io, offsets, heads, dk, inv_sqrt] {
    const Matrix& g = t->node(io).grad;
    const Matrix& a = t->node(io).value;
    const Matrix& qv2 = t->node(iq).value;
    const Matrix& kv2 = t->node(ik).value;
    const bool gq = t->node(iq).requires_grad, gk = t->node(ik).requires_grad;
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const int lo = offsets[s], hi = offsets[s + 1];
      for (int h = 0; h < heads; ++h) {
        double dotp = 0.0;
        for (int x = lo; x < hi; ++x) dotp += a(x, h) * g(x, h);
        for (int x = lo; x < hi; ++x) {
          const double dl = a(x, h) * (g(x, h) - dotp) * inv_sqrt;
          if (gq) t->grad(iq).block(0, h * dk, 1, dk) += dl * kv2.block(x, h * dk, 1, dk);
          if (gk) t->grad(ik).block(x, h * dk, 1, dk) += dl * qv2.block(0, h * dk, 1, dk);
        }
      }
    }
  };
  return out;
}

// out[g, head h columns] = sum over rows x of segment g of att[x,h] * v[x, head h columns].
inline Var segment_pool(Var att, Var values, const Segments& offsets, int heads) {
  detail::require_same_tape(att, values);
  detail::require_shape(att.rows() == values.rows() && att.cols() == heads && values.cols() % heads == 0,
                        "segment_pool");
  Tape* t = att.tape;
  const Eigen::Index dk = values.cols() / heads;
  const Matrix& av = att.value();
  const Matrix& vv = values.value();
  const auto ng = static_cast<Eigen::Index>(offsets.size()) - 1;
  Matrix out_v = Matrix::Zero(ng, vv.cols());
  for (Eigen::Index s = 0; s < ng; ++s) {
    for (int x = offsets[static_cast<std::size_t>(s)]; x < offsets[static_cast<std::size_t>(s) + 1]; ++x) {
      for (int h = 0; h < heads; ++h) out_v.block(s, h * dk, 1, dk) += av(x, h) * vv.block(x, h * dk, 1, dk);
    }
  }
  const int ia = att.id, iv = values.id;
  Var out = t->record(std::move(out_v), t->requires_grad(att) || t->requires_grad(values), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, iv, io, offsets, heads, dk] {
    const Matrix& g = t->node(io).grad;
    const Matrix& av2 = t->node(ia).value;
    const Matrix& vv2 = t->node(iv).value;
    const bool ga = t->node(ia).requires_grad, gv = t->node(iv).requires_grad;
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      for (int x = offsets[s]; x < offsets[s + 1]; ++x) {
        for (int h = 0; h < heads; ++h) {
          if (ga) t->grad(ia)(x, h) += g.block(row, h * dk, 1, dk).cwiseProduct(vv2.block(x, h * dk, 1, dk)).sum();
          if (gv) t->grad(iv).block(x, h * dk, 1, dk) += av2(x, h) * g.block(row, h * dk, 1, dk);
        }
      }
    }
  };
  return out;
}

// Euclidean distances ||a[p.first] - b[p.second]|| as a Px1 column. The
// gradient at zero distance is taken as zero.
inline Var pair_distance(Var a, Var b, const std::vector<std::pair<int, int>>& pairs) {
  detail::require_same_tape(a, b);
  detail::require_shape(a.cols() == b.cols(), "pair_distance");
  Tape* t = a.tape;
  Matrix d(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    d(static_cast<Eigen::Index>(p), 0) = (a.value().row(pairs[p].first) - b.value().row(pairs[p].second)).norm();
  }
  const int ia = a.id, ib = b.id;
  Var out = t->record(std::move(d), t->requires_grad(a) || t->requires_grad(b), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, ib, io, pairs] {
    const Matrix& g = t->node(io).grad;
    const Matrix& dv = t->node(io).value;
    const bool ga = t->node(ia).requires_grad, gb = t->node(ib).requires_grad;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto r = static_cast<Eigen::Index>(p);
      if (dv(r, 0) == 0.0) continue;
      const Eigen::RowVectorXd u =
          (t->node(ia).value.row(pairs[p].first) - t->node(ib).value.row(pairs[p].second)) * (g(r, 0) / dv(r, 0));
      if (ga) t->grad(ia).row(pairs[p].first) += u;
      if (gb) t->grad(ib).row(pairs[p].second) -= u;
    }
  };
  return out;
}

inline double smooth_l1_value(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

inline double smooth_l1_slope(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

// Sum over entries of weights * smoothL1(pred - target), threshold 1.
inline Var smooth_l1(Var pred, const Matrix& target, const Matrix& weights) {
  detail::require_shape(pred.rows() == target.rows() && pred.cols() == target.cols() &&
                            weights.rows() == target.rows() && weights.cols() == target.cols(),
                        "smooth_l1");
  Tape* t = pred.tape;
  const Matrix diff = pred.value() - target;
  Matrix v(1, 1);
  v(0, 0) = (diff.unaryExpr([](double x) { return smooth_l1_value(x); }).cwiseProduct(weights)).sum();
  const int ip = pred.id;
  Var out = t->record(std::move(v), t->requires_grad(pred), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ip, io, diff, weights] {
    t->grad(ip) +=
        t->node(io).grad(0, 0) * diff.unaryExpr([](double x) { return smooth_l1_slope(x); }).cwiseProduct(weights);
  };
  return out;
}

// Mean smooth-L1 over all entries.
inline Var smooth_l1_mean(Var pred, const Matrix& target) {
  const double w = 1.0 / static_cast<double>(target.size());
  return smooth_l1(pred, target, Matrix::Constant(target.rows(), target.cols(), w));
}

// Mean binary cross-entropy with logits.
inline Var bce_with_logits(Var logits, const Matrix& targets) {
  detail::require_shape(logits.rows() == targets.rows() && logits.cols() == targets.cols(), "bce_with_logits");
  Tape* t = logits.tape;
  const Matrix& z = logits.value();
  const double n = static_cast<double>(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double x = z(i, j);
      total += std::max(x, 0.0) - x * targets(i, j) + std::log1p(std::exp(-std::abs(x)));
    }
  }
  Matrix v(1, 1);
  v(0, 0) = total / n;
  const int il = logits.id;
  Var out = t->record(std::move(v), t->requires_grad(logits), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, il, io, targets, n] {
    const Matrix& zz = t->node(il).value;
    const double g = t->node(io).grad(0, 0) / n;
    Matrix& gl = t->grad(il);
    for (Eigen::Index i = 0; i < zz.rows(); ++i) {
      for (Eigen::Index j = 0; j < zz.cols(); ++j) {
        const double x = zz(i, j);
        const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        gl(i, j) += g * (sig - targets(i, j));
      }
    }
  };
  return out;
}

inline Var mse(Var pred, const Matrix& target) {
  detail::require_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse");
  Tape* t = pred.tape;
  const Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix v(1, 1);
  v(0, 0) = diff.squaredNorm() / n;
  const int ip = pred.id;
  Var out = t->record(std::move(v), t->requires_grad(pred), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ip, io, diff, n] { t->grad(ip) += (2.0 * t->node(io).grad(0, 0) / n) * diff; };
  return out;
}

// Softmax across the columns of a 1xK row.
inline Var softmax_row(Var a) {
  detail::require_shape(a.rows() == 1, "softmax_row");
  Tape* t = a.tape;
  const Matrix& x = a.value();
  Matrix p = (x.array() - x.maxCoeff()).exp();
  p /= p.sum();
  const int ia = a.id;
  Var out = t->record(std::move(p), t->requires_grad(a), nullptr);
  const int io = out.id;
  t->node(io).backward = [t, ia, io] {
    const Matrix& g = t->node(io).grad;
    const Matrix& pv = t->node(io).value;
    const double dotp = g.cwiseProduct(pv).sum();
    t->grad(ia).array() += pv.array() * (g.array() - dotp);
  };
  return out;
}

// Sum over c of weights[0, c] * parts[c]; weights is a 1xK variable.
inline Var mix(Var weights, const std::vector<Var>& parts) {
  detail::require_shape(weights.rows() == 1 && weights.cols() == static_cast<Eigen::Index>(parts.size()) &&
                            !parts.empty(),
                        "mix");
  Tape* t = weights.tape;
  Matrix v = Matrix::Zero(parts[0].rows(), parts[0].cols());
  bool rg = t->requires_grad(weights);
  std::vector<int> ids;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    detail::require_same_tape(weights, parts[c]);
    detail::require_shape(parts[c].rows() == v.rows() && parts[c].cols() == v.cols(), "mix");
    v += weights.value()(0, static_cast<Eigen::Index>(c)) * parts[c].value();
    rg = rg || t->requires_grad(parts[c]);
    ids.push_back(parts[c].id);
  }
  const int iw = weights.id;
  Var out = t->record(std::move(v), rg, nullptr);
  const int io = out.id;
  t->node(io).backward = [t, iw, io, ids] {
    const Matrix& g = t->node(io).grad;
    for (std::size_t c = 0; c < ids.size(); ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      if (t->node(iw).requires_grad) t->grad(iw)(0, col) += g.cwiseProduct(t->node(ids[c]).value).sum();
      if (t->node(ids[c]).requires_grad) t->grad(ids[c]) += t->node(iw).value(0, col) * g;
    }
  };
  return out;
}

inline Var mix(const std::vector<double>& weights, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("mix of nothing");
  Matrix w(1, static_cast<Eigen::Index>(weights.size()));
  for (std::size_t c = 0; c < weights.size(); ++c) w(0, static_cast<Eigen::Index>(c)) = weights[c];
  return mix(parts[0].tape->constant(std::move(w)), parts);
}

}  // namespace promptmol::encoder
