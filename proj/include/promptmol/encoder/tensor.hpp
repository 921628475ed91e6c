// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptmol/error.hpp"

namespace promptmol::encoder {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

// Owns named parameters with stable addresses, in insertion order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Matrix::Zero(rows, cols);
    p->grad = Matrix::Zero(rows, cols);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter& get(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return *params_[it->second];
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  // Parameters whose name starts with prefix.
  std::vector<Parameter*> with_prefix(const std::string& prefix) {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
    }
    return out;
  }

  void set_frozen(const std::string& prefix, bool frozen) {
    for (Parameter* p : with_prefix(prefix)) p->frozen = frozen;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Records a forward computation; backward() replays it in reverse and adds
// gradients into the bound (non-frozen) parameters.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var constant(Matrix v) { return record(std::move(v), false, nullptr); }

  // Frozen parameters are bound as constants.
  Var parameter(Parameter& p) {
    const auto it = bound_.find(&p);
    if (it != bound_.end()) return Var{this, it->second};
    Var v = record(p.value, !p.frozen, nullptr);
    nodes_[static_cast<std::size_t>(v.id)].param = &p;
    bound_[&p] = v.id;
    return v;
  }

  Var record(Matrix v, bool requires_grad, std::function<void()> backward) {
    if (!v.allFinite()) throw_non_finite();
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool requires_grad(Var v) const { return node(v.id).requires_grad; }

  // Lazily zero-initialized gradient buffer.
  Matrix& grad(int id) {
    Node& n = node(id);
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("variable belongs to another tape");
    const Node& l = node(loss.id);
    if (l.value.rows() != 1 || l.value.cols() != 1) throw std::invalid_argument("backward needs a 1x1 loss");
    if (!l.requires_grad) return;
    grad(loss.id)(0, 0) += 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = node(id);
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward();
      if (n.param) {
        if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  [[noreturn]] static void throw_non_finite() { throw NumericError("non-finite value in forward pass"); }

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

inline const Matrix& Var::value() const { return tape->node(id).value; }

}  // namespace promptmol::encoder
