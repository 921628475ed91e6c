// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <unordered_map>

#include "promptmol/encoder/tensor.hpp"

namespace promptmol::encoder {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation over every non-frozen parameter of a store.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParameterStore& store) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : store.all()) {
      if (p->frozen) continue;
      if (!p->grad.allFinite()) throw NumericError("non-finite gradient for " + p->name);
      auto& st = state_[p];
      if (st.m.size() == 0) {
        st.m = Matrix::Zero(p->value.rows(), p->value.cols());
        st.v = Matrix::Zero(p->value.rows(), p->value.cols());
      }
      st.m = cfg_.beta1 * st.m + (1.0 - cfg_.beta1) * p->grad;
      st.v = cfg_.beta2 * st.v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
      p->value.array() -= cfg_.learning_rate * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + cfg_.epsilon);
    }
  }

  long steps() const { return t_; }

 private:
  struct State {
    Matrix m;
    Matrix v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::unordered_map<const Parameter*, State> state_;
};

}  // namespace promptmol::encoder
