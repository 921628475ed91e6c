// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "promptmol/encoder/tensor.hpp"

namespace promptmol::encoder {

struct FiniteDiffReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t non_differentiable = 0;  // excluded kink coordinates
  std::size_t failing = 0;
  // Largest |analytic - numeric| among failing coordinates, in units of the
  // finite-difference resolution ulp(f) / (2 step).
  double failing_error_in_ulps = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
}

// Compares grad(point) with central differences of f. A coordinate that
// misses the tolerance is classified as a kink (and excluded) only when its
// difference quotients change with the step by clearly more than the
// rounding floor of f allows; smooth coordinates that miss are failures.
inline FiniteDiffReport finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                                          const std::function<std::vector<double>(const std::vector<double>&)>& grad,
                                          const std::vector<double>& point, double step, double tolerance) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check needs step > 0");
  const std::vector<double> analytic = grad(point);
  if (analytic.size() != point.size()) throw std::invalid_argument("gradient size mismatch");
  FiniteDiffReport rep;
  const double f0 = f(point);
  std::vector<double> x = point;
  auto eval = [&](std::size_t i, double delta) {
    x[i] = point[i] + delta;
    const double v = f(x);
    x[i] = point[i];
    return v;
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double fp = eval(i, step);
    const double fm = eval(i, -step);
    const double numeric = (fp - fm) / (2.0 * step);
    ++rep.checked;
    const double err = relative_error(analytic[i], numeric);
    double ulp = 0.0;
    if (err > tolerance) {
      const double half = step / 2;
      const double fp2 = eval(i, half);
      const double fm2 = eval(i, -half);
      const double magnitude = std::max({std::abs(f0), std::abs(fp), std::abs(fm), std::abs(fp2), std::abs(fm2)});
      ulp = std::nextafter(magnitude, INFINITY) - magnitude;
      const double floor = 10.0 * 8.0 * ulp / half;
      const double central_shift = std::abs(numeric - (fp2 - fm2) / (2.0 * half));
      const double curvature_shift = std::abs((fp - 2.0 * f0 + fm) / step - 2.0 * (fp2 - 2.0 * f0 + fm2) / half);
      if (central_shift > floor || curvature_shift > floor) {
        ++rep.non_differentiable;
        continue;
      }
      ++rep.failing;
      rep.failing_error_in_ulps =
          std::max(rep.failing_error_in_ulps, std::abs(analytic[i] - numeric) * 2.0 * step / std::max(ulp, 1e-300));
    }
    if (err > rep.max_relative_error || rep.checked == 1) {
      rep.max_relative_error = std::max(rep.max_relative_error, err);
      rep.worst_index = i;
      rep.worst_analytic = analytic[i];
      rep.worst_numeric = numeric;
    }
  }
  rep.passed = rep.max_relative_error <= tolerance;
  return rep;
}

// Flattening helpers so that a ParameterStore can be driven by the checker.
inline std::vector<double> flatten_values(const std::vector<Parameter*>& params) {
  std::vector<double> out;
  for (const Parameter* p : params) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
  return out;
}

inline std::vector<double> flatten_grads(const std::vector<Parameter*>& params) {
  std::vector<double> out;
  for (const Parameter* p : params) out.insert(out.end(), p->grad.data(), p->grad.data() + p->grad.size());
  return out;
}

inline void assign_values(const std::vector<Parameter*>& params, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = flat.at(k++);
  }
  if (k != flat.size()) throw std::invalid_argument("flat vector size mismatch");
}

// Runs the check over `params`, where loss(tape) records a scalar loss.
inline FiniteDiffReport check_parameters(ParameterStore& store, const std::vector<Parameter*>& params,
                                         const std::function<Var(Tape&)>& loss, double step, double tolerance) {
  const std::vector<double> origin = flatten_values(params);
  auto f = [&](const std::vector<double>& x) {
    assign_values(params, x);
    Tape tape;
    return loss(tape).scalar();
  };
  auto g = [&](const std::vector<double>& x) {
    assign_values(params, x);
    store.zero_grad();
    Tape tape;
    tape.backward(loss(tape));
    return flatten_grads(params);
  };
  FiniteDiffReport rep = finite_diff_check(f, g, origin, step, tolerance);
  assign_values(params, origin);
  return rep;
}

}  // namespace promptmol::encoder
