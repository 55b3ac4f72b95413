// Copyright 2026 The PerCoNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/params.hpp"
#include "perconet/core/tape.hpp"

namespace perconet {

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

namespace detail {

// Relative error of one gradient component. Components that are tiny
// compared with the largest numerical component are measured against a
// floor of 1e-3 times that scale, so roundoff on near-zero entries does not
// dominate the report.
inline double component_error(double analytic, double numeric, double scale) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3 * scale, 1e-12});
  return std::abs(analytic - numeric) / denom;
}

inline double step_for(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

inline double max_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, component_error(analytic[i], numeric[i], scale));
  return worst;
}

inline void require_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw CheckInapplicable("grad check " + name + ": non-finite output");
}

}  // namespace detail

using ScalarFn = std::function<Var<double>(Tape<double>&, Var<double>)>;

// Compares the tape's gradient of a scalar function at `point` with central
// finite differences, step 1e-5 * max(1, |x|).
inline GradCheckReport grad_check(const ScalarFn& fn, const Tensor<double>& point, double tol,
                                  std::string name = "grad_check") {
  Tape<double> tape;
  Var<double> x = tape.variable(point);
  Var<double> y = fn(tape, x);
  detail::require_finite(y.item(), name);
  tape.backward(y);
  const std::vector<double> analytic = tape.grad(x);

  auto eval = [&](const Tensor<double>& at) {
    Tape<double> probe(false);
    const double v = fn(probe, probe.variable(at)).item();
    detail::require_finite(v, name);
    return v;
  };
  std::vector<double> numeric(point.size());
  Tensor<double> probe_point = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double h = detail::step_for(point.data[i]);
    probe_point.data[i] = point.data[i] + h;
    const double up = eval(probe_point);
    probe_point.data[i] = point.data[i] - h;
    const double down = eval(probe_point);
    probe_point.data[i] = point.data[i];
    numeric[i] = (up - down) / (2.0 * h);
  }
  GradCheckReport report{std::move(name), detail::max_error(analytic, numeric), tol, point.size(), false};
  report.passed = report.max_rel_error < tol;
  return report;
}

// Same check over every trainable parameter of a store. `loss` runs a full
// forward pass against the store and returns the scalar; when `backward` is
// true it must also leave gradients in the store. One report per parameter.
using StoreLossFn = std::function<double(ParamStore<double>&, bool backward)>;

inline std::vector<GradCheckReport> grad_check_params(ParamStore<double>& params,
                                                      const StoreLossFn& loss, double tol,
                                                      const std::string& prefix = "") {
  params.zero_grad();
  detail::require_finite(loss(params, true), prefix);
  struct Pending {
    std::string name;
    std::vector<double> analytic;
    std::vector<double> numeric;
  };
  std::vector<Pending> pending;
  double scale = 0.0;
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    Pending p{prefix + e.name,
              e.tensor.grad ? *e.tensor.grad : std::vector<double>(e.tensor.size(), 0.0),
              std::vector<double>(e.tensor.size())};
    for (std::size_t i = 0; i < e.tensor.size(); ++i) {
      const double x0 = e.tensor.data[i];
      const double h = detail::step_for(x0);
      e.tensor.data[i] = x0 + h;
      const double up = loss(params, false);
      e.tensor.data[i] = x0 - h;
      const double down = loss(params, false);
      e.tensor.data[i] = x0;
      detail::require_finite(up, p.name);
      detail::require_finite(down, p.name);
      p.numeric[i] = (up - down) / (2.0 * h);
      scale = std::max(scale, std::abs(p.numeric[i]));
    }
    pending.push_back(std::move(p));
  }
  // The error floor uses the largest gradient component over the whole
  // store, so a tensor whose gradient is near zero everywhere is judged
  // against the model's gradient scale rather than its own roundoff.
  std::vector<GradCheckReport> reports;
  for (auto& p : pending) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.numeric.size(); ++i)
      worst = std::max(worst, detail::component_error(p.analytic[i], p.numeric[i], scale));
    reports.push_back({p.name, worst, tol, p.numeric.size(), worst < tol});
  }
  return reports;
}

}  // namespace perconet
