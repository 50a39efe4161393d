/**
 * Copyright 2026 The cropseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <random>
#include <string>
#include <vector>

#include "cropseg/nn/tensor.hpp"

namespace cropseg::nn {

/// Anything with a train-mode forward, a backward that accumulates parameter
/// gradients and returns dL/dx, and a parameter list.
template <typename L>
concept DifferentiableLayer = requires(L l, const Tensor<double>& t) {
  { l.forward(t) } -> std::convertible_to<Tensor<double>>;
  { l.backward(t) } -> std::convertible_to<Tensor<double>>;
  { l.parameters() } -> std::convertible_to<std::vector<Param<double>*>>;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "input[i]" or "<param>[i]"
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries far below the
/// tensor's gradient scale from being judged on round-off alone.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor, 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Entries are compared on at least this fraction of the tensor's largest
/// analytic gradient magnitude.
inline constexpr double kGradScaleFloor = 1e-3;

/// Compares analytic input and parameter gradients of the scalar
/// L = sum(r * layer(x)) against central differences, r a fixed random
/// projection. Runs in 64-bit.
template <DifferentiableLayer L>
GradCheckResult finite_difference_check(L& layer, const Tensor<double>& input, double perturbation,
                                        std::uint64_t projection_seed = 7) {
  if (perturbation < 1e-7 || perturbation > 1e-4)
    throw ArgumentError("finite-difference perturbation must lie in [1e-7, 1e-4]");

  auto params = layer.parameters();
  Tensor<double> y0 = layer.forward(input);
  Tensor<double> proj(y0.shape());
  std::mt19937_64 rng(projection_seed);
  fill_uniform(proj, rng, -1.0, 1.0);

  auto loss_at = [&](const Tensor<double>& x) {
    const Tensor<double> y = layer.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };

  for (auto* p : params) p->zero_grad();
  layer.forward(input);
  const Tensor<double> dx = layer.backward(proj);
  std::vector<Tensor<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  auto floor_of = [](const Tensor<double>& g) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i]));
    return kGradScaleFloor * m;
  };

  GradCheckResult res;
  double floor = 0.0;
  auto record = [&](double a, double n, const std::string& where) {
    const double e = relative_error(a, n, floor);
    ++res.checked;
    if (e > res.max_rel_error) {
      res.max_rel_error = e;
      res.worst = where;
    }
  };

  Tensor<double> x = input;
  floor = floor_of(dx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + perturbation;
    const double lp = loss_at(x);
    x[i] = orig - perturbation;
    const double lm = loss_at(x);
    x[i] = orig;
    record(dx[i], (lp - lm) / (2.0 * perturbation), "input[" + std::to_string(i) + "]");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& val = params[k]->value;
    floor = floor_of(analytic[k]);
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double orig = val[i];
      val[i] = orig + perturbation;
      const double lp = loss_at(input);
      val[i] = orig - perturbation;
      const double lm = loss_at(input);
      val[i] = orig;
      record(analytic[k][i], (lp - lm) / (2.0 * perturbation),
             params[k]->name + "[" + std::to_string(i) + "]");
    }
  }
  return res;
}

}  // namespace cropseg::nn
