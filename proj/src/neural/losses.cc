/* Copyright 2026 The rcfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "rcfuse/neural/losses.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcfuse::neural {

double DecodeDistance(double d_hat) {
  // 1/logistic(z) - 1 == exp(-z); the closed form avoids the cancellation.
  return std::exp(-std::clamp(d_hat, -30.0, 30.0));
}

double EncodeDistance(double meters) {
  if (!(meters > 0.0)) throw std::invalid_argument("EncodeDistance: distance must be positive");
  return -std::log(meters);
}

double SmoothL1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double SmoothL1Grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

double CrossEntropy(std::span<const double> p, int label, std::span<double> grad_p) {
  if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
    throw std::out_of_range("CrossEntropy: label out of range");
  }
  const double q = p[label];
  if (!grad_p.empty()) {
    std::fill(grad_p.begin(), grad_p.end(), 0.0);
    grad_p[label] = q > kProbabilityFloor ? -1.0 / q : 0.0;
  }
  return -std::log(std::max(q, kProbabilityFloor));
}

void LossBatch::SetDefaultNormalizers() {
  n_cls = std::max<double>(1.0, static_cast<double>(p.size()));
  const auto positives = std::count(p_star.begin(), p_star.end(), 1);
  n_reg = std::max<double>(1.0, static_cast<double>(positives));
  lambda = 1.0;
}

double MultitaskLoss(const LossBatch& batch, LossBatchGrad* grad) {
  if (batch.p.size() != batch.p_star.size()) {
    throw std::invalid_argument("MultitaskLoss: |p| != |p_star|");
  }
  if (batch.t.size() != batch.t_star.size()) {
    throw std::invalid_argument("MultitaskLoss: |t| != |t_star|");
  }
  const auto positives =
      static_cast<std::size_t>(std::count(batch.p_star.begin(), batch.p_star.end(), 1));
  if (batch.t.size() != positives) {
    throw std::invalid_argument("MultitaskLoss: one regression row per positive required");
  }
  if (grad) {
    grad->p.assign(batch.p.size(), 0.0);
    grad->t.assign(batch.t.size(), {0.0, 0.0, 0.0, 0.0});
  }
  double cls = 0.0;
  for (std::size_t i = 0; i < batch.p.size(); ++i) {
    const double two_way[2] = {1.0 - batch.p[i], batch.p[i]};
    double g[2] = {0.0, 0.0};
    cls += CrossEntropy(two_way, batch.p_star[i], grad ? std::span<double>(g) : std::span<double>());
    if (grad) grad->p[i] = (g[1] - g[0]) / batch.n_cls;
  }
  double reg = 0.0;
  for (std::size_t r = 0; r < batch.t.size(); ++r) {
    for (int j = 0; j < 4; ++j) {
      const double diff = batch.t[r][j] - batch.t_star[r][j];
      reg += SmoothL1(diff);
      if (grad) grad->t[r][j] = batch.lambda * SmoothL1Grad(diff) / batch.n_reg;
    }
  }
  return cls / batch.n_cls + batch.lambda * reg / batch.n_reg;
}

double DistanceLoss(std::span<const double> d_hat, std::span<const double> d_star,
                    std::span<const char> mask, std::vector<double>* grad) {
  if (d_hat.size() != d_star.size() || d_hat.size() != mask.size()) {
    throw std::invalid_argument("DistanceLoss: misaligned inputs");
  }
  if (grad) grad->assign(d_hat.size(), 0.0);
  const auto count = std::count_if(mask.begin(), mask.end(), [](char m) { return m != 0; });
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < d_hat.size(); ++i) {
    if (!mask[i]) continue;
    const double diff = d_hat[i] - EncodeDistance(d_star[i]);
    sum += SmoothL1(diff);
    if (grad) (*grad)[i] = SmoothL1Grad(diff) / static_cast<double>(count);
  }
  return sum / static_cast<double>(count);
}

}  // namespace rcfuse::neural
