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

#ifndef RCFUSE_NEURAL_LOSSES_H_
#define RCFUSE_NEURAL_LOSSES_H_

#include <array>
#include <span>
#include <vector>

namespace rcfuse::neural {

// Probabilities are floored at this value before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

// Distance head output transform: d = 1 / logistic(d_hat) - 1, i.e. exp(-d_hat)
// with d_hat clamped to [-30, 30].
double DecodeDistance(double d_hat);
// logit(1 / (d + 1)) = -ln d. Throws std::invalid_argument for d <= 0.
double EncodeDistance(double meters);

double SmoothL1(double x);
double SmoothL1Grad(double x);

// -ln p[label]. When `grad_p` is non-empty it receives dL/dp.
double CrossEntropy(std::span<const double> p, int label, std::span<double> grad_p = {});

// Objectness/box objective:
//   L = (1/n_cls) sum_i CE(p_i, p*_i) + lambda (1/n_reg) sum_i p*_i smoothL1(t_i - t*_i)
// `p` holds object probabilities; the two-way log loss uses {1 - p, p}.
// `t` / `t_star` rows pair up with the positive entries of `p_star` in order.
struct LossBatch {
  std::vector<double> p;
  std::vector<int> p_star;
  std::vector<std::array<double, 4>> t;
  std::vector<std::array<double, 4>> t_star;
  double n_cls = 1.0;
  double n_reg = 1.0;
  double lambda = 1.0;

  // n_cls = |p|, n_reg = max(1, #positives), lambda = 1.
  void SetDefaultNormalizers();
};

struct LossBatchGrad {
  std::vector<double> p;
  std::vector<std::array<double, 4>> t;
};

double MultitaskLoss(const LossBatch& batch, LossBatchGrad* grad = nullptr);

// Mean over masked entries of smoothL1(d_hat - EncodeDistance(d_star));
// 0 when nothing is masked. `grad` (if given) is resized to |d_hat|.
double DistanceLoss(std::span<const double> d_hat, std::span<const double> d_star,
                    std::span<const char> mask, std::vector<double>* grad = nullptr);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_LOSSES_H_
