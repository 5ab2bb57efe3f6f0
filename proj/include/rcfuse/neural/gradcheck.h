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

#ifndef RCFUSE_NEURAL_GRADCHECK_H_
#define RCFUSE_NEURAL_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcfuse/neural/params.h"

namespace rcfuse::neural {

// Evaluates a scalar loss at the current parameter values. When `with_grad`
// is set it must also accumulate analytic gradients into the block (which the
// checker zeroes beforehand).
using LossFunction = std::function<double(ParamBlock& params, bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double absolute_floor = 1e-6;
  // Per-parameter cap on checked entries; 0 checks everything.
  std::size_t max_entries_per_param = 0;
  // Entries failing with |f(x+h) + f(x-h) - 2 f(x)| > kink_curvature * h^2
  // are rechecked once with step * kink_step_factor.
  double kink_curvature = 10.0;
  double kink_step_factor = 1e-2;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t kink_retries = 0;
  bool passed = true;
};

// Compares analytic gradients to central finite differences. Parameter
// values are restored afterwards.
GradCheckReport GradCheck(ParamBlock& params, const LossFunction& loss,
                          const GradCheckOptions& options = {});

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

// Checks every differentiable block on small random problems drawn from
// `seed`: losses, RPR head, RPN heads with the distance layer, second-stage
// head, RoI pooling and the backbone. Inputs are included as parameters so
// input gradients are checked too.
std::vector<NamedGradCheck> RunGradCheckSuite(std::uint64_t seed,
                                              const GradCheckOptions& options = {});

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_GRADCHECK_H_
