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

#include "rcfuse/neural/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace rcfuse::neural {

GradCheckReport GradCheck(ParamBlock& params, const LossFunction& loss,
                          const GradCheckOptions& options) {
  params.ZeroGrad();
  loss(params, true);
  std::vector<std::vector<double>> analytic;
  for (const Param& p : params.params()) analytic.push_back(p.grad);
  params.ZeroGrad();
  const double center = loss(params, false);

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.params().size(); ++k) {
    Param& p = params.params()[k];
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_entries_per_param > 0 && idx.size() > options.max_entries_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_entries_per_param);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double a = analytic[k][i];
      const auto relative_error = [&](double step) {
        const double saved = p.value[i];
        p.value[i] = saved + step;
        const double up = loss(params, false);
        p.value[i] = saved - step;
        const double down = loss(params, false);
        p.value[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(a), std::abs(numeric), options.absolute_floor});
        return std::pair{std::abs(a - numeric) / denom, up + down - 2.0 * center};
      };
      auto [rel, curvature] = relative_error(options.step);
      // A large second difference means a ReLU or max kink lies inside the
      // stencil; a narrower stencil usually steps past it.
      if (rel > options.tolerance &&
          std::abs(curvature) > options.kink_curvature * options.step * options.step) {
        rel = relative_error(options.step * options.kink_step_factor).first;
        ++report.kink_retries;
      }
      ++report.checked;
      if (!(rel <= report.max_relative_error)) {
        report.max_relative_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace rcfuse::neural
