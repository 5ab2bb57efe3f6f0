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

#ifndef RCFUSE_NEURAL_ROI_POOL_H_
#define RCFUSE_NEURAL_ROI_POOL_H_

#include <span>
#include <vector>

#include "rcfuse/geometry.h"
#include "rcfuse/neural/tensor.h"

namespace rcfuse::neural {

struct RoiPoolResult {
  Tensor3 values;                // out_h x out_w x C
  std::vector<long> argmax;      // flat feature-map index per output, -1 for empty bins
};

// Max pooling over an out_h x out_w grid of bins laid over `box` in
// continuous feature coordinates (pixels / stride). Bin [s, e) covers cells
// floor(s) .. ceil(e) - 1, clamped to the map; empty bins yield 0.
// Throws std::invalid_argument when the box misses the feature map entirely.
RoiPoolResult RoiPool(const FeatureMap& fm, const Box2D& box, int out_h, int out_w);

// Scatters dL/doutput into `grad_features` through the recorded argmax cells.
void RoiPoolBackward(const RoiPoolResult& pooled, std::span<const double> grad_output,
                     Tensor3& grad_features);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_ROI_POOL_H_
