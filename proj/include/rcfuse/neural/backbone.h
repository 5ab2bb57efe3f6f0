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

#ifndef RCFUSE_NEURAL_BACKBONE_H_
#define RCFUSE_NEURAL_BACKBONE_H_

#include <random>
#include <vector>

#include "rcfuse/neural/params.h"
#include "rcfuse/neural/tensor.h"

namespace rcfuse::neural {

// Fixed tiny feature extractor, stride 8:
//   conv3x3(3 -> c0)  relu  avgpool2
//   conv3x3(c0 -> c1) relu  avgpool2
//   conv3x3(c1 -> c2) relu  avgpool2
//   conv3x3(c2 -> c3) relu
// Parameters are named "backbone.convN.weight" / "backbone.convN.bias".
struct BackboneConfig {
  std::vector<int> channels = {8, 16, 16, 16};

  int stride() const { return 8; }
  int out_channels() const { return channels.back(); }
};

void InitBackbone(ParamBlock& params, const BackboneConfig& config, std::mt19937_64& rng);

// Intermediate activations kept for the backward pass.
struct BackboneCache {
  std::vector<Tensor3> conv_inputs;
  std::vector<Tensor3> relu_outputs;
};

// `image` is H x W x 3 with values in [0, 1]; H and W must be multiples of the
// stride (std::invalid_argument otherwise).
FeatureMap TinyBackbone(const Tensor3& image, const ParamBlock& params,
                        const BackboneConfig& config, BackboneCache* cache = nullptr);

// Accumulates parameter gradients given dL/dfeatures.
void TinyBackboneBackward(const BackboneCache& cache, const Tensor3& grad_features,
                          ParamBlock& params, const BackboneConfig& config);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_BACKBONE_H_
