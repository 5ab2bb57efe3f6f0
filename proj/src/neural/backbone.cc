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

#include "rcfuse/neural/backbone.h"

#include <stdexcept>
#include <string>

#include "rcfuse/neural/layers.h"

namespace rcfuse::neural {

namespace {

std::string ConvName(int i) { return "backbone.conv" + std::to_string(i + 1); }

// The last conv stage keeps its resolution.
bool Pools(int stage, int stages) { return stage + 1 < stages; }

}  // namespace

void InitBackbone(ParamBlock& params, const BackboneConfig& config, std::mt19937_64& rng) {
  if (config.channels.size() != 4) {
    throw std::invalid_argument("backbone: expected four conv stages");
  }
  int in = 3;
  for (int i = 0; i < static_cast<int>(config.channels.size()); ++i) {
    const int out = config.channels[i];
    Param& w = params.Add(ConvName(i) + ".weight", {3, 3, in, out});
    HeInit(w, 9 * in, rng);
    params.Add(ConvName(i) + ".bias", {out});
    in = out;
  }
}

FeatureMap TinyBackbone(const Tensor3& image, const ParamBlock& params,
                        const BackboneConfig& config, BackboneCache* cache) {
  const int stride = config.stride();
  if (image.channels != 3) throw std::invalid_argument("backbone: image must have 3 channels");
  if (image.height % stride != 0 || image.width % stride != 0 || image.height == 0 ||
      image.width == 0) {
    throw std::invalid_argument("backbone: image dims must be positive multiples of " +
                                std::to_string(stride));
  }
  if (cache) {
    cache->conv_inputs.clear();
    cache->relu_outputs.clear();
  }
  const int stages = static_cast<int>(config.channels.size());
  Tensor3 x = image;
  for (int i = 0; i < stages; ++i) {
    Tensor3 y = Conv2dForward(x, params.Get(ConvName(i) + ".weight"),
                              params.Get(ConvName(i) + ".bias"));
    ReluInPlace(y);
    if (cache) {
      cache->conv_inputs.push_back(std::move(x));
      cache->relu_outputs.push_back(y);
    }
    x = Pools(i, stages) ? AvgPool2Forward(y) : std::move(y);
  }
  return FeatureMap{std::move(x), stride};
}

void TinyBackboneBackward(const BackboneCache& cache, const Tensor3& grad_features,
                          ParamBlock& params, const BackboneConfig& config) {
  const int stages = static_cast<int>(config.channels.size());
  Tensor3 g = grad_features;
  for (int i = stages - 1; i >= 0; --i) {
    if (Pools(i, stages)) g = AvgPool2Backward(g);
    ReluBackwardInPlace(cache.relu_outputs[i], g);
    g = Conv2dBackward(cache.conv_inputs[i], g, params.Get(ConvName(i) + ".weight"),
                       params.Get(ConvName(i) + ".bias"), i > 0);
  }
}

}  // namespace rcfuse::neural
