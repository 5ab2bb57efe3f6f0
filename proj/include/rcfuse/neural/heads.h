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

#ifndef RCFUSE_NEURAL_HEADS_H_
#define RCFUSE_NEURAL_HEADS_H_

#include <array>
#include <random>
#include <span>
#include <vector>

#include "rcfuse/geometry.h"
#include "rcfuse/neural/params.h"
#include "rcfuse/neural/tensor.h"

namespace rcfuse::neural {

void NormalInit(Param& p, double stddev, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Radar proposal refinement: two fully-connected branches over a flattened
// RoI-pooled feature vector. The classification branch ends in a single
// logistic objectness; the regression branch emits four corner offsets.

struct RprHeadConfig {
  int input_size = 256;
  int hidden = 32;
};

void InitRprHead(ParamBlock& params, const RprHeadConfig& config, std::mt19937_64& rng);

struct RprHeadOutput {
  double objectness = 0.5;
  std::array<double, 4> offsets{};
  double logit = 0.0;
  std::vector<double> cls_hidden;
  std::vector<double> reg_hidden;
};

RprHeadOutput RprHead(std::span<const double> pooled, const ParamBlock& params);
// Returns dL/dpooled.
std::vector<double> RprHeadBackward(std::span<const double> pooled, const RprHeadOutput& out,
                                    double grad_objectness,
                                    const std::array<double, 4>& grad_offsets,
                                    ParamBlock& params);

// ---------------------------------------------------------------------------
// Image region proposal network: shared 3x3 conv + relu, then 1x1 heads for
// two-way objectness (2k logits), corner offsets (4k) and raw distance (k).

struct RpnConfig {
  int hidden = 32;
  std::vector<double> scales = {16.0, 40.0, 100.0};  // sqrt(area), pixels
  std::vector<double> ratios = {0.5, 1.0, 2.0};      // height / width

  int k() const { return static_cast<int>(scales.size() * ratios.size()); }
};

void InitRpn(ParamBlock& params, const RpnConfig& config, int in_channels,
             std::mt19937_64& rng);

// Per-cell anchors ordered (row, col, scale, ratio), centered on cell centers.
std::vector<Box2D> RpnAnchors(int fm_height, int fm_width, int stride, const RpnConfig& config);

struct RpnOutput {
  int height = 0;
  int width = 0;
  int k = 0;
  std::vector<double> objectness;    // H*W*k, probability of "object"
  std::vector<double> deltas;        // H*W*4k
  std::vector<double> distance_raw;  // H*W*k, d_hat before DecodeDistance
  Tensor3 hidden;
  Tensor3 cls_logits;
};

RpnOutput RpnForward(const FeatureMap& fm, const RpnConfig& config, const ParamBlock& params);
// Returns dL/dfeatures.
Tensor3 RpnBackward(const FeatureMap& fm, const RpnOutput& out,
                    std::span<const double> grad_objectness, std::span<const double> grad_deltas,
                    std::span<const double> grad_distance, ParamBlock& params);

// ---------------------------------------------------------------------------
// Second stage: two fully-connected layers, then a softmax over n + 1 classes
// (index 0 is background) and class-specific corner offsets (4n).

struct DetectorHeadConfig {
  int input_size = 256;
  int hidden = 64;
  int num_classes = 6;
};

void InitDetectorHead(ParamBlock& params, const DetectorHeadConfig& config,
                      std::mt19937_64& rng);

struct DetectorHeadOutput {
  std::vector<double> probs;
  std::vector<double> deltas;
  std::vector<double> hidden1;
  std::vector<double> hidden2;
};

DetectorHeadOutput DetectorHead(std::span<const double> pooled, const ParamBlock& params);
std::vector<double> DetectorHeadBackward(std::span<const double> pooled,
                                         const DetectorHeadOutput& out,
                                         std::span<const double> grad_probs,
                                         std::span<const double> grad_deltas,
                                         ParamBlock& params);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_HEADS_H_
