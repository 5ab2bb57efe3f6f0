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

#include "rcfuse/neural/heads.h"

#include <cmath>
#include <stdexcept>

#include "rcfuse/neural/layers.h"

namespace rcfuse::neural {

namespace {

void AddLinear(ParamBlock& params, const std::string& name, int in, int out, double stddev,
               std::mt19937_64& rng) {
  Param& w = params.Add(name + ".weight", {out, in});
  if (stddev > 0.0) {
    NormalInit(w, stddev, rng);
  } else {
    HeInit(w, in, rng);
  }
  params.Add(name + ".bias", {out});
}

std::vector<double> Linear(std::span<const double> x, const ParamBlock& params,
                           const std::string& name) {
  return LinearForward(x, params.Get(name + ".weight"), params.Get(name + ".bias"));
}

std::vector<double> LinearBack(std::span<const double> x, std::span<const double> g,
                               ParamBlock& params, const std::string& name) {
  return LinearBackward(x, g, params.Get(name + ".weight"), params.Get(name + ".bias"));
}

void AddInto(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor3 Conv(const Tensor3& x, const ParamBlock& params, const std::string& name) {
  return Conv2dForward(x, params.Get(name + ".weight"), params.Get(name + ".bias"));
}

Tensor3 FromFlat(int h, int w, int c, std::span<const double> data) {
  Tensor3 t(h, w, c);
  if (data.size() != t.data.size()) throw std::invalid_argument("gradient size mismatch");
  std::copy(data.begin(), data.end(), t.data.begin());
  return t;
}

}  // namespace

void NormalInit(Param& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : p.value) v = normal(rng);
}

// --- RPR ---------------------------------------------------------------------

void InitRprHead(ParamBlock& params, const RprHeadConfig& config, std::mt19937_64& rng) {
  AddLinear(params, "rpr.cls.fc1", config.input_size, config.hidden, 0.0, rng);
  AddLinear(params, "rpr.cls.fc2", config.hidden, 1, 0.01, rng);
  AddLinear(params, "rpr.reg.fc1", config.input_size, config.hidden, 0.0, rng);
  AddLinear(params, "rpr.reg.fc2", config.hidden, 4, 0.001, rng);
}

RprHeadOutput RprHead(std::span<const double> pooled, const ParamBlock& params) {
  RprHeadOutput out;
  out.cls_hidden = Linear(pooled, params, "rpr.cls.fc1");
  ReluInPlace(out.cls_hidden);
  out.logit = Linear(out.cls_hidden, params, "rpr.cls.fc2")[0];
  out.objectness = Logistic(out.logit);
  out.reg_hidden = Linear(pooled, params, "rpr.reg.fc1");
  ReluInPlace(out.reg_hidden);
  const std::vector<double> off = Linear(out.reg_hidden, params, "rpr.reg.fc2");
  for (int j = 0; j < 4; ++j) out.offsets[j] = off[j];
  return out;
}

std::vector<double> RprHeadBackward(std::span<const double> pooled, const RprHeadOutput& out,
                                    double grad_objectness,
                                    const std::array<double, 4>& grad_offsets,
                                    ParamBlock& params) {
  const double p = out.objectness;
  const bool clamped = out.logit < -30.0 || out.logit > 30.0;
  const double g_logit[1] = {clamped ? 0.0 : grad_objectness * p * (1.0 - p)};
  std::vector<double> g_cls_h = LinearBack(out.cls_hidden, g_logit, params, "rpr.cls.fc2");
  ReluBackwardInPlace(out.cls_hidden, g_cls_h);
  std::vector<double> g_in = LinearBack(pooled, g_cls_h, params, "rpr.cls.fc1");

  std::vector<double> g_reg_h = LinearBack(out.reg_hidden, grad_offsets, params, "rpr.reg.fc2");
  ReluBackwardInPlace(out.reg_hidden, g_reg_h);
  AddInto(g_in, LinearBack(pooled, g_reg_h, params, "rpr.reg.fc1"));
  return g_in;
}

// --- RPN ---------------------------------------------------------------------

void InitRpn(ParamBlock& params, const RpnConfig& config, int in_channels,
             std::mt19937_64& rng) {
  const int k = config.k();
  if (k < 1) throw std::invalid_argument("rpn: need at least one anchor per cell");
  Param& w = params.Add("rpn.conv.weight", {3, 3, in_channels, config.hidden});
  HeInit(w, 9 * in_channels, rng);
  params.Add("rpn.conv.bias", {config.hidden});
  NormalInit(params.Add("rpn.cls.weight", {1, 1, config.hidden, 2 * k}), 0.01, rng);
  params.Add("rpn.cls.bias", {2 * k});
  NormalInit(params.Add("rpn.box.weight", {1, 1, config.hidden, 4 * k}), 0.001, rng);
  params.Add("rpn.box.bias", {4 * k});
  NormalInit(params.Add("rpn.dist.weight", {1, 1, config.hidden, k}), 0.01, rng);
  params.Add("rpn.dist.bias", {k});
}

std::vector<Box2D> RpnAnchors(int fm_height, int fm_width, int stride, const RpnConfig& config) {
  std::vector<Box2D> anchors;
  anchors.reserve(static_cast<std::size_t>(fm_height) * fm_width * config.k());
  for (int y = 0; y < fm_height; ++y) {
    for (int x = 0; x < fm_width; ++x) {
      const double cx = (x + 0.5) * stride;
      const double cy = (y + 0.5) * stride;
      for (double s : config.scales) {
        for (double r : config.ratios) {
          const double w = s / std::sqrt(r);
          const double h = s * std::sqrt(r);
          anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return anchors;
}

RpnOutput RpnForward(const FeatureMap& fm, const RpnConfig& config, const ParamBlock& params) {
  RpnOutput out;
  out.height = fm.height();
  out.width = fm.width();
  out.k = config.k();
  out.hidden = Conv(fm.values, params, "rpn.conv");
  ReluInPlace(out.hidden);
  out.cls_logits = Conv(out.hidden, params, "rpn.cls");
  out.deltas = Conv(out.hidden, params, "rpn.box").data;
  out.distance_raw = Conv(out.hidden, params, "rpn.dist").data;
  const std::size_t anchors = static_cast<std::size_t>(out.height) * out.width * out.k;
  out.objectness.resize(anchors);
  for (std::size_t i = 0; i < anchors; ++i) {
    const double pair[2] = {out.cls_logits.data[2 * i], out.cls_logits.data[2 * i + 1]};
    out.objectness[i] = Softmax(pair)[1];
  }
  return out;
}

Tensor3 RpnBackward(const FeatureMap& fm, const RpnOutput& out,
                    std::span<const double> grad_objectness, std::span<const double> grad_deltas,
                    std::span<const double> grad_distance, ParamBlock& params) {
  const int h = out.height;
  const int w = out.width;
  const int k = out.k;
  Tensor3 g_logits(h, w, 2 * k);
  for (std::size_t i = 0; i < out.objectness.size(); ++i) {
    const double p1 = out.objectness[i];
    const double p0 = 1.0 - p1;
    const double g = grad_objectness[i] * p0 * p1;
    g_logits.data[2 * i] = -g;
    g_logits.data[2 * i + 1] = g;
  }
  Tensor3 g_hidden = Conv2dBackward(out.hidden, g_logits, params.Get("rpn.cls.weight"),
                                    params.Get("rpn.cls.bias"));
  const Tensor3 gb = Conv2dBackward(out.hidden, FromFlat(h, w, 4 * k, grad_deltas),
                                    params.Get("rpn.box.weight"), params.Get("rpn.box.bias"));
  const Tensor3 gd = Conv2dBackward(out.hidden, FromFlat(h, w, k, grad_distance),
                                    params.Get("rpn.dist.weight"), params.Get("rpn.dist.bias"));
  for (std::size_t i = 0; i < g_hidden.data.size(); ++i) {
    g_hidden.data[i] += gb.data[i] + gd.data[i];
  }
  ReluBackwardInPlace(out.hidden, g_hidden);
  return Conv2dBackward(fm.values, g_hidden, params.Get("rpn.conv.weight"),
                        params.Get("rpn.conv.bias"));
}

// --- Second stage ------------------------------------------------------------

void InitDetectorHead(ParamBlock& params, const DetectorHeadConfig& config,
                      std::mt19937_64& rng) {
  AddLinear(params, "det.fc1", config.input_size, config.hidden, 0.0, rng);
  AddLinear(params, "det.fc2", config.hidden, config.hidden, 0.0, rng);
  AddLinear(params, "det.cls", config.hidden, config.num_classes + 1, 0.01, rng);
  AddLinear(params, "det.box", config.hidden, 4 * config.num_classes, 0.001, rng);
}

DetectorHeadOutput DetectorHead(std::span<const double> pooled, const ParamBlock& params) {
  DetectorHeadOutput out;
  out.hidden1 = Linear(pooled, params, "det.fc1");
  ReluInPlace(out.hidden1);
  out.hidden2 = Linear(out.hidden1, params, "det.fc2");
  ReluInPlace(out.hidden2);
  out.probs = Softmax(Linear(out.hidden2, params, "det.cls"));
  out.deltas = Linear(out.hidden2, params, "det.box");
  return out;
}

std::vector<double> DetectorHeadBackward(std::span<const double> pooled,
                                         const DetectorHeadOutput& out,
                                         std::span<const double> grad_probs,
                                         std::span<const double> grad_deltas,
                                         ParamBlock& params) {
  const std::vector<double> g_logits = SoftmaxBackward(out.probs, grad_probs);
  std::vector<double> g_h2 = LinearBack(out.hidden2, g_logits, params, "det.cls");
  AddInto(g_h2, LinearBack(out.hidden2, grad_deltas, params, "det.box"));
  ReluBackwardInPlace(out.hidden2, g_h2);
  std::vector<double> g_h1 = LinearBack(out.hidden1, g_h2, params, "det.fc2");
  ReluBackwardInPlace(out.hidden1, g_h1);
  return LinearBack(pooled, g_h1, params, "det.fc1");
}

}  // namespace rcfuse::neural
