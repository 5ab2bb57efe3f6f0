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

#include <array>
#include <random>
#include <vector>

#include "rcfuse/neural/backbone.h"
#include "rcfuse/neural/gradcheck.h"
#include "rcfuse/neural/heads.h"
#include "rcfuse/neural/losses.h"
#include "rcfuse/neural/roi_pool.h"

namespace rcfuse::neural {
namespace {

void Fill(Param& p, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : p.value) v = u(rng);
}

std::vector<double> Uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

void JitterBiases(ParamBlock& params, std::mt19937_64& rng) {
  for (Param& p : params.params()) {
    if (p.name.ends_with(".bias")) Fill(p, -0.3, 0.3, rng);
  }
}

Tensor3 AsTensor(const Param& p) {
  Tensor3 t(p.shape[0], p.shape[1], p.shape[2]);
  t.data = p.value;
  return t;
}

void AddInto(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::array<double, 4> Target(std::mt19937_64& rng) {
  const std::vector<double> v = Uniform(4, -0.8, 0.8, rng);
  return {v[0], v[1], v[2], v[3]};
}

GradCheckReport CheckLosses(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  Fill(params.Add("p", {6}), 0.05, 0.95, rng);
  Fill(params.Add("t", {3, 4}), -2.0, 2.0, rng);
  Fill(params.Add("d_hat", {4}), -4.0, 1.0, rng);
  Fill(params.Add("softmax_p", {5}), 0.05, 1.0, rng);
  const std::vector<int> labels = {1, 0, 1, 0, 1, 0};
  std::vector<std::array<double, 4>> t_star;
  for (int i = 0; i < 3; ++i) t_star.push_back(Target(rng));
  const std::vector<double> d_star = Uniform(4, 0.5, 60.0, rng);
  const std::vector<char> mask = {1, 0, 1, 1};
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        LossBatch batch;
        batch.p = pb.Get("p").value;
        batch.p_star = labels;
        const std::vector<double>& t = pb.Get("t").value;
        for (int i = 0; i < 3; ++i) batch.t.push_back({t[4 * i], t[4 * i + 1], t[4 * i + 2], t[4 * i + 3]});
        batch.t_star = t_star;
        batch.SetDefaultNormalizers();
        LossBatchGrad g;
        double loss = MultitaskLoss(batch, with_grad ? &g : nullptr);
        std::vector<double> gd;
        loss += DistanceLoss(pb.Get("d_hat").value, d_star, mask, with_grad ? &gd : nullptr);
        std::vector<double> gs(5, 0.0);
        loss += CrossEntropy(pb.Get("softmax_p").value, 3, with_grad ? std::span<double>(gs) : std::span<double>());
        if (with_grad) {
          AddInto(pb.Get("p").grad, g.p);
          for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 4; ++k) pb.Get("t").grad[4 * i + k] += g.t[i][k];
          }
          AddInto(pb.Get("d_hat").grad, gd);
          AddInto(pb.Get("softmax_p").grad, gs);
        }
        return loss;
      },
      opts);
}

GradCheckReport CheckRprHead(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  InitRprHead(params, {12, 5}, rng);
  JitterBiases(params, rng);
  Fill(params.Add("input", {3, 12}), -1.0, 1.5, rng);
  const std::vector<int> labels = {1, 0, 1};
  const std::array<std::array<double, 4>, 2> targets = {Target(rng), Target(rng)};
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        const std::vector<double>& in = pb.Get("input").value;
        LossBatch batch;
        std::vector<RprHeadOutput> outs;
        for (int i = 0; i < 3; ++i) {
          outs.push_back(RprHead(std::span<const double>(in.data() + 12 * i, 12), pb));
          batch.p.push_back(outs.back().objectness);
          batch.p_star.push_back(labels[i]);
          if (labels[i] == 1) batch.t.push_back(outs.back().offsets);
        }
        batch.t_star = {targets[0], targets[1]};
        batch.SetDefaultNormalizers();
        LossBatchGrad g;
        const double loss = MultitaskLoss(batch, with_grad ? &g : nullptr);
        if (with_grad) {
          int m = 0;
          for (int i = 0; i < 3; ++i) {
            std::array<double, 4> gt{};
            if (labels[i] == 1) gt = g.t[m++];
            const std::span<const double> x(in.data() + 12 * i, 12);
            const std::vector<double> gx = RprHeadBackward(x, outs[i], g.p[i], gt, pb);
            for (int k = 0; k < 12; ++k) pb.Get("input").grad[12 * i + k] += gx[k];
          }
        }
        return loss;
      },
      opts);
}

GradCheckReport CheckRpn(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  RpnConfig cfg;
  cfg.hidden = 4;
  cfg.scales = {16.0, 32.0};
  cfg.ratios = {1.0};
  InitRpn(params, cfg, 3, rng);
  JitterBiases(params, rng);
  Fill(params.Add("features", {3, 4, 3}), -0.5, 1.5, rng);
  // Anchor picks (cell * k + a) with labels; positives get box and distance targets.
  const std::vector<int> picks = {0, 5, 9, 14, 22, 23};
  const std::vector<int> labels = {1, 0, 1, 0, 1, 0};
  std::vector<std::array<double, 4>> t_star;
  for (int i = 0; i < 3; ++i) t_star.push_back(Target(rng));
  const std::vector<double> d_star = Uniform(3, 2.0, 50.0, rng);
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        FeatureMap fm{AsTensor(pb.Get("features")), 8};
        const RpnOutput out = RpnForward(fm, cfg, pb);
        LossBatch batch;
        std::vector<double> d_hat;
        std::vector<int> pos;
        for (std::size_t j = 0; j < picks.size(); ++j) {
          const int i = picks[j];
          batch.p.push_back(out.objectness[i]);
          batch.p_star.push_back(labels[j]);
          if (labels[j] == 1) {
            batch.t.push_back({out.deltas[4 * i], out.deltas[4 * i + 1], out.deltas[4 * i + 2],
                               out.deltas[4 * i + 3]});
            d_hat.push_back(out.distance_raw[i]);
            pos.push_back(i);
          }
        }
        batch.t_star = t_star;
        batch.SetDefaultNormalizers();
        LossBatchGrad g;
        double loss = MultitaskLoss(batch, with_grad ? &g : nullptr);
        const std::vector<char> mask(d_hat.size(), 1);
        std::vector<double> gd;
        loss += DistanceLoss(d_hat, d_star, mask, with_grad ? &gd : nullptr);
        if (with_grad) {
          std::vector<double> g_obj(out.objectness.size(), 0.0);
          std::vector<double> g_del(out.deltas.size(), 0.0);
          std::vector<double> g_dist(out.distance_raw.size(), 0.0);
          for (std::size_t j = 0; j < picks.size(); ++j) g_obj[picks[j]] = g.p[j];
          for (std::size_t m = 0; m < pos.size(); ++m) {
            for (int k = 0; k < 4; ++k) g_del[4 * pos[m] + k] = g.t[m][k];
            g_dist[pos[m]] = gd[m];
          }
          const Tensor3 gf = RpnBackward(fm, out, g_obj, g_del, g_dist, pb);
          AddInto(pb.Get("features").grad, gf.data);
        }
        return loss;
      },
      opts);
}

GradCheckReport CheckDetectorHead(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  InitDetectorHead(params, {12, 6, 3}, rng);
  JitterBiases(params, rng);
  Fill(params.Add("input", {2, 12}), -1.0, 1.5, rng);
  const std::array<int, 2> labels = {2, 0};
  const std::array<double, 4> target = Target(rng);
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        const std::vector<double>& in = pb.Get("input").value;
        double loss = 0.0;
        for (int i = 0; i < 2; ++i) {
          const std::span<const double> x(in.data() + 12 * i, 12);
          const DetectorHeadOutput out = DetectorHead(x, pb);
          std::vector<double> gp(out.probs.size(), 0.0);
          std::vector<double> gdel(out.deltas.size(), 0.0);
          loss += CrossEntropy(out.probs, labels[i], gp);
          if (labels[i] > 0) {
            const int c = labels[i] - 1;
            for (int k = 0; k < 4; ++k) {
              const double diff = out.deltas[4 * c + k] - target[k];
              loss += SmoothL1(diff);
              gdel[4 * c + k] = SmoothL1Grad(diff);
            }
          }
          if (with_grad) {
            const std::vector<double> gx = DetectorHeadBackward(x, out, gp, gdel, pb);
            for (int k = 0; k < 12; ++k) pb.Get("input").grad[12 * i + k] += gx[k];
          }
        }
        return loss;
      },
      opts);
}

GradCheckReport CheckRoiPool(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  Fill(params.Add("features", {5, 6, 2}), -1.0, 1.0, rng);
  const std::vector<double> w = Uniform(2 * 2 * 2, -1.0, 1.0, rng);
  const Box2D box{4.0, 3.0, 41.0, 37.0};
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        FeatureMap fm{AsTensor(pb.Get("features")), 8};
        const RoiPoolResult r = RoiPool(fm, box, 2, 2);
        double loss = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) loss += w[i] * r.values.data[i];
        if (with_grad) {
          Tensor3 g(fm.height(), fm.width(), fm.channels());
          RoiPoolBackward(r, w, g);
          AddInto(pb.Get("features").grad, g.data);
        }
        return loss;
      },
      opts);
}

GradCheckReport CheckBackbone(std::mt19937_64& rng, const GradCheckOptions& opts) {
  ParamBlock params;
  BackboneConfig cfg;
  cfg.channels = {4, 4, 4, 3};
  InitBackbone(params, cfg, rng);
  JitterBiases(params, rng);
  Tensor3 image(16, 16, 3);
  image.data = Uniform(image.data.size(), 0.0, 1.0, rng);
  const std::vector<double> w = Uniform(2 * 2 * 3, -1.0, 1.0, rng);
  return GradCheck(
      params,
      [&](ParamBlock& pb, bool with_grad) {
        BackboneCache cache;
        const FeatureMap fm = TinyBackbone(image, pb, cfg, with_grad ? &cache : nullptr);
        double loss = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) loss += w[i] * fm.values.data[i];
        if (with_grad) {
          Tensor3 g(fm.height(), fm.width(), fm.channels());
          g.data = w;
          TinyBackboneBackward(cache, g, pb, cfg);
        }
        return loss;
      },
      opts);
}

}  // namespace

std::vector<NamedGradCheck> RunGradCheckSuite(std::uint64_t seed, const GradCheckOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<NamedGradCheck> out;
  out.push_back({"losses", CheckLosses(rng, options)});
  out.push_back({"rpr_head", CheckRprHead(rng, options)});
  out.push_back({"rpn_heads", CheckRpn(rng, options)});
  out.push_back({"detector_head", CheckDetectorHead(rng, options)});
  out.push_back({"roi_pool", CheckRoiPool(rng, options)});
  out.push_back({"backbone", CheckBackbone(rng, options)});
  return out;
}

}  // namespace rcfuse::neural
