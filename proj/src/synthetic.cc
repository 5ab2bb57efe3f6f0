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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rcfuse/dataio.h"

namespace rcfuse {

namespace {

// Nominal radar cross-section per class index, dBsm.
constexpr double kRcs[] = {10.0, 15.0, -5.0, 18.0, -2.0, 2.0};

double BaseRcs(int class_index) {
  return class_index >= 0 && class_index < 6 ? kRcs[class_index] : 0.0;
}

// True when every corner projects inside the image (no clipping needed).
std::optional<Box2D> FullyVisibleBox(const Box3D& box, const CameraCalibration& calib) {
  Box2D bound{1e300, 1e300, -1e300, -1e300};
  for (const Vec3& corner : Box3DCorners(box)) {
    const std::optional<Vec2> px = ProjectToImage(corner, calib);
    if (!px) return std::nullopt;
    bound.x1 = std::min(bound.x1, px->x());
    bound.y1 = std::min(bound.y1, px->y());
    bound.x2 = std::max(bound.x2, px->x());
    bound.y2 = std::max(bound.y2, px->y());
  }
  if (bound.x1 < 0.0 || bound.y1 < 0.0 || bound.x2 > calib.width || bound.y2 > calib.height) {
    return std::nullopt;
  }
  return bound;
}

double FootprintRadius(const Box3D& b) { return 0.5 * std::hypot(b.width, b.length); }

std::uint8_t ToByte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Placed {
  Box3D box;
  Box2D box2d;
  int class_index;
};

}  // namespace

void SyntheticParams::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic params: " + m); };
  if (width <= 0 || height <= 0 || width % 8 != 0 || height % 8 != 0) {
    fail("image size must be positive multiples of 8");
  }
  if (!(focal > 0.0) || !(camera_height > 0.0)) fail("focal and camera height must be positive");
  if (min_objects < 0 || max_objects < min_objects) fail("bad object count range");
  if (!(min_distance > 0.0) || max_distance < min_distance) fail("bad distance range");
  if (!class_weights.empty() && class_weights.size() != classes.size()) {
    fail("class_weights must match classes");
  }
  if (yaw_choices.empty()) fail("need at least one yaw choice");
  if (sigma_pos < 0.0 || sigma_dist < 0.0) fail("noise must be non-negative");
  if (dropout < 0.0 || dropout > 1.0) fail("dropout must lie in [0, 1]");
  if (clutter_rate < 0.0) fail("clutter rate must be non-negative");
  if (max_retries < 1) fail("max_retries must be >= 1");
}

std::array<std::uint8_t, 3> ClassColor(int class_index) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette = {{
      {200, 40, 40},    // car
      {40, 80, 210},    // truck
      {40, 190, 60},    // person
      {235, 205, 40},   // bus
      {185, 60, 205},   // bicycle
      {40, 210, 210},   // motorcycle
  }};
  if (class_index >= 0 && class_index < static_cast<int>(kPalette.size())) {
    return kPalette[class_index];
  }
  return {255, 255, 255};
}

Scene GenerateSyntheticScene(std::uint64_t seed, const SyntheticParams& params,
                             const AnchorTable& anchors) {
  params.Validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.id = "synth_" + std::to_string(seed);
  scene.calibration =
      CameraCalibration::ForwardFacing(params.focal, params.width, params.height,
                                       params.camera_height);
  const CameraCalibration& calib = scene.calibration;

  std::vector<int> class_pool;
  if (params.classes.empty()) {
    class_pool.resize(anchors.size());
    std::iota(class_pool.begin(), class_pool.end(), 0);
  } else {
    for (const std::string& name : params.classes) {
      const int idx = anchors.IndexOf(name);
      if (idx < 0) throw std::invalid_argument("synthetic params: unknown class '" + name + "'");
      class_pool.push_back(idx);
    }
  }
  std::vector<double> weights = params.class_weights;
  if (weights.empty()) weights.assign(class_pool.size(), 1.0);
  std::discrete_distribution<int> pick_class(weights.begin(), weights.end());
  std::uniform_int_distribution<int> pick_count(params.min_objects, params.max_objects);
  std::uniform_int_distribution<std::size_t> pick_yaw(0, params.yaw_choices.size() - 1);
  const double half_fov = std::atan(0.5 * params.width / params.focal);

  const int requested = pick_count(rng);
  std::vector<Placed> placed;
  for (int n = 0; n < requested; ++n) {
    for (int attempt = 0; attempt < params.max_retries; ++attempt) {
      const int cls = class_pool[pick_class(rng)];
      const AnchorSize& s = anchors.classes()[cls].size;
      const double yaw = params.yaw_choices[pick_yaw(rng)];
      const double d = params.min_distance + (params.max_distance - params.min_distance) * unit(rng);
      const double bearing = (2.0 * unit(rng) - 1.0) * half_fov;
      const Box3D box = Box3D::Make(Vec3(d * std::cos(bearing), d * std::sin(bearing), 0.5 * s.height),
                                    s.width, s.length, s.height, yaw);
      const std::optional<Box2D> b2 = FullyVisibleBox(box, calib);
      if (!b2) continue;
      bool ok = true;
      for (const Placed& p : placed) {
        const double gap = (box.center.head<2>() - p.box.center.head<2>()).norm();
        if (gap < FootprintRadius(box) + FootprintRadius(p.box) + 0.5) {
          ok = false;
          break;
        }
        const double iw = std::min(b2->x2, p.box2d.x2) - std::max(b2->x1, p.box2d.x1);
        const double ih = std::min(b2->y2, p.box2d.y2) - std::max(b2->y1, p.box2d.y1);
        if (iw > 0.0 && ih > 0.0 &&
            iw * ih > params.max_overlap * std::min(b2->Area(), p.box2d.Area())) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      placed.push_back({box, *b2, cls});
      break;
    }
  }
  scene.metadata = SceneMetadata{requested, static_cast<int>(placed.size())};

  // Background: sky above the horizon, textured road below.
  Image& img = scene.image;
  img = Image(params.width, params.height);
  std::normal_distribution<double> pixel_noise(0.0, 1.0);
  const double horizon = calib.cy;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::uint8_t* p = img.px(x, y);
      const double n = params.pixel_noise * pixel_noise(rng);
      if (y < horizon) {
        const double t = y / horizon;
        p[0] = ToByte(135 + 20 * t + n);
        p[1] = ToByte(150 + 15 * t + n);
        p[2] = ToByte(170 + 5 * t + n);
      } else {
        const double stripe = ((x / 16 + y / 8) % 2) ? 6.0 : -6.0;
        p[0] = ToByte(95 + stripe + n);
        p[1] = ToByte(95 + stripe + n);
        p[2] = ToByte(100 + stripe + n);
      }
    }
  }
  std::vector<std::size_t> order(placed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return PlanarDistance(placed[a].box.center) > PlanarDistance(placed[b].box.center);
  });
  for (std::size_t i : order) {
    const Box2D& b = placed[i].box2d;
    const std::array<std::uint8_t, 3> color = ClassColor(placed[i].class_index);
    const int x0 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, img.width - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(b.x2)) - 1, 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, img.height - 1);
    const int y1 = std::clamp(static_cast<int>(std::ceil(b.y2)) - 1, 0, img.height - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        std::uint8_t* p = img.px(x, y);
        const double n = 0.5 * params.pixel_noise * pixel_noise(rng);
        for (int c = 0; c < 3; ++c) p[c] = ToByte(color[c] + n);
      }
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  RadarSweep sweep;
  sweep.time = 0.0;
  for (const Placed& p : placed) {
    Annotation ann;
    ann.class_name = anchors.classes()[p.class_index].name;
    ann.box = p.box;
    const double speed = p.class_index == 2 ? 1.2 * unit(rng) : 8.0 * unit(rng);
    ann.velocity = Vec2(speed * std::cos(p.box.yaw), speed * std::sin(p.box.yaw));
    scene.annotations.push_back(ann);

    if (unit(rng) < params.dropout) continue;
    Vec3 pos = NearestFaceMidpoint(p.box);
    if (params.sigma_pos > 0.0) {
      pos.x() += params.sigma_pos * gauss(rng);
      pos.y() += params.sigma_pos * gauss(rng);
    }
    if (params.sigma_dist > 0.0) {
      const Vec2 dir = pos.head<2>().normalized();
      const double dr = params.sigma_dist * gauss(rng);
      pos.x() += dr * dir.x();
      pos.y() += dr * dir.y();
    }
    RadarDetection det;
    det.position = pos;
    det.velocity = *ann.velocity;
    det.rcs = BaseRcs(p.class_index) + 2.0 * gauss(rng);
    det.timestamp = sweep.time;
    if (det.IsValid()) sweep.detections.push_back(det);
  }
  if (params.clutter_rate > 0.0) {
    std::poisson_distribution<int> clutter(params.clutter_rate);
    const int n = clutter(rng);
    for (int i = 0; i < n; ++i) {
      const double d = params.min_distance + (params.max_distance - params.min_distance) * unit(rng);
      const double bearing = (2.0 * unit(rng) - 1.0) * half_fov;
      RadarDetection det;
      det.position = Vec3(d * std::cos(bearing), d * std::sin(bearing), 0.0);
      det.rcs = -10.0 + 3.0 * gauss(rng);
      det.timestamp = sweep.time;
      sweep.detections.push_back(det);
    }
  }
  scene.radar_sweeps.push_back(std::move(sweep));
  return scene;
}

}  // namespace rcfuse
