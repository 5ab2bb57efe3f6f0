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

#include "rcfuse/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace rcfuse {

RigidTransform RigidTransform::FromYaw(double yaw, const Vec3& translation) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  t.translation = translation;
  return t;
}

RigidTransform RigidTransform::Inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool RigidTransform::IsRigid(double tolerance) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tolerance) return false;
  return std::abs(rotation.determinant() - 1.0) <= tolerance;
}

Mat3 CameraCalibration::Intrinsic() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraCalibration::Validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("calibration: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("calibration: image size must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("calibration: principal point must be finite");
  }
  if (!camera_from_vehicle.IsRigid(1e-9)) {
    throw std::invalid_argument("calibration: extrinsic rotation is not orthonormal");
  }
}

CameraCalibration CameraCalibration::ForwardFacing(double focal, int width, int height,
                                                   double mount_height) {
  CameraCalibration c;
  c.fx = focal;
  c.fy = focal;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  // Vehicle (x fwd, y left, z up) -> camera (x right, y down, z fwd).
  c.camera_from_vehicle.rotation << 0.0, -1.0, 0.0,  //
      0.0, 0.0, -1.0,                                //
      1.0, 0.0, 0.0;
  c.camera_from_vehicle.translation =
      -(c.camera_from_vehicle.rotation * Vec3(0.0, 0.0, mount_height));
  return c;
}

double NormalizeYaw(double yaw) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(yaw + std::numbers::pi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift back.
  if (r >= std::numbers::pi) r -= kTwoPi;
  return r;
}

Box3D Box3D::Make(const Vec3& center, double width, double length, double height,
                  double yaw) {
  if (!(width > 0.0) || !(length > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("Box3D: sizes must be positive");
  }
  if (!center.allFinite() || !std::isfinite(yaw)) {
    throw std::invalid_argument("Box3D: center and yaw must be finite");
  }
  return Box3D{center, width, length, height, NormalizeYaw(yaw)};
}

std::optional<Vec2> ProjectToImage(const Vec3& point, const CameraCalibration& calib) {
  const Vec3 pc = calib.camera_from_vehicle.Apply(point);
  if (pc.z() <= kEpsilonDepth) return std::nullopt;
  return Vec2(calib.fx * pc.x() / pc.z() + calib.cx, calib.fy * pc.y() / pc.z() + calib.cy);
}

std::array<Vec3, 8> Box3DCorners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const double hh = 0.5 * box.height;
  constexpr std::array<std::array<double, 2>, 4> kFootprint = {
      {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}};
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 4; ++i) {
    const double lx = kFootprint[i][0] * hl;
    const double ly = kFootprint[i][1] * hw;
    const double x = box.center.x() + c * lx - s * ly;
    const double y = box.center.y() + s * lx + c * ly;
    corners[i] = Vec3(x, y, box.center.z() - hh);
    corners[i + 4] = Vec3(x, y, box.center.z() + hh);
  }
  return corners;
}

Box2D ClipToImage(const Box2D& box, int width, int height) {
  const double w = width;
  const double h = height;
  return Box2D{std::clamp(box.x1, 0.0, w), std::clamp(box.y1, 0.0, h),
               std::clamp(box.x2, 0.0, w), std::clamp(box.y2, 0.0, h)};
}

std::optional<Box2D> EnclosingBox2D(const Box3D& box, const CameraCalibration& calib) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Box2D bound{kInf, kInf, -kInf, -kInf};
  for (const Vec3& corner : Box3DCorners(box)) {
    const std::optional<Vec2> px = ProjectToImage(corner, calib);
    if (!px) return std::nullopt;
    bound.x1 = std::min(bound.x1, px->x());
    bound.y1 = std::min(bound.y1, px->y());
    bound.x2 = std::max(bound.x2, px->x());
    bound.y2 = std::max(bound.y2, px->y());
  }
  const Box2D clipped = ClipToImage(bound, calib.width, calib.height);
  if (!clipped.IsValid()) return std::nullopt;
  return clipped;
}

double Iou2D(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.Area() + b.Area() - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

double PlanarDistance(const Vec3& p) { return std::hypot(p.x(), p.y()); }

Vec3 NearestFaceMidpoint(const Box3D& box, const Vec2& viewpoint) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Vec2 heading(c, s);
  const Vec2 lateral(-s, c);
  const Vec2 center = box.center.head<2>();
  const std::array<Vec2, 4> mids = {
      center + 0.5 * box.length * heading, center - 0.5 * box.length * heading,
      center + 0.5 * box.width * lateral, center - 0.5 * box.width * lateral};
  const Vec2* best = &mids[0];
  double best_d = (mids[0] - viewpoint).norm();
  for (int i = 1; i < 4; ++i) {
    const double d = (mids[i] - viewpoint).norm();
    if (d < best_d) {
      best_d = d;
      best = &mids[i];
    }
  }
  return Vec3(best->x(), best->y(), 0.0);
}

}  // namespace rcfuse
