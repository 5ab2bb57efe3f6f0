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

#ifndef RCFUSE_GEOMETRY_H_
#define RCFUSE_GEOMETRY_H_

#include <array>
#include <optional>

#include <Eigen/Core>

namespace rcfuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Camera-frame depths at or below this are treated as behind the camera.
inline constexpr double kEpsilonDepth = 1e-6;

// y = rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform Identity() { return {}; }
  // Rotation about +z by `yaw` radians followed by `translation`.
  static RigidTransform FromYaw(double yaw, const Vec3& translation = Vec3::Zero());

  Vec3 Apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 Rotate(const Vec3& v) const { return rotation * v; }
  RigidTransform Inverse() const;

  // Orthonormal with determinant +1 within `tolerance`.
  bool IsRigid(double tolerance = 1e-9) const;
};

// Pinhole camera with zero skew. `camera_from_vehicle` maps vehicle-frame
// points (x forward, y left, z up) into the camera frame (x right, y down,
// z along the optical axis).
struct CameraCalibration {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  RigidTransform camera_from_vehicle;
  int width = 0;
  int height = 0;

  Mat3 Intrinsic() const;
  // Throws std::invalid_argument naming the violated invariant.
  void Validate() const;

  // Forward-looking camera at vehicle position (0, 0, mount_height).
  static CameraCalibration ForwardFacing(double focal, int width, int height,
                                         double mount_height);
};

// Oriented 3D box in the vehicle frame. `width` spans the lateral axis and
// `length` the heading axis when yaw is zero; yaw is counter-clockwise about
// +z with zero along +x.
struct Box3D {
  Vec3 center = Vec3::Zero();
  double width = 1.0;
  double length = 1.0;
  double height = 1.0;
  double yaw = 0.0;

  // Validates sizes and normalizes yaw to [-pi, pi).
  static Box3D Make(const Vec3& center, double width, double length, double height,
                    double yaw);
};

double NormalizeYaw(double yaw);

// Axis-aligned pixel box with continuous coordinates.
struct Box2D {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double Width() const { return x2 - x1; }
  double Height() const { return y2 - y1; }
  double Area() const { return Width() * Height(); }
  bool IsValid() const { return x1 < x2 && y1 < y2; }

  friend bool operator==(const Box2D&, const Box2D&) = default;
};

std::optional<Vec2> ProjectToImage(const Vec3& point, const CameraCalibration& calib);

// Bottom face counter-clockwise starting at the (+length/2, +width/2) corner,
// then the top face in the same order.
std::array<Vec3, 8> Box3DCorners(const Box3D& box);

// Smallest axis-aligned bound of the projected corners, clipped to the image.
// Absent when any corner is behind the camera or the clipped box is empty.
std::optional<Box2D> EnclosingBox2D(const Box3D& box, const CameraCalibration& calib);

Box2D ClipToImage(const Box2D& box, int width, int height);

double Iou2D(const Box2D& a, const Box2D& b);

// sqrt(x^2 + y^2); height is ignored.
double PlanarDistance(const Vec3& p);

// Midpoint (z = 0) of the vertical face whose midpoint is closest in the
// ground plane to `viewpoint`.
Vec3 NearestFaceMidpoint(const Box3D& box, const Vec2& viewpoint = Vec2::Zero());

}  // namespace rcfuse

#endif  // RCFUSE_GEOMETRY_H_
