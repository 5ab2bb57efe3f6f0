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

#ifndef RCFUSE_RADAR_H_
#define RCFUSE_RADAR_H_

#include <limits>
#include <span>
#include <vector>

#include "rcfuse/geometry.h"

namespace rcfuse {

struct RadarDetection {
  Vec3 position = Vec3::Zero();  // z is 0 when the sensor reports no height
  Vec2 velocity = Vec2::Zero();  // ego-motion compensated, m/s
  double rcs = 0.0;              // dBsm
  double timestamp = 0.0;
  int sensor_id = 0;

  bool IsValid() const;
};

struct RadarSweep {
  double time = 0.0;
  std::vector<RadarDetection> detections;
};

// Detections expressed in the vehicle frame at `reference_time`.
struct RadarSweepSet {
  std::vector<RadarDetection> detections;
  double reference_time = 0.0;
};

struct AggregateOptions {
  double max_age = 0.5;  // seconds
  bool motion_compensate = false;
};

// Maps sensor-frame detections into the vehicle frame. `vehicle_from_sensor`
// is the sensor mounting pose; positions are rotated and translated while
// velocities are only rotated. Throws std::invalid_argument for a
// non-orthonormal rotation (tolerance 1e-6).
std::vector<RadarDetection> ToVehicleFrame(std::span<const RadarDetection> detections,
                                           const RigidTransform& vehicle_from_sensor);

// Concatenates sweeps no older than `max_age` relative to `reference_time`,
// optionally advancing each position by velocity * age.
RadarSweepSet AggregateSweeps(std::span<const RadarSweep> sweeps, double reference_time,
                              const AggregateOptions& options = {});

}  // namespace rcfuse

#endif  // RCFUSE_RADAR_H_
