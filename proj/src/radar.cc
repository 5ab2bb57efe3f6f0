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

#include "rcfuse/radar.h"

#include <cmath>
#include <stdexcept>

namespace rcfuse {

bool RadarDetection::IsValid() const {
  return position.allFinite() && PlanarDistance(position) > 0.0 && std::isfinite(timestamp);
}

std::vector<RadarDetection> ToVehicleFrame(std::span<const RadarDetection> detections,
                                           const RigidTransform& vehicle_from_sensor) {
  if (!vehicle_from_sensor.IsRigid(1e-6)) {
    throw std::invalid_argument("radar: sensor transform is not a rigid motion");
  }
  std::vector<RadarDetection> out;
  out.reserve(detections.size());
  for (const RadarDetection& d : detections) {
    RadarDetection v = d;
    v.position = vehicle_from_sensor.Apply(d.position);
    const Vec3 vel = vehicle_from_sensor.Rotate(Vec3(d.velocity.x(), d.velocity.y(), 0.0));
    v.velocity = vel.head<2>();
    out.push_back(v);
  }
  return out;
}

RadarSweepSet AggregateSweeps(std::span<const RadarSweep> sweeps, double reference_time,
                              const AggregateOptions& options) {
  RadarSweepSet set;
  set.reference_time = reference_time;
  for (const RadarSweep& sweep : sweeps) {
    const double age = reference_time - sweep.time;
    if (age > options.max_age) continue;
    for (const RadarDetection& d : sweep.detections) {
      RadarDetection a = d;
      if (options.motion_compensate && age != 0.0) {
        a.position.x() += d.velocity.x() * age;
        a.position.y() += d.velocity.y() * age;
      }
      set.detections.push_back(a);
    }
  }
  return set;
}

}  // namespace rcfuse
