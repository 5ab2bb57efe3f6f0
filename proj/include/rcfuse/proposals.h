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

#ifndef RCFUSE_PROPOSALS_H_
#define RCFUSE_PROPOSALS_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcfuse/geometry.h"
#include "rcfuse/radar.h"

namespace rcfuse {

struct AnchorSize {
  double width = 0.0;
  double length = 0.0;
  double height = 0.0;
};

struct AnchorClass {
  std::string name;
  AnchorSize size;
};

// Class-average 3D prior boxes. The class order defines class indices
// everywhere downstream.
class AnchorTable {
 public:
  AnchorTable() = default;
  // Throws std::invalid_argument on non-positive sizes, duplicate names, an
  // empty class list or an orientation set that is not exactly two angles.
  AnchorTable(std::vector<AnchorClass> classes, std::array<double, 2> orientations);

  // car, truck, person, bus, bicycle, motorcycle with yaws {0, pi/2}.
  static AnchorTable Default();
  // {"classes": {"car": [w, l, h], ...}, "orientations_deg": [0, 90]}
  static AnchorTable FromJson(std::string_view text);
  static AnchorTable Load(const std::string& path);
  std::string ToJson() const;

  const std::vector<AnchorClass>& classes() const { return classes_; }
  const std::array<double, 2>& orientations() const { return orientations_; }
  std::size_t size() const { return classes_.size(); }
  // -1 when unknown.
  int IndexOf(std::string_view name) const;
  std::vector<std::string> Names() const;

 private:
  std::vector<AnchorClass> classes_;
  std::array<double, 2> orientations_{};
};

enum class ProposalSource { kRadar, kImage };

std::string_view SourceName(ProposalSource source);

struct Proposal {
  Box2D box;
  double distance = 0.0;  // meters
  double score = 0.0;
  ProposalSource source = ProposalSource::kImage;
  std::optional<std::string> class_hint;
};

// One 3D anchor seeded at a radar detection, before projection.
struct RadarAnchor {
  Box3D box;
  int class_index = 0;
  int detection_index = 0;
  double distance = 0.0;
};

// 2 * n anchors per detection: every class at both orientations, centered at
// the detection's ground position with the anchor resting on z = 0.
std::vector<RadarAnchor> BuildRadarAnchors(std::span<const RadarDetection> detections,
                                           const AnchorTable& anchors);

// Projects every radar anchor to its enclosing 2D box, dropping anchors that
// do not map to a non-empty box inside the image.
std::vector<Proposal> GenerateRadarProposals(const RadarSweepSet& detections,
                                             const AnchorTable& anchors,
                                             const CameraCalibration& calib);

enum class TargetLabel { kPositive, kNegative, kIgnore };

struct TargetAssignment {
  TargetLabel label = TargetLabel::kIgnore;
  std::optional<int> matched_gt;
  std::optional<std::array<double, 4>> regression_target;
  double max_iou = 0.0;
};

struct AssignmentThresholds {
  double positive_iou = 0.7;
  double negative_iou = 0.3;
  // Faster R-CNN's extra rule: each ground truth also claims its best
  // overlapping box as a positive. Off for radar proposals.
  bool force_best_match = false;
};

std::vector<TargetAssignment> AssignTargets(std::span<const Box2D> proposals,
                                            std::span<const Box2D> gts,
                                            const AssignmentThresholds& thresholds = {});
std::vector<TargetAssignment> AssignTargets(std::span<const Proposal> proposals,
                                            std::span<const Box2D> gts,
                                            const AssignmentThresholds& thresholds = {});

// Corner offsets normalized by the proposal size:
// ((gx1-px1)/pw, (gy1-py1)/ph, (gx2-px2)/pw, (gy2-py2)/ph).
std::array<double, 4> EncodeCornerOffsets(const Box2D& proposal, const Box2D& gt);

// Inverse of EncodeCornerOffsets, clipped to the image. Absent when the
// decoded box is inverted or clipping leaves an area of at most 1 px^2.
std::optional<Box2D> DecodeCornerOffsets(const Box2D& proposal,
                                         std::span<const double, 4> offsets, int image_width,
                                         int image_height);

}  // namespace rcfuse

#endif  // RCFUSE_PROPOSALS_H_
