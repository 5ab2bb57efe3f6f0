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

#include "rcfuse/proposals.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rcfuse {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

AnchorTable::AnchorTable(std::vector<AnchorClass> classes, std::array<double, 2> orientations)
    : classes_(std::move(classes)), orientations_(orientations) {
  if (classes_.empty()) throw std::invalid_argument("anchor table: no classes");
  std::set<std::string> seen;
  for (const AnchorClass& c : classes_) {
    if (!(c.size.width > 0.0) || !(c.size.length > 0.0) || !(c.size.height > 0.0)) {
      throw std::invalid_argument("anchor table: class '" + c.name + "' has a non-positive size");
    }
    if (!seen.insert(c.name).second) {
      throw std::invalid_argument("anchor table: duplicate class '" + c.name + "'");
    }
  }
  if (!std::isfinite(orientations_[0]) || !std::isfinite(orientations_[1]) ||
      orientations_[0] == orientations_[1]) {
    throw std::invalid_argument("anchor table: need two distinct orientations");
  }
}

AnchorTable AnchorTable::Default() {
  return AnchorTable({{"car", {1.9, 4.6, 1.7}},
                      {"truck", {2.5, 7.0, 2.8}},
                      {"person", {0.65, 0.7, 1.75}},
                      {"bus", {2.9, 11.0, 3.4}},
                      {"bicycle", {0.6, 1.7, 1.3}},
                      {"motorcycle", {0.75, 2.1, 1.45}}},
                     {0.0, std::numbers::pi / 2.0});
}

AnchorTable AnchorTable::FromJson(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("anchor table: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_object()) {
    throw std::invalid_argument("anchor table: missing object /classes");
  }
  std::vector<AnchorClass> classes;
  for (const auto& [name, dims] : doc["classes"].items()) {
    if (!dims.is_array() || dims.size() != 3 || !dims[0].is_number() ||
        !dims[1].is_number() || !dims[2].is_number()) {
      throw std::invalid_argument("anchor table: /classes/" + name + " must be [w, l, h]");
    }
    classes.push_back({name, {dims[0].get<double>(), dims[1].get<double>(),
                              dims[2].get<double>()}});
  }
  std::array<double, 2> orientations{0.0, std::numbers::pi / 2.0};
  if (doc.contains("orientations_deg")) {
    const auto& o = doc["orientations_deg"];
    if (!o.is_array() || o.size() != 2 || !o[0].is_number() || !o[1].is_number()) {
      throw std::invalid_argument("anchor table: /orientations_deg must hold two angles");
    }
    for (int i = 0; i < 2; ++i) {
      const double deg = o[i].get<double>();
      orientations[i] = deg == 90.0 ? std::numbers::pi / 2.0 : deg * kDegToRad;
    }
  }
  return AnchorTable(std::move(classes), orientations);
}

AnchorTable AnchorTable::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open anchor table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return FromJson(ss.str());
}

std::string AnchorTable::ToJson() const {
  nlohmann::ordered_json doc;
  doc["classes"] = nlohmann::ordered_json::object();
  for (const AnchorClass& c : classes_) {
    doc["classes"][c.name] = {c.size.width, c.size.length, c.size.height};
  }
  doc["orientations_deg"] = {orientations_[0] / kDegToRad, orientations_[1] / kDegToRad};
  return doc.dump(2);
}

int AnchorTable::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> AnchorTable::Names() const {
  std::vector<std::string> names;
  for (const AnchorClass& c : classes_) names.push_back(c.name);
  return names;
}

std::string_view SourceName(ProposalSource source) {
  return source == ProposalSource::kRadar ? "radar" : "image";
}

std::vector<RadarAnchor> BuildRadarAnchors(std::span<const RadarDetection> detections,
                                           const AnchorTable& anchors) {
  std::vector<RadarAnchor> out;
  out.reserve(detections.size() * anchors.size() * 2);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    const RadarDetection& det = detections[d];
    const double distance = PlanarDistance(det.position);
    for (std::size_t c = 0; c < anchors.size(); ++c) {
      const AnchorSize& s = anchors.classes()[c].size;
      for (double yaw : anchors.orientations()) {
        RadarAnchor a;
        a.box = Box3D::Make(Vec3(det.position.x(), det.position.y(), 0.5 * s.height),
                            s.width, s.length, s.height, yaw);
        a.class_index = static_cast<int>(c);
        a.detection_index = static_cast<int>(d);
        a.distance = distance;
        out.push_back(a);
      }
    }
  }
  return out;
}

std::vector<Proposal> GenerateRadarProposals(const RadarSweepSet& detections,
                                             const AnchorTable& anchors,
                                             const CameraCalibration& calib) {
  std::vector<Proposal> out;
  for (const RadarAnchor& a : BuildRadarAnchors(detections.detections, anchors)) {
    const std::optional<Box2D> box = EnclosingBox2D(a.box, calib);
    if (!box) continue;
    Proposal p;
    p.box = *box;
    p.distance = a.distance;
    p.score = 1.0;
    p.source = ProposalSource::kRadar;
    p.class_hint = anchors.classes()[a.class_index].name;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<TargetAssignment> AssignTargets(std::span<const Box2D> proposals,
                                            std::span<const Box2D> gts,
                                            const AssignmentThresholds& thresholds) {
  std::vector<TargetAssignment> out(proposals.size());
  std::vector<double> gt_best(gts.size(), 0.0);
  std::vector<std::vector<double>> ious(proposals.size(), std::vector<double>(gts.size()));
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      ious[i][g] = Iou2D(proposals[i], gts[g]);
      gt_best[g] = std::max(gt_best[g], ious[i][g]);
    }
  }
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    TargetAssignment& t = out[i];
    int best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (best < 0 || ious[i][g] > t.max_iou) {
        best = static_cast<int>(g);
        t.max_iou = ious[i][g];
      }
    }
    bool positive = best >= 0 && t.max_iou >= thresholds.positive_iou;
    if (!positive && thresholds.force_best_match && best >= 0 && t.max_iou > 0.0) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (ious[i][g] > 0.0 && ious[i][g] == gt_best[g]) {
          positive = true;
          best = static_cast<int>(g);
          break;
        }
      }
    }
    if (positive) {
      t.label = TargetLabel::kPositive;
      t.matched_gt = best;
      t.regression_target = EncodeCornerOffsets(proposals[i], gts[best]);
    } else if (t.max_iou < thresholds.negative_iou) {
      t.label = TargetLabel::kNegative;
    } else {
      t.label = TargetLabel::kIgnore;
    }
  }
  return out;
}

std::vector<TargetAssignment> AssignTargets(std::span<const Proposal> proposals,
                                            std::span<const Box2D> gts,
                                            const AssignmentThresholds& thresholds) {
  std::vector<Box2D> boxes;
  boxes.reserve(proposals.size());
  for (const Proposal& p : proposals) boxes.push_back(p.box);
  return AssignTargets(boxes, gts, thresholds);
}

std::array<double, 4> EncodeCornerOffsets(const Box2D& proposal, const Box2D& gt) {
  const double pw = proposal.Width();
  const double ph = proposal.Height();
  return {(gt.x1 - proposal.x1) / pw, (gt.y1 - proposal.y1) / ph, (gt.x2 - proposal.x2) / pw,
          (gt.y2 - proposal.y2) / ph};
}

std::optional<Box2D> DecodeCornerOffsets(const Box2D& proposal,
                                         std::span<const double, 4> offsets, int image_width,
                                         int image_height) {
  const double pw = proposal.Width();
  const double ph = proposal.Height();
  const Box2D raw{proposal.x1 + offsets[0] * pw, proposal.y1 + offsets[1] * ph,
                  proposal.x2 + offsets[2] * pw, proposal.y2 + offsets[3] * ph};
  if (!raw.IsValid() || !std::isfinite(raw.Area())) return std::nullopt;
  const Box2D clipped = ClipToImage(raw, image_width, image_height);
  if (!clipped.IsValid() || clipped.Area() <= 1.0) return std::nullopt;
  return clipped;
}

}  // namespace rcfuse
