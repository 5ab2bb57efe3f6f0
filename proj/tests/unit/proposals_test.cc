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

#include <cmath>
#include <random>

#include "doctest.h"
#include "rcfuse/proposals.h"

namespace rcfuse {
namespace {

RadarSweepSet Returns(std::vector<Vec3> points) {
  RadarSweepSet s;
  for (const Vec3& p : points) {
    RadarDetection d;
    d.position = p;
    s.detections.push_back(d);
  }
  return s;
}

CameraCalibration Camera() { return CameraCalibration::ForwardFacing(256, 256, 128, 1.5); }

AnchorTable TwoClasses() {
  return AnchorTable({{"car", {1.9, 4.6, 1.7}}, {"person", {0.65, 0.7, 1.75}}}, {0.0, M_PI / 2});
}

TEST_CASE("default anchor table") {
  const AnchorTable t = AnchorTable::Default();
  CHECK(t.size() == 6);
  CHECK(t.Names() == std::vector<std::string>{"car", "truck", "person", "bus", "bicycle", "motorcycle"});
  CHECK(t.IndexOf("bus") == 3);
  CHECK(t.IndexOf("tram") == -1);
  CHECK(t.orientations()[0] == 0.0);
  CHECK(t.orientations()[1] == M_PI / 2);
}

TEST_CASE("anchor table json round trip and validation") {
  const AnchorTable t = AnchorTable::Default();
  const AnchorTable back = AnchorTable::FromJson(t.ToJson());
  CHECK(back.Names() == t.Names());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.classes()[i].size.width == t.classes()[i].size.width);
    CHECK(back.classes()[i].size.length == t.classes()[i].size.length);
    CHECK(back.classes()[i].size.height == t.classes()[i].size.height);
  }
  CHECK(back.orientations() == t.orientations());
  CHECK_THROWS_AS(AnchorTable({{"car", {0.0, 4.6, 1.7}}}, {0.0, M_PI / 2}), std::invalid_argument);
  CHECK_THROWS_AS(AnchorTable({{"car", {1, 1, 1}}, {"car", {1, 1, 1}}}, {0.0, M_PI / 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(AnchorTable({}, {0.0, M_PI / 2}), std::invalid_argument);
  CHECK_THROWS(AnchorTable::FromJson(R"({"classes": {"car": [1, 2]}, "orientations_deg": [0, 90]})"));
  CHECK_THROWS(AnchorTable::FromJson(R"({"classes": {"car": [1, 2, 3]}, "orientations_deg": [0]})"));
}

TEST_CASE("one detection yields 2n proposals when everything is visible") {
  const AnchorTable t = AnchorTable::Default();
  const auto props = GenerateRadarProposals(Returns({{30, 0, 0}}), t, Camera());
  CHECK(props.size() == 12);
  for (const Proposal& p : props) {
    CHECK(p.source == ProposalSource::kRadar);
    CHECK(p.distance == doctest::Approx(30));
    REQUIRE(p.class_hint);
    CHECK(t.IndexOf(*p.class_hint) >= 0);
  }
  CHECK(GenerateRadarProposals(Returns({}), t, Camera()).empty());
  CHECK(GenerateRadarProposals(Returns({{20, 0, 0}, {25, 3, 0}, {28, -3, 0}}), TwoClasses(), Camera())
            .size() == 12);
}

TEST_CASE("anchors outside the image are dropped") {
  const AnchorTable t = AnchorTable::Default();
  CHECK(BuildRadarAnchors(Returns({{-10, 0, 0}}).detections, t).size() == 12);
  CHECK(GenerateRadarProposals(Returns({{-10, 0, 0}}), t, Camera()).empty());
  const auto partial = GenerateRadarProposals(Returns({{4, 2.5, 0}}), t, Camera());
  CHECK(partial.size() <= 12);
}

TEST_CASE("anchors rest on the ground at the detection") {
  const auto anchors = BuildRadarAnchors(Returns({{12, -2, 0.7}}).detections, TwoClasses());
  REQUIRE(anchors.size() == 4);
  for (const RadarAnchor& a : anchors) {
    CHECK(a.box.center.x() == 12);
    CHECK(a.box.center.y() == -2);
    CHECK(a.box.center.z() == doctest::Approx(a.box.height / 2));
    CHECK(a.distance == doctest::Approx(std::hypot(12.0, 2.0)));
  }
  CHECK(anchors[0].box.yaw == 0.0);
  CHECK(anchors[1].box.yaw == doctest::Approx(M_PI / 2));
}

TEST_CASE("target assignment") {
  const std::vector<Box2D> gts = {{0, 0, 10, 10}};
  const std::vector<Box2D> props = {{0, 0, 10, 10}, {50, 50, 60, 60}, {0, 0, 10, 5}};
  const auto a = AssignTargets(props, gts);
  CHECK(a[0].label == TargetLabel::kPositive);
  CHECK(a[0].max_iou == 1.0);
  CHECK(*a[0].matched_gt == 0);
  CHECK(*a[0].regression_target == std::array<double, 4>{0, 0, 0, 0});
  CHECK(a[1].label == TargetLabel::kNegative);
  CHECK(a[2].label == TargetLabel::kIgnore);
  CHECK(a[2].max_iou == doctest::Approx(0.5));
}

TEST_CASE("assignment threshold fixtures") {
  const std::vector<Box2D> gts = {{0, 0, 100, 100}};
  const std::vector<Box2D> props = {{0, 0, 100, 29}, {0, 0, 100, 31}, {0, 0, 100, 69}, {0, 0, 100, 71}};
  const auto a = AssignTargets(props, gts);
  CHECK(a[0].label == TargetLabel::kNegative);
  CHECK(a[1].label == TargetLabel::kIgnore);
  CHECK(a[2].label == TargetLabel::kIgnore);
  CHECK(a[3].label == TargetLabel::kPositive);
}

TEST_CASE("without ground truth everything is negative") {
  const std::vector<Box2D> props = {{0, 0, 10, 10}};
  const auto a = AssignTargets(props, std::vector<Box2D>{});
  CHECK(a[0].label == TargetLabel::kNegative);
  CHECK_FALSE(a[0].matched_gt);
}

TEST_CASE("best match rule") {
  const std::vector<Box2D> gts = {{0, 0, 100, 100}};
  const std::vector<Box2D> props = {{0, 0, 100, 50}, {0, 0, 100, 40}};
  const auto strict = AssignTargets(props, gts);
  CHECK(strict[0].label == TargetLabel::kIgnore);
  const auto forced = AssignTargets(props, gts, {0.7, 0.3, true});
  CHECK(forced[0].label == TargetLabel::kPositive);
  CHECK(forced[1].label == TargetLabel::kIgnore);
}

TEST_CASE("assignment labels partition by max IoU") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0, 100), size(5, 60);
  std::vector<Box2D> gts, props;
  for (int i = 0; i < 5; ++i) {
    const double x = pos(rng), y = pos(rng);
    gts.push_back({x, y, x + size(rng), y + size(rng)});
  }
  for (int i = 0; i < 300; ++i) {
    const double x = pos(rng), y = pos(rng);
    props.push_back({x, y, x + size(rng), y + size(rng)});
  }
  for (const TargetAssignment& t : AssignTargets(props, gts)) {
    if (t.max_iou >= 0.7) CHECK(t.label == TargetLabel::kPositive);
    if (t.max_iou < 0.3) CHECK(t.label == TargetLabel::kNegative);
    if (t.max_iou >= 0.3 && t.max_iou < 0.7) CHECK(t.label == TargetLabel::kIgnore);
    CHECK(t.regression_target.has_value() == (t.label == TargetLabel::kPositive));
  }
}

TEST_CASE("corner offsets") {
  const Box2D p{0, 0, 10, 10};
  CHECK(EncodeCornerOffsets(p, p) == std::array<double, 4>{0, 0, 0, 0});
  CHECK(EncodeCornerOffsets(p, {10, 0, 20, 10}) == std::array<double, 4>{1, 0, 1, 0});
  const auto t = EncodeCornerOffsets(p, {2, 1, 12, 8});
  CHECK(t[0] == doctest::Approx(0.2));
  CHECK(t[1] == doctest::Approx(0.1));
  CHECK(t[2] == doctest::Approx(0.2));
  CHECK(t[3] == doctest::Approx(-0.2));
  const std::array<double, 4> zero{};
  CHECK(*DecodeCornerOffsets(p, zero, 100, 100) == p);
  const std::array<double, 4> push{0, 0, 1.5, 0};
  const auto clipped = DecodeCornerOffsets({80, 10, 95, 20}, push, 100, 100);
  REQUIRE(clipped);
  CHECK(clipped->x2 == 100);
  const std::array<double, 4> invert{0, 0, -2, 0};
  CHECK_FALSE(DecodeCornerOffsets(p, invert, 100, 100));
}

TEST_CASE("corner offsets round trip for in-image boxes") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0, 150), size(2, 100);
  for (int i = 0; i < 200; ++i) {
    const double px = pos(rng), py = pos(rng), gx = pos(rng), gy = pos(rng);
    const Box2D p{px, py, px + size(rng), py + size(rng)};
    const Box2D g{gx, gy, gx + size(rng), gy + size(rng)};
    const auto t = EncodeCornerOffsets(p, g);
    const auto back = DecodeCornerOffsets(p, t, 256, 256);
    REQUIRE(back);
    CHECK(back->x1 == doctest::Approx(g.x1));
    CHECK(back->y1 == doctest::Approx(g.y1));
    CHECK(back->x2 == doctest::Approx(g.x2));
    CHECK(back->y2 == doctest::Approx(g.y2));
  }
}

}  // namespace
}  // namespace rcfuse
