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
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.h"
#include "rcfuse/evalkit.h"

namespace rcfuse::eval {
namespace {

Detection D(Box2D b, double score, std::string cls = "car", double dist = 10.0) {
  return {b, std::move(cls), score, dist, ProposalSource::kImage};
}

GroundTruth2D G(Box2D b, std::string cls = "car", double dist = 10.0) {
  return {b, std::move(cls), dist};
}

// Reference greedy matcher: for each detection in order, the free same-class
// ground truth with the largest IoU at or above the threshold, earliest on ties.
std::vector<int> ReferenceMatch(const std::vector<Detection>& dets,
                                const std::vector<GroundTruth2D>& gts, double thr) {
  std::vector<int> out;
  std::vector<bool> used(gts.size(), false);
  for (const Detection& d : dets) {
    int pick = -1;
    double pick_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].class_name != d.class_name) continue;
      const double v = oracle::ExactIou({d.box.x1, d.box.y1, d.box.x2, d.box.y2},
                                        {gts[g].box.x1, gts[g].box.y1, gts[g].box.x2, gts[g].box.y2});
      if (v >= thr && v > pick_iou) {
        pick = static_cast<int>(g);
        pick_iou = v;
      }
    }
    if (pick >= 0) used[pick] = true;
    out.push_back(pick);
  }
  return out;
}

TEST_CASE("matching") {
  const std::vector<GroundTruth2D> gts = {G({0, 0, 10, 10})};
  const std::vector<Detection> one = {D({0, 0, 10, 10}, 0.9)};
  CHECK(MatchDetections(one, gts, 0.5).true_positive == std::vector<bool>{true});
  const std::vector<Detection> two = {D({0, 0, 10, 10}, 0.9), D({0, 0, 10, 9}, 0.8)};
  const MatchResult m = MatchDetections(two, gts, 0.5);
  CHECK(m.true_positive == std::vector<bool>{true, false});
  CHECK(m.matched_gt == std::vector<int>{0, -1});
  const std::vector<Detection> wrong_class = {D({0, 0, 10, 10}, 0.9, "bus")};
  CHECK(MatchDetections(wrong_class, gts, 0.5).true_positive == std::vector<bool>{false});
}

TEST_CASE("crafted matching agrees with the reference matcher") {
  const std::vector<GroundTruth2D> gts = {G({0, 0, 10, 10}), G({6, 0, 16, 10})};
  const std::vector<Detection> dets = {D({3, 0, 13, 10}, 0.9), D({0, 0, 10, 10}, 0.8),
                                       D({6, 0, 16, 10}, 0.7)};
  const MatchResult m = MatchDetections(dets, gts, 0.5);
  CHECK(m.matched_gt == ReferenceMatch(dets, gts, 0.5));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 20), size(4, 12);
  std::uniform_int_distribution<int> cls(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Detection> d;
    std::vector<GroundTruth2D> g;
    for (int i = 0; i < 5; ++i) {
      const double x = pos(rng), y = pos(rng);
      d.push_back(D({x, y, x + size(rng), y + size(rng)}, 1.0 - i * 0.1, cls(rng) ? "car" : "bus"));
    }
    for (int i = 0; i < 3; ++i) {
      const double x = pos(rng), y = pos(rng);
      g.push_back(G({x, y, x + size(rng), y + size(rng)}, cls(rng) ? "car" : "bus"));
    }
    CHECK(MatchDetections(d, g, 0.3).matched_gt == ReferenceMatch(d, g, 0.3));
  }
}

TEST_CASE("average precision examples") {
  CHECK(*AveragePrecision({true}, 1) == doctest::Approx(1.0));
  CHECK(*AveragePrecision({}, 3) == 0.0);
  CHECK_FALSE(AveragePrecision({false}, 0));
  const std::vector<bool> flags = {true, false, true};
  const double ap = *AveragePrecision(flags, 2);
  CHECK(ap == doctest::Approx((51.0 + 50.0 * 2.0 / 3.0) / 101.0));
  CHECK(std::abs(ap - oracle::TrapezoidEnvelopeAp(flags, 2)) < 0.01);
}

TEST_CASE("average precision agrees with the definition") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(0, 5), gt(1, 6);
  std::bernoulli_distribution hit(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<bool> flags(len(rng));
    std::size_t tp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      flags[i] = hit(rng);
      tp += flags[i];
    }
    const std::size_t num_gt = std::max<std::size_t>(tp, gt(rng));
    const double got = *AveragePrecision(flags, num_gt);
    CHECK(got == doctest::Approx(oracle::BruteForceAp(flags, num_gt)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("perfect ranking of every ground truth gives AP 1") {
  for (std::size_t n = 1; n < 10; ++n) {
    CHECK(*AveragePrecision(std::vector<bool>(n, true), n) == doctest::Approx(1.0));
  }
}

TEST_CASE("weighted AP") {
  const std::vector<double> aps = {1.0, 0.0};
  const std::vector<std::size_t> counts = {3, 1};
  CHECK(*WeightedAp(aps, counts) == doctest::Approx(0.75));
  const std::vector<std::size_t> equal = {2, 2};
  CHECK(*WeightedAp(aps, equal) == doctest::Approx(0.5));
  const std::vector<double> single = {0.4};
  const std::vector<std::size_t> one = {7};
  CHECK(*WeightedAp(single, one) == doctest::Approx(0.4));
}

TEST_CASE("distance MAE") {
  std::vector<SceneResult> exact = {{{D({0, 0, 10, 10}, 0.9, "car", 12.0)}, {G({0, 0, 10, 10}, "car", 12.0)}}};
  CHECK(*DistanceMae(exact).overall == 0.0);
  std::vector<SceneResult> off = {{{D({0, 0, 10, 10}, 0.9, "car", 10.0)}, {G({0, 0, 10, 10}, "car", 12.5)}}};
  const MaeResult m = DistanceMae(off);
  CHECK(*m.overall == doctest::Approx(2.5));
  CHECK(m.per_class.at("car") == doctest::Approx(2.5));
  CHECK(m.pairs == 1);
  std::vector<SceneResult> none = {{{D({50, 50, 60, 60}, 0.9)}, {G({0, 0, 10, 10})}}};
  CHECK_FALSE(DistanceMae(none).overall);
}

TEST_CASE("MAE does not depend on detection order at fixed matching") {
  std::vector<Detection> dets;
  std::vector<GroundTruth2D> gts;
  for (int i = 0; i < 6; ++i) {
    const double x = 20.0 * i;
    gts.push_back(G({x, 0, x + 10, 10}, i % 2 ? "car" : "bus", 10.0 + i));
    dets.push_back(D({x, 0, x + 10, 9}, 0.5 + 0.05 * i, i % 2 ? "car" : "bus", 9.0 + 1.7 * i));
  }
  std::vector<SceneResult> a = {{dets, gts}};
  const double base = *DistanceMae(a).overall;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(dets.begin(), dets.end(), rng);
    std::vector<SceneResult> b = {{dets, gts}};
    CHECK(*DistanceMae(b).overall == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("evaluating ground truth as detections is perfect") {
  std::vector<SceneResult> scenes;
  for (int s = 0; s < 3; ++s) {
    SceneResult r;
    r.gts = {G({0, 0, 20, 20}, "car", 11.0), G({40, 0, 60, 30}, "bus", 25.0 + s)};
    for (const GroundTruth2D& g : r.gts) r.detections.push_back(D(g.box, 1.0, g.class_name, g.distance));
    scenes.push_back(r);
  }
  const EvalReport rep = Evaluate(scenes, EvalConfig::Default({"car", "truck", "bus"}));
  CHECK(rep.classes.size() == 2);
  CHECK(rep.ap == doctest::Approx(1.0));
  CHECK(rep.ap50 == doctest::Approx(1.0));
  CHECK(rep.ap75 == doctest::Approx(1.0));
  CHECK(rep.ar == doctest::Approx(1.0));
  CHECK(*rep.weighted_ap == doctest::Approx(1.0));
  CHECK(*rep.mae == 0.0);
  const auto j = nlohmann::json::parse(ReportToJson(rep));
  CHECK(j["ap"].get<double>() == doctest::Approx(100.0));
  CHECK(j["mae_m"].get<double>() == 0.0);
  CHECK(ReportToTable(rep).find("AP50") != std::string::npos);
}

TEST_CASE("report metrics are bounded") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> pos(0, 100), size(5, 40), score(0, 1), dist(1, 50);
  std::vector<SceneResult> scenes;
  for (int s = 0; s < 10; ++s) {
    SceneResult r;
    for (int i = 0; i < 4; ++i) {
      const double x = pos(rng), y = pos(rng);
      r.gts.push_back(G({x, y, x + size(rng), y + size(rng)}, i % 2 ? "car" : "bus", dist(rng)));
    }
    for (int i = 0; i < 8; ++i) {
      const double x = pos(rng), y = pos(rng);
      r.detections.push_back(D({x, y, x + size(rng), y + size(rng)}, score(rng), i % 2 ? "car" : "bus", dist(rng)));
    }
    scenes.push_back(r);
  }
  const EvalReport rep = Evaluate(scenes, EvalConfig::Default({"car", "bus"}));
  for (double v : {rep.ap, rep.ap50, rep.ap75, rep.ar, *rep.weighted_ap}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(rep.ap50 >= rep.ap75);
  if (rep.mae) CHECK(*rep.mae >= 0.0);
}

TEST_CASE("default IoU thresholds") {
  const EvalConfig c = EvalConfig::Default({"car"});
  REQUIRE(c.iou_thresholds.size() == 10);
  CHECK(c.iou_thresholds.front() == 0.5);
  CHECK(c.iou_thresholds.back() == 0.95);
  CHECK(c.iou_thresholds[1] == 0.55);
}

}  // namespace
}  // namespace rcfuse::eval
