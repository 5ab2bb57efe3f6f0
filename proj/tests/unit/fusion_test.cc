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
#include "oracles.h"
#include "rcfuse/fusion.h"

namespace rcfuse {
namespace {

Proposal P(Box2D box, double score, double distance, ProposalSource src = ProposalSource::kImage) {
  return {box, distance, score, src, std::nullopt};
}

Proposal Radar(Box2D box, double distance, double score = 1.0) {
  return P(box, score, distance, ProposalSource::kRadar);
}

TEST_CASE("image proposals inherit the best-matching radar distance") {
  const std::vector<Proposal> radar = {Radar({0, 0, 10, 10}, 12.5)};
  const std::vector<Proposal> image = {P({0, 0, 10, 9}, 0.8, 30.0), P({50, 50, 60, 60}, 0.7, 40.0)};
  const RefinedProposals r = RefineDistances(radar, image, 0.5);
  CHECK(r.image[0].distance == 12.5);
  CHECK(r.image[1].distance == 40.0);
  CHECK(r.iou.at(0, 0) == doctest::Approx(0.9));
  CHECK(r.image[0].box == image[0].box);
  CHECK(r.image[0].score == image[0].score);
}

TEST_CASE("higher IoU wins, equal IoU goes to the closer radar") {
  const std::vector<Proposal> image = {P({0, 0, 10, 10}, 0.9, 50.0)};
  const std::vector<Proposal> radar = {Radar({0, 0, 10, 8}, 20.0), Radar({0, 0, 10, 9}, 25.0)};
  CHECK(RefineDistances(radar, image, 0.5).image[0].distance == 25.0);
  const std::vector<Proposal> tie = {Radar({0, 0, 10, 8}, 20.0), Radar({0, 2, 10, 10}, 18.0),
                                     Radar({0, 0, 10, 8}, 19.0)};
  CHECK(RefineDistances(tie, image, 0.5).image[0].distance == 18.0);
}

TEST_CASE("refinement matches a brute-force argmax") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(0, 30), size(5, 25), dist(5, 60);
  std::uniform_int_distribution<int> coarse(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Proposal> radar, image;
    for (int i = 0; i < 4; ++i) {
      // Coarse grid positions create exact IoU ties.
      const double x = 4.0 * coarse(rng), y = 4.0 * coarse(rng);
      radar.push_back(Radar({x, y, x + 12, y + 12}, std::round(dist(rng))));
    }
    for (int i = 0; i < 4; ++i) {
      const double x = pos(rng), y = pos(rng);
      image.push_back(P({x, y, x + size(rng), y + size(rng)}, 0.5, 99.0));
    }
    const RefinedProposals r = RefineDistances(radar, image, 0.3);
    for (std::size_t i = 0; i < image.size(); ++i) {
      double best_iou = -1.0, best_d = 99.0;
      for (const Proposal& rp : radar) {
        const double v = Iou2D(rp.box, image[i].box);
        if (v < 0.3) continue;
        if (v > best_iou || (v == best_iou && rp.distance < best_d)) {
          best_iou = v;
          best_d = rp.distance;
        }
      }
      CHECK(r.image[i].distance == best_d);
    }
  }
}

TEST_CASE("nms examples") {
  const std::vector<Proposal> same = {P({0, 0, 10, 10}, 0.8, 1), P({0, 0, 10, 10}, 0.9, 1)};
  const auto kept = Nms(same, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
  const std::vector<Proposal> apart = {P({0, 0, 10, 10}, 0.8, 1), P({20, 0, 30, 10}, 0.9, 1),
                                       P({40, 0, 50, 10}, 0.1, 1)};
  CHECK(Nms(apart, 0.5).size() == 3);
  // A overlaps B, B overlaps C, A and C are disjoint.
  const std::vector<Proposal> chain = {P({0, 0, 10, 10}, 0.9, 1), P({3, 0, 13, 10}, 0.8, 1),
                                       P({8, 0, 18, 10}, 0.7, 1)};
  const auto c = Nms(chain, 0.4);
  REQUIRE(c.size() == 2);
  CHECK(c[0].score == 0.9);
  CHECK(c[1].score == 0.7);
  CHECK(Nms(std::vector<Proposal>{}, 0.5).empty());
}

TEST_CASE("nms ties prefer radar, then the smaller distance") {
  const std::vector<Proposal> props = {P({0, 0, 10, 10}, 0.5, 10), Radar({0, 0, 10, 10}, 20, 0.5)};
  const auto kept = Nms(props, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].source == ProposalSource::kRadar);
  const std::vector<Proposal> two = {P({0, 0, 10, 10}, 0.5, 30), P({1, 0, 11, 10}, 0.5, 10)};
  CHECK(Nms(two, 0.5)[0].distance == 10);
}

TEST_CASE("nms agrees with the exhaustive reference") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pos(0, 20), size(2, 15), score(0, 1);
  std::uniform_int_distribution<int> count(0, 8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Proposal> props;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      props.push_back(P({x, y, x + size(rng), y + size(rng)}, score(rng), 10));
    }
    const double thr = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    std::vector<Proposal> ranked = props;
    std::sort(ranked.begin(), ranked.end(),
              [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
    std::vector<oracle::Rect> rects;
    for (const Proposal& p : ranked) rects.push_back({p.box.x1, p.box.y1, p.box.x2, p.box.y2});
    const oracle::NmsOracleResult ref = oracle::BruteForceNms(rects, thr);
    REQUIRE(ref.solutions == 1);
    const auto got = Nms(props, thr);
    REQUIRE(got.size() == ref.kept.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].box == ranked[ref.kept[k]].box);
  }
}

TEST_CASE("nms output properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(0, 50), size(2, 30), score(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Proposal> props;
    for (int i = 0; i < 40; ++i) {
      const double x = pos(rng), y = pos(rng);
      props.push_back(P({x, y, x + size(rng), y + size(rng)}, score(rng), 10));
    }
    const auto kept = Nms(props, 0.5);
    CHECK(kept.size() <= props.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(Iou2D(kept[i].box, kept[j].box) < 0.5);
      if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
    }
    const auto again = Nms(kept, 0.5);
    CHECK(again.size() == kept.size());
    std::vector<Proposal> shuffled = props;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto other = Nms(shuffled, 0.5);
    REQUIRE(other.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) CHECK(other[i].box == kept[i].box);
  }
}

TEST_CASE("merge with one side empty is plain nms") {
  const std::vector<Proposal> image = {P({0, 0, 10, 10}, 0.9, 5), P({1, 1, 10, 10}, 0.8, 6),
                                       P({30, 30, 40, 40}, 0.7, 7)};
  const std::vector<Proposal> radar = {Radar({0, 0, 10, 10}, 5), Radar({2, 0, 10, 10}, 6)};
  const MergeConfig cfg;
  const auto a = Merge({}, image, cfg);
  const auto b = Nms(image, cfg.nms_iou);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].box == b[i].box);
  CHECK(Merge(radar, {}, cfg).size() == Nms(radar, cfg.nms_iou).size());
}

TEST_CASE("a higher-scoring image box survives carrying the radar distance") {
  const std::vector<Proposal> radar = {Radar({0, 0, 10, 10}, 12.5, 0.6)};
  const std::vector<Proposal> image = {P({0, 0, 10, 9.5}, 0.95, 40.0)};
  const auto merged = Merge(radar, image, {});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].source == ProposalSource::kImage);
  CHECK(merged[0].box == image[0].box);
  CHECK(merged[0].distance == 12.5);
}

TEST_CASE("merge output properties") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> pos(0, 60), size(3, 30), score(0, 1), dist(2, 80);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Proposal> radar, image;
    for (int i = 0; i < 10; ++i) {
      const double x = pos(rng), y = pos(rng);
      radar.push_back(Radar({x, y, x + size(rng), y + size(rng)}, dist(rng), score(rng)));
    }
    for (int i = 0; i < 30; ++i) {
      const double x = pos(rng), y = pos(rng);
      image.push_back(P({x, y, x + size(rng), y + size(rng)}, score(rng), dist(rng)));
    }
    MergeConfig cfg;
    cfg.max_proposals = 12;
    const auto merged = Merge(radar, image, cfg);
    CHECK(merged.size() <= 12);
    CHECK(merged.size() <= radar.size() + image.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      for (std::size_t j = i + 1; j < merged.size(); ++j) {
        CHECK(Iou2D(merged[i].box, merged[j].box) < cfg.nms_iou);
      }
      if (merged[i].source != ProposalSource::kImage) continue;
      // Every surviving image proposal that overlaps a radar proposal enough
      // carries a radar distance bit for bit.
      bool overlaps = false;
      bool carries = false;
      for (const Proposal& r : radar) {
        if (Iou2D(r.box, merged[i].box) >= cfg.match_iou) {
          overlaps = true;
          carries = carries || r.distance == merged[i].distance;
        }
      }
      if (overlaps) CHECK(carries);
    }
  }
}

TEST_CASE("merge config validation") {
  MergeConfig c;
  CHECK_NOTHROW(c.Validate());
  c.nms_iou = 1.0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = {};
  c.match_iou = 0.0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = {};
  c.max_proposals = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace rcfuse
