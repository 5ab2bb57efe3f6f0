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

#include "rcfuse/fusion.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace rcfuse {

void MergeConfig::Validate() const {
  if (!(match_iou > 0.0 && match_iou < 1.0)) {
    throw std::invalid_argument("merge: match_iou must lie in (0, 1)");
  }
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) {
    throw std::invalid_argument("merge: nms_iou must lie in (0, 1)");
  }
  if (max_proposals < 1) throw std::invalid_argument("merge: max_proposals must be >= 1");
}

RefinedProposals RefineDistances(std::span<const Proposal> radar, std::span<const Proposal> image,
                                 double match_iou) {
  RefinedProposals out;
  out.image.assign(image.begin(), image.end());
  out.iou.radar_count = radar.size();
  out.iou.image_count = image.size();
  out.iou.values.resize(radar.size() * image.size());
  for (std::size_t r = 0; r < radar.size(); ++r) {
    for (std::size_t i = 0; i < image.size(); ++i) {
      out.iou.values[r * image.size() + i] = Iou2D(radar[r].box, image[i].box);
    }
  }
  for (std::size_t i = 0; i < image.size(); ++i) {
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < radar.size(); ++r) {
      const double v = out.iou.at(r, i);
      if (v < match_iou) continue;
      if (!best) {
        best = r;
        continue;
      }
      const double bv = out.iou.at(*best, i);
      if (v > bv || (v == bv && radar[r].distance < radar[*best].distance)) best = r;
    }
    if (best) out.image[i].distance = radar[*best].distance;
  }
  return out;
}

bool ProposalRanksBefore(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  const bool ar = a.source == ProposalSource::kRadar;
  const bool br = b.source == ProposalSource::kRadar;
  if (ar != br) return ar;
  if (a.distance != b.distance) return a.distance < b.distance;
  return std::tie(a.box.x1, a.box.y1, a.box.x2, a.box.y2) <
         std::tie(b.box.x1, b.box.y1, b.box.x2, b.box.y2);
}

std::vector<Proposal> Nms(std::span<const Proposal> props, double nms_iou,
                          const IouCache* cache) {
  if (cache && cache->radar_count + cache->image_count != props.size()) {
    throw std::invalid_argument("nms: IoU cache does not match the proposal list");
  }
  auto iou = [&](std::size_t a, std::size_t b) {
    if (cache) {
      const std::size_t nr = cache->radar_count;
      if (a < nr && b >= nr) return cache->at(a, b - nr);
      if (b < nr && a >= nr) return cache->at(b, a - nr);
    }
    return Iou2D(props[a].box, props[b].box);
  };
  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ProposalRanksBefore(props[a], props[b]);
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(k, idx) >= nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  std::vector<Proposal> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(props[k]);
  return out;
}

std::vector<Proposal> Merge(std::span<const Proposal> radar, std::span<const Proposal> image,
                            const MergeConfig& config) {
  config.Validate();
  RefinedProposals refined = RefineDistances(radar, image, config.match_iou);
  std::vector<Proposal> pool(radar.begin(), radar.end());
  pool.insert(pool.end(), refined.image.begin(), refined.image.end());
  std::vector<Proposal> kept = Nms(pool, config.nms_iou, &refined.iou);
  if (kept.size() > config.max_proposals) kept.resize(config.max_proposals);
  return kept;
}

}  // namespace rcfuse
