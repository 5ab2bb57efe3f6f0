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

#ifndef RCFUSE_FUSION_H_
#define RCFUSE_FUSION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rcfuse/proposals.h"

namespace rcfuse {

struct MergeConfig {
  double match_iou = 0.5;
  double nms_iou = 0.5;
  std::size_t max_proposals = 300;

  // Throws std::invalid_argument unless both thresholds lie in (0, 1) and
  // max_proposals >= 1.
  void Validate() const;
};

// Row-major radar x image IoU matrix.
struct IouCache {
  std::size_t radar_count = 0;
  std::size_t image_count = 0;
  std::vector<double> values;

  double at(std::size_t radar, std::size_t image) const {
    return values[radar * image_count + image];
  }
};

struct RefinedProposals {
  std::vector<Proposal> image;
  IouCache iou;
};

// Every image proposal whose best radar IoU reaches `match_iou` takes that
// radar proposal's distance. Ties on IoU go to the smaller radar distance.
RefinedProposals RefineDistances(std::span<const Proposal> radar, std::span<const Proposal> image,
                                 double match_iou);

// Greedy NMS in one class-agnostic pool. Order: score descending, then radar
// before image, then smaller distance, then lexicographic (x1, y1, x2, y2).
// A box is dropped when its IoU with an already kept box is >= nms_iou.
// When `cache` is given, `props` must be the radar proposals followed by the
// image proposals it was computed for; those cross IoUs are reused.
std::vector<Proposal> Nms(std::span<const Proposal> props, double nms_iou,
                          const IouCache* cache = nullptr);

// Sort order used by Nms; exposed for callers that need the same ranking.
bool ProposalRanksBefore(const Proposal& a, const Proposal& b);

// RefineDistances, then Nms over radar + image, truncated to max_proposals.
std::vector<Proposal> Merge(std::span<const Proposal> radar, std::span<const Proposal> image,
                            const MergeConfig& config);

}  // namespace rcfuse

#endif  // RCFUSE_FUSION_H_
