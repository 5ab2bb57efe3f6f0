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

#ifndef RCFUSE_EVALKIT_H_
#define RCFUSE_EVALKIT_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcfuse/detection.h"

namespace rcfuse::eval {

struct MatchResult {
  std::vector<bool> true_positive;
  std::vector<int> matched_gt;  // -1 for false positives
};

// Greedy one-to-one matching; `dets` must be sorted by score, highest first.
// Each detection takes the highest-IoU unmatched ground truth of its own
// class with IoU >= iou_threshold (earliest index on ties).
MatchResult MatchDetections(std::span<const Detection> dets, std::span<const GroundTruth2D> gts,
                            double iou_threshold);

// 101-point interpolated AP of a score-ranked TP/FP sequence. Absent when
// num_gt is zero (the class is excluded from means).
std::optional<double> AveragePrecision(const std::vector<bool>& ranked_flags, std::size_t num_gt);

// sum(count_c * ap_c) / sum(count_c); absent when every count is zero.
std::optional<double> WeightedAp(std::span<const double> per_class_ap,
                                 std::span<const std::size_t> per_class_gt_counts);

struct SceneResult {
  std::vector<Detection> detections;
  std::vector<GroundTruth2D> gts;
};

struct MaeResult {
  std::map<std::string, double> per_class;  // classes without TPs are absent
  std::optional<double> overall;
  std::size_t pairs = 0;
};

// Mean |det.distance - gt.distance| over true-positive pairs matched at
// `iou_threshold`, keyed by ground-truth class.
MaeResult DistanceMae(std::span<const SceneResult> scenes, double iou_threshold = 0.5);

struct EvalConfig {
  std::vector<std::string> classes;
  std::vector<double> iou_thresholds;  // defaults to 0.50:0.05:0.95
  std::size_t max_detections = 100;    // per image and class
  double mae_iou = 0.5;

  static EvalConfig Default(std::vector<std::string> classes);
};

struct ClassMetrics {
  std::string name;
  std::size_t gt_count = 0;
  std::vector<double> ap_per_threshold;
  double ap = 0.0;
  double recall = 0.0;
  std::optional<double> mae;
};

// AP/AR in [0, 1]; serializers scale them by 100.
struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<ClassMetrics> classes;  // only classes with ground truth
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar = 0.0;
  std::optional<double> weighted_ap;
  std::optional<double> mae;
  std::size_t mae_pairs = 0;
};

EvalReport Evaluate(std::span<const SceneResult> scenes, const EvalConfig& config);

std::string ReportToJson(const EvalReport& report);
// Aligned text: overall metrics row, per-class AP row, per-class MAE row.
std::string ReportToTable(const EvalReport& report);

}  // namespace rcfuse::eval

#endif  // RCFUSE_EVALKIT_H_
