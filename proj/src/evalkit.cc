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

#include "rcfuse/evalkit.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace rcfuse::eval {

namespace {

constexpr int kRecallPoints = 101;

std::vector<std::size_t> RankByScore(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

struct RankedFlag {
  double score;
  bool tp;
};

// Per class: the top `max_dets` detections of that class in one scene,
// sorted, plus the ground truths of that class.
void ClassSlice(const SceneResult& scene, const std::string& cls, std::size_t max_dets,
                std::vector<Detection>& dets, std::vector<GroundTruth2D>& gts) {
  dets.clear();
  gts.clear();
  for (const Detection& d : scene.detections) {
    if (d.class_name == cls) dets.push_back(d);
  }
  const std::vector<std::size_t> order = RankByScore(dets);
  std::vector<Detection> sorted;
  for (std::size_t i = 0; i < order.size() && i < max_dets; ++i) sorted.push_back(dets[order[i]]);
  dets = std::move(sorted);
  for (const GroundTruth2D& g : scene.gts) {
    if (g.class_name == cls) gts.push_back(g);
  }
}

double Percent(double v) { return 100.0 * v; }

}  // namespace

MatchResult MatchDetections(std::span<const Detection> dets, std::span<const GroundTruth2D> gts,
                            double iou_threshold) {
  MatchResult r;
  r.true_positive.assign(dets.size(), false);
  r.matched_gt.assign(dets.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_name != dets[d].class_name) continue;
      const double iou = Iou2D(dets[d].box, gts[g].box);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      r.true_positive[d] = true;
      r.matched_gt[d] = best;
    }
  }
  return r;
}

std::optional<double> AveragePrecision(const std::vector<bool>& ranked_flags, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  const std::size_t n = ranked_flags.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  // Precision envelope: max precision at any equal or higher recall.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int k = 0; k < kRecallPoints; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / kRecallPoints;
}

std::optional<double> WeightedAp(std::span<const double> per_class_ap,
                                 std::span<const std::size_t> per_class_gt_counts) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < per_class_ap.size(); ++i) {
    num += static_cast<double>(per_class_gt_counts[i]) * per_class_ap[i];
    den += static_cast<double>(per_class_gt_counts[i]);
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

MaeResult DistanceMae(std::span<const SceneResult> scenes, double iou_threshold) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  double total = 0.0;
  MaeResult out;
  for (const SceneResult& scene : scenes) {
    std::vector<Detection> sorted;
    for (std::size_t i : RankByScore(scene.detections)) sorted.push_back(scene.detections[i]);
    const MatchResult m = MatchDetections(sorted, scene.gts, iou_threshold);
    for (std::size_t d = 0; d < sorted.size(); ++d) {
      if (!m.true_positive[d]) continue;
      const GroundTruth2D& g = scene.gts[m.matched_gt[d]];
      const double err = std::abs(sorted[d].distance - g.distance);
      auto& slot = acc[g.class_name];
      slot.first += err;
      slot.second += 1;
      total += err;
      ++out.pairs;
    }
  }
  for (const auto& [cls, slot] : acc) out.per_class[cls] = slot.first / slot.second;
  if (out.pairs > 0) out.overall = total / static_cast<double>(out.pairs);
  return out;
}

EvalConfig EvalConfig::Default(std::vector<std::string> classes) {
  EvalConfig c;
  c.classes = std::move(classes);
  for (int i = 0; i < 10; ++i) c.iou_thresholds.push_back((50.0 + 5.0 * i) / 100.0);
  return c;
}

EvalReport Evaluate(std::span<const SceneResult> scenes, const EvalConfig& config) {
  EvalReport report;
  report.iou_thresholds = config.iou_thresholds;
  std::vector<double> all = config.iou_thresholds;
  all.push_back(0.5);
  all.push_back(0.75);

  std::vector<double> ap50s;
  std::vector<double> ap75s;
  std::vector<Detection> dets;
  std::vector<GroundTruth2D> gts;
  for (const std::string& cls : config.classes) {
    ClassMetrics cm;
    cm.name = cls;
    std::vector<std::vector<RankedFlag>> ranked(all.size());
    std::vector<std::size_t> tps(all.size(), 0);
    for (const SceneResult& scene : scenes) {
      ClassSlice(scene, cls, config.max_detections, dets, gts);
      cm.gt_count += gts.size();
      for (std::size_t t = 0; t < all.size(); ++t) {
        const MatchResult m = MatchDetections(dets, gts, all[t]);
        for (std::size_t d = 0; d < dets.size(); ++d) {
          ranked[t].push_back({dets[d].score, m.true_positive[d]});
          if (m.true_positive[d]) ++tps[t];
        }
      }
    }
    if (cm.gt_count == 0) continue;
    std::vector<double> ap_at(all.size());
    for (std::size_t t = 0; t < all.size(); ++t) {
      std::stable_sort(ranked[t].begin(), ranked[t].end(),
                       [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
      std::vector<bool> flags;
      flags.reserve(ranked[t].size());
      for (const RankedFlag& f : ranked[t]) flags.push_back(f.tp);
      ap_at[t] = *AveragePrecision(flags, cm.gt_count);
    }
    const std::size_t nt = config.iou_thresholds.size();
    double recall_sum = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
      cm.ap_per_threshold.push_back(ap_at[t]);
      recall_sum += static_cast<double>(tps[t]) / static_cast<double>(cm.gt_count);
    }
    cm.ap = nt ? std::accumulate(ap_at.begin(), ap_at.begin() + nt, 0.0) / nt : 0.0;
    cm.recall = nt ? recall_sum / nt : 0.0;
    ap50s.push_back(ap_at[nt]);
    ap75s.push_back(ap_at[nt + 1]);
    report.classes.push_back(std::move(cm));
  }

  const MaeResult mae = DistanceMae(scenes, config.mae_iou);
  for (ClassMetrics& cm : report.classes) {
    const auto it = mae.per_class.find(cm.name);
    if (it != mae.per_class.end()) cm.mae = it->second;
  }
  report.mae = mae.overall;
  report.mae_pairs = mae.pairs;

  const std::size_t nc = report.classes.size();
  if (nc > 0) {
    std::vector<double> aps;
    std::vector<std::size_t> counts;
    for (const ClassMetrics& cm : report.classes) {
      report.ap += cm.ap;
      report.ar += cm.recall;
      aps.push_back(cm.ap);
      counts.push_back(cm.gt_count);
    }
    report.ap /= nc;
    report.ar /= nc;
    report.ap50 = std::accumulate(ap50s.begin(), ap50s.end(), 0.0) / nc;
    report.ap75 = std::accumulate(ap75s.begin(), ap75s.end(), 0.0) / nc;
    report.weighted_ap = WeightedAp(aps, counts);
  }
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["scale"] = "percent";
  doc["ap"] = Percent(report.ap);
  doc["ap50"] = Percent(report.ap50);
  doc["ap75"] = Percent(report.ap75);
  doc["ar"] = Percent(report.ar);
  doc["weighted_ap"] = report.weighted_ap ? nlohmann::ordered_json(Percent(*report.weighted_ap))
                                          : nlohmann::ordered_json(nullptr);
  doc["mae_m"] = report.mae ? nlohmann::ordered_json(*report.mae) : nlohmann::ordered_json(nullptr);
  doc["mae_pairs"] = report.mae_pairs;
  doc["iou_thresholds"] = report.iou_thresholds;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const ClassMetrics& cm : report.classes) {
    nlohmann::ordered_json c;
    c["name"] = cm.name;
    c["gt_count"] = cm.gt_count;
    c["ap"] = Percent(cm.ap);
    std::vector<double> per;
    for (double v : cm.ap_per_threshold) per.push_back(Percent(v));
    c["ap_per_threshold"] = per;
    c["ar"] = Percent(cm.recall);
    c["mae_m"] = cm.mae ? nlohmann::ordered_json(*cm.mae) : nlohmann::ordered_json(nullptr);
    classes.push_back(std::move(c));
  }
  doc["classes"] = std::move(classes);
  return doc.dump(2) + "\n";
}

std::string ReportToTable(const EvalReport& report) {
  std::ostringstream os;
  char buf[256];
  auto opt = [](const std::optional<double>& v, double scale) {
    char b[32];
    if (v) {
      std::snprintf(b, sizeof(b), "%.2f", *v * scale);
      return std::string(b);
    }
    return std::string("-");
  };
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s %8s %8s %8s\n", "", "Weighted", "AP",
                "AP50", "AP75", "AR", "MAE");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-12s %8s %8.2f %8.2f %8.2f %8.2f %8s\n", "overall",
                opt(report.weighted_ap, 100.0).c_str(), Percent(report.ap),
                Percent(report.ap50), Percent(report.ap75), Percent(report.ar),
                opt(report.mae, 1.0).c_str());
  os << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%-12s", "");
  os << buf;
  for (const ClassMetrics& cm : report.classes) {
    std::snprintf(buf, sizeof(buf), " %10s", cm.name.c_str());
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof(buf), "%-12s", "AP");
  os << buf;
  for (const ClassMetrics& cm : report.classes) {
    std::snprintf(buf, sizeof(buf), " %10.2f", Percent(cm.ap));
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof(buf), "%-12s", "MAE");
  os << buf;
  for (const ClassMetrics& cm : report.classes) {
    std::snprintf(buf, sizeof(buf), " %10s", opt(cm.mae, 1.0).c_str());
    os << buf;
  }
  os << "\n";
  return os.str();
}

}  // namespace rcfuse::eval
