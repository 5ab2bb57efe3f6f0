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

#include "rcfuse/pipeline.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>

#include "json.hpp"

#include "rcfuse/file_util.h"
#include "rcfuse/neural/losses.h"
#include "rcfuse/neural/roi_pool.h"

namespace rcfuse {
namespace {

using nlohmann::ordered_json;
using neural::FeatureMap;
using neural::ParamBlock;
using neural::Tensor3;

template <typename T>
void Read(const ordered_json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

// Ranks indices by score descending with ties going to the lower index.
std::vector<std::size_t> RankByScore(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> Sample(std::vector<std::size_t> pool, std::size_t count,
                                std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > count) pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<Box2D> Boxes(std::span<const GroundTruth2D> gts) {
  std::vector<Box2D> out;
  out.reserve(gts.size());
  for (const GroundTruth2D& g : gts) out.push_back(g.box);
  return out;
}

std::optional<neural::RoiPoolResult> Pool(const FeatureMap& fm, const Box2D& box, int size) {
  try {
    return neural::RoiPool(fm, box, size, size);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

void CheckScene(const Scene& scene, const Model& model) {
  if (scene.image.empty()) throw std::invalid_argument("scene has no image pixels");
  const int stride = model.config.backbone.stride();
  if (scene.image.width % stride != 0 || scene.image.height % stride != 0) {
    throw std::invalid_argument("image size " + std::to_string(scene.image.width) + "x" +
                                std::to_string(scene.image.height) +
                                " is not a multiple of the backbone stride");
  }
  scene.calibration.Validate();
}

std::vector<Proposal> RadarProposalsFor(const Scene& scene, const Model& model) {
  const RadarSweepSet radar =
      AggregateSweeps(scene.radar_sweeps, scene.ReferenceTime(), model.config.radar_aggregation);
  return GenerateRadarProposals(radar, model.anchors, scene.calibration);
}

}  // namespace

void PipelineConfig::Validate() const {
  merge.Validate();
  auto fail = [](const std::string& what) { throw std::invalid_argument("pipeline config: " + what); };
  if (backbone.channels.size() != 4) fail("backbone needs exactly 4 conv widths");
  for (int c : backbone.channels) {
    if (c <= 0) fail("backbone widths must be positive");
  }
  if (rpn.hidden <= 0 || rpn.scales.empty() || rpn.ratios.empty()) fail("bad rpn settings");
  for (double s : rpn.scales) {
    if (!(s > 0)) fail("rpn scales must be positive");
  }
  for (double r : rpn.ratios) {
    if (!(r > 0)) fail("rpn ratios must be positive");
  }
  if (pool_size <= 0 || rpr_hidden <= 0 || det_hidden <= 0) fail("layer sizes must be positive");
  if (rpn_pre_nms_top_n <= 0 || rpn_post_nms_top_n <= 0) fail("rpn top-n must be positive");
  if (!(rpn_nms_iou > 0 && rpn_nms_iou < 1)) fail("rpn_nms_iou must lie in (0, 1)");
  if (!(detection_nms_iou > 0 && detection_nms_iou <= 1)) fail("detection_nms_iou must lie in (0, 1]");
  if (!(score_threshold >= 0 && score_threshold < 1)) fail("score_threshold must lie in [0, 1)");
  if (max_detections == 0) fail("max_detections must be positive");
  if (epochs < 0 || batch_size <= 0) fail("epochs >= 0 and batch_size >= 1 required");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) fail("bad learning_rate");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (!(lr_gamma > 0) || !std::isfinite(lr_gamma)) fail("lr_gamma must be positive");
  for (int e : lr_steps) {
    if (e < 0) fail("lr_steps must be non-negative");
  }
  if (rpn_batch <= 0 || rpr_batch <= 0 || second_stage_batch <= 0) fail("batch sizes must be positive");
  if (!(second_stage_positive_fraction > 0 && second_stage_positive_fraction <= 1)) {
    fail("second_stage_positive_fraction must lie in (0, 1]");
  }
  if (!(second_stage_positive_iou > 0 && second_stage_positive_iou < 1)) {
    fail("second_stage_positive_iou must lie in (0, 1)");
  }
}

PipelineConfig PipelineConfig::FromJson(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
  PipelineConfig c;
  Read(j, "anchor_table", c.anchor_table_path);
  if (j.contains("merge")) {
    const ordered_json& m = j.at("merge");
    Read(m, "match_iou", c.merge.match_iou);
    Read(m, "nms_iou", c.merge.nms_iou);
    Read(m, "max_proposals", c.merge.max_proposals);
  }
  Read(j, "backbone_channels", c.backbone.channels);
  if (j.contains("rpn")) {
    const ordered_json& r = j.at("rpn");
    Read(r, "hidden", c.rpn.hidden);
    Read(r, "scales", c.rpn.scales);
    Read(r, "ratios", c.rpn.ratios);
    Read(r, "pre_nms_top_n", c.rpn_pre_nms_top_n);
    Read(r, "nms_iou", c.rpn_nms_iou);
    Read(r, "post_nms_top_n", c.rpn_post_nms_top_n);
  }
  if (j.contains("radar")) {
    const ordered_json& r = j.at("radar");
    Read(r, "max_age", c.radar_aggregation.max_age);
    Read(r, "motion_compensate", c.radar_aggregation.motion_compensate);
  }
  Read(j, "pool_size", c.pool_size);
  Read(j, "rpr_hidden", c.rpr_hidden);
  Read(j, "det_hidden", c.det_hidden);
  Read(j, "use_radar", c.use_radar);
  Read(j, "score_threshold", c.score_threshold);
  Read(j, "detection_nms_iou", c.detection_nms_iou);
  Read(j, "max_detections", c.max_detections);
  Read(j, "epochs", c.epochs);
  Read(j, "batch_size", c.batch_size);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "momentum", c.momentum);
  Read(j, "lr_steps", c.lr_steps);
  Read(j, "lr_gamma", c.lr_gamma);
  Read(j, "lambda", c.lambda);
  Read(j, "rpn_batch", c.rpn_batch);
  Read(j, "rpr_batch", c.rpr_batch);
  Read(j, "second_stage_batch", c.second_stage_batch);
  Read(j, "second_stage_positive_fraction", c.second_stage_positive_fraction);
  Read(j, "second_stage_positive_iou", c.second_stage_positive_iou);
  Read(j, "seed", c.seed);
  c.Validate();
  return c;
}

std::string PipelineConfig::ToJson() const {
  ordered_json j;
  j["anchor_table"] = anchor_table_path;
  j["merge"] = {{"match_iou", merge.match_iou},
                {"nms_iou", merge.nms_iou},
                {"max_proposals", merge.max_proposals}};
  j["backbone_channels"] = backbone.channels;
  j["rpn"] = {{"hidden", rpn.hidden},
              {"scales", rpn.scales},
              {"ratios", rpn.ratios},
              {"pre_nms_top_n", rpn_pre_nms_top_n},
              {"nms_iou", rpn_nms_iou},
              {"post_nms_top_n", rpn_post_nms_top_n}};
  j["radar"] = {{"max_age", radar_aggregation.max_age},
                {"motion_compensate", radar_aggregation.motion_compensate}};
  j["pool_size"] = pool_size;
  j["rpr_hidden"] = rpr_hidden;
  j["det_hidden"] = det_hidden;
  j["use_radar"] = use_radar;
  j["score_threshold"] = score_threshold;
  j["detection_nms_iou"] = detection_nms_iou;
  j["max_detections"] = max_detections;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["momentum"] = momentum;
  j["lr_steps"] = lr_steps;
  j["lr_gamma"] = lr_gamma;
  j["lambda"] = lambda;
  j["rpn_batch"] = rpn_batch;
  j["rpr_batch"] = rpr_batch;
  j["second_stage_batch"] = second_stage_batch;
  j["second_stage_positive_fraction"] = second_stage_positive_fraction;
  j["second_stage_positive_iou"] = second_stage_positive_iou;
  j["seed"] = seed;
  return j.dump(2);
}

Model Model::Create(const PipelineConfig& config, const AnchorTable& anchors) {
  config.Validate();
  Model m;
  m.config = config;
  m.anchors = anchors;
  std::mt19937_64 rng(config.seed);
  neural::InitBackbone(m.params, config.backbone, rng);
  neural::InitRpn(m.params, config.rpn, config.backbone.out_channels(), rng);
  neural::InitRprHead(m.params, {config.PooledSize(), config.rpr_hidden}, rng);
  neural::InitDetectorHead(
      m.params, {config.PooledSize(), config.det_hidden, static_cast<int>(anchors.size())}, rng);
  return m;
}

Model Model::Create(const PipelineConfig& config) {
  return Create(config, config.anchor_table_path.empty()
                            ? AnchorTable::Default()
                            : AnchorTable::Load(config.anchor_table_path));
}

void SaveModel(const Model& model, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  PipelineConfig config = model.config;
  config.anchor_table_path.clear();
  WriteFileAtomic((root / "pipeline.json").string(), config.ToJson() + "\n");
  WriteFileAtomic((root / "anchors.json").string(), model.anchors.ToJson() + "\n");
  neural::SaveCheckpoint(model.params, (root / "model.ckpt").string());
}

Model LoadModel(const std::string& dir) {
  const std::filesystem::path root(dir);
  const std::string config_path = (root / "pipeline.json").string();
  PipelineConfig config;
  try {
    config = PipelineConfig::FromJson(ReadFile(config_path));
  } catch (const std::exception& e) {
    throw std::invalid_argument(config_path + ": " + e.what());
  }
  config.anchor_table_path.clear();
  Model model = Model::Create(config, AnchorTable::Load((root / "anchors.json").string()));
  const std::string ckpt_path = (root / "model.ckpt").string();
  const ParamBlock stored = neural::LoadCheckpoint(ckpt_path);
  if (stored.params().size() != model.params.params().size()) {
    throw std::invalid_argument(ckpt_path + ": parameter count does not match pipeline.json");
  }
  for (std::size_t i = 0; i < stored.params().size(); ++i) {
    const neural::Param& src = stored.params()[i];
    neural::Param& dst = model.params.params()[i];
    if (src.name != dst.name || src.shape != dst.shape) {
      throw std::invalid_argument(ckpt_path + ": parameter '" + src.name +
                                  "' does not match the layout of '" + dst.name + "'");
    }
    dst.value = src.value;
  }
  return model;
}

std::vector<Proposal> RefineRadarProposals(const FeatureMap& fm, std::span<const Proposal> radar,
                                           const Model& model, int image_width,
                                           int image_height) {
  std::vector<Proposal> out;
  out.reserve(radar.size());
  for (const Proposal& p : radar) {
    const auto pooled = Pool(fm, p.box, model.config.pool_size);
    if (!pooled) continue;
    const neural::RprHeadOutput head = neural::RprHead(pooled->values.data, model.params);
    const auto box = DecodeCornerOffsets(p.box, head.offsets, image_width, image_height);
    if (!box) continue;
    Proposal r = p;
    r.box = *box;
    r.score = head.objectness;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Proposal> ImageProposals(const FeatureMap& fm, const Model& model, int image_width,
                                     int image_height) {
  const PipelineConfig& cfg = model.config;
  const neural::RpnOutput rpn = neural::RpnForward(fm, cfg.rpn, model.params);
  const std::vector<Box2D> anchors =
      neural::RpnAnchors(fm.height(), fm.width(), fm.stride, cfg.rpn);
  const std::vector<std::size_t> order = RankByScore(rpn.objectness);
  std::vector<Proposal> candidates;
  for (std::size_t i : order) {
    if (candidates.size() >= static_cast<std::size_t>(cfg.rpn_pre_nms_top_n)) break;
    const auto box = DecodeCornerOffsets(
        anchors[i], std::span<const double, 4>(rpn.deltas.data() + 4 * i, 4), image_width,
        image_height);
    if (!box) continue;
    Proposal p;
    p.box = *box;
    p.score = rpn.objectness[i];
    p.distance = neural::DecodeDistance(rpn.distance_raw[i]);
    p.source = ProposalSource::kImage;
    candidates.push_back(std::move(p));
  }
  std::vector<Proposal> kept = Nms(candidates, cfg.rpn_nms_iou);
  if (kept.size() > static_cast<std::size_t>(cfg.rpn_post_nms_top_n)) {
    kept.resize(cfg.rpn_post_nms_top_n);
  }
  return kept;
}

std::vector<Detection> SecondStage(const FeatureMap& fm, std::span<const Proposal> proposals,
                                   const Model& model, int image_width, int image_height) {
  const PipelineConfig& cfg = model.config;
  const int n = model.num_classes();
  std::vector<Detection> raw;
  for (const Proposal& p : proposals) {
    const auto pooled = Pool(fm, p.box, cfg.pool_size);
    if (!pooled) continue;
    const neural::DetectorHeadOutput head = neural::DetectorHead(pooled->values.data, model.params);
    const auto best = std::max_element(head.probs.begin(), head.probs.end());
    const int label = static_cast<int>(best - head.probs.begin());
    if (label == 0 || *best < cfg.score_threshold) continue;
    const int c = label - 1;
    Box2D box = p.box;
    if (const auto refined = DecodeCornerOffsets(
            p.box, std::span<const double, 4>(head.deltas.data() + 4 * c, 4), image_width,
            image_height)) {
      box = *refined;
    }
    raw.push_back({box, model.anchors.classes()[c].name, *best, p.distance, p.source});
  }
  std::vector<Detection> out;
  for (int c = 0; c < n; ++c) {
    const std::string& name = model.anchors.classes()[c].name;
    std::vector<Proposal> pool;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].class_name != name) continue;
      pool.push_back({raw[i].box, raw[i].distance, raw[i].score, raw[i].source, std::nullopt});
    }
    for (const Proposal& k : Nms(pool, cfg.detection_nms_iou)) {
      out.push_back({k.box, name, k.score, k.distance, k.source});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (out.size() > cfg.max_detections) out.resize(cfg.max_detections);
  return out;
}

std::vector<Detection> Detect(const Scene& scene, const Model& model, DetectTrace* trace) {
  try {
    CheckScene(scene, model);
    const int w = scene.image.width;
    const int h = scene.image.height;
    const FeatureMap fm =
        neural::TinyBackbone(ImageToTensor(scene.image), model.params, model.config.backbone);
    std::vector<Proposal> radar_raw;
    std::vector<Proposal> radar;
    if (model.config.use_radar) {
      radar_raw = RadarProposalsFor(scene, model);
      radar = RefineRadarProposals(fm, radar_raw, model, w, h);
    }
    std::vector<Proposal> image = ImageProposals(fm, model, w, h);
    std::vector<Proposal> merged = Merge(radar, image, model.config.merge);
    std::vector<Detection> dets = SecondStage(fm, merged, model, w, h);
    if (trace) {
      trace->radar_raw = std::move(radar_raw);
      trace->radar_refined = std::move(radar);
      trace->image = std::move(image);
      trace->merged = std::move(merged);
    }
    return dets;
  } catch (const SceneError&) {
    throw;
  } catch (const std::exception& e) {
    throw SceneError(scene.id, e.what());
  }
}

std::vector<eval::SceneResult> DetectAll(std::span<const Scene> scenes, const Model& model,
                                         int jobs) {
  std::vector<eval::SceneResult> results(scenes.size());
  std::vector<std::exception_ptr> errors(scenes.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < scenes.size(); i += step) {
      try {
        results[i].detections = Detect(scenes[i], model);
        results[i].gts = ConvertAnnotations(scenes[i], DistanceMode::kCenter);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = static_cast<std::size_t>(std::max(1, jobs));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(work, t, n);
    for (std::thread& t : threads) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

TrainLosses AccumulateSceneGradients(const Scene& scene, Model& model, std::mt19937_64& rng) {
  CheckScene(scene, model);
  const PipelineConfig& cfg = model.config;
  ParamBlock& params = model.params;
  const int w = scene.image.width;
  const int h = scene.image.height;
  const std::vector<GroundTruth2D> gts = ConvertAnnotations(scene, DistanceMode::kCenter);
  const std::vector<Box2D> gt_boxes = Boxes(gts);
  TrainLosses losses;

  neural::BackboneCache cache;
  const FeatureMap fm = neural::TinyBackbone(ImageToTensor(scene.image), params, cfg.backbone, &cache);
  Tensor3 grad_fm(fm.height(), fm.width(), fm.channels());

  // RPN objectness, corner offsets and distance.
  {
    const neural::RpnOutput rpn = neural::RpnForward(fm, cfg.rpn, params);
    const std::vector<Box2D> anchors = neural::RpnAnchors(fm.height(), fm.width(), fm.stride, cfg.rpn);
    const std::vector<TargetAssignment> assign =
        AssignTargets(std::span<const Box2D>(anchors), gt_boxes, {0.7, 0.3, true});
    std::vector<std::size_t> pos_pool;
    std::vector<std::size_t> neg_pool;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (assign[i].label == TargetLabel::kPositive) pos_pool.push_back(i);
      if (assign[i].label == TargetLabel::kNegative) neg_pool.push_back(i);
    }
    const std::vector<std::size_t> pos = Sample(pos_pool, cfg.rpn_batch / 2, rng);
    const std::vector<std::size_t> neg = Sample(neg_pool, cfg.rpn_batch - pos.size(), rng);
    std::vector<std::size_t> picked = pos;
    picked.insert(picked.end(), neg.begin(), neg.end());
    std::sort(picked.begin(), picked.end());

    neural::LossBatch batch;
    std::vector<std::size_t> positives;
    for (std::size_t i : picked) {
      const bool is_pos = assign[i].label == TargetLabel::kPositive;
      batch.p.push_back(rpn.objectness[i]);
      batch.p_star.push_back(is_pos ? 1 : 0);
      if (is_pos) {
        batch.t.push_back({rpn.deltas[4 * i], rpn.deltas[4 * i + 1], rpn.deltas[4 * i + 2],
                           rpn.deltas[4 * i + 3]});
        batch.t_star.push_back(*assign[i].regression_target);
        positives.push_back(i);
      }
    }
    std::vector<double> g_obj(rpn.objectness.size(), 0.0);
    std::vector<double> g_del(rpn.deltas.size(), 0.0);
    std::vector<double> g_dist(rpn.distance_raw.size(), 0.0);
    if (!picked.empty()) {
      batch.SetDefaultNormalizers();
      batch.lambda = cfg.lambda;
      neural::LossBatchGrad grad;
      losses.rpn = neural::MultitaskLoss(batch, &grad);
      for (std::size_t j = 0; j < picked.size(); ++j) g_obj[picked[j]] = grad.p[j];
      for (std::size_t m = 0; m < positives.size(); ++m) {
        for (int k = 0; k < 4; ++k) g_del[4 * positives[m] + k] = grad.t[m][k];
      }
    }
    if (!positives.empty()) {
      std::vector<double> d_hat;
      std::vector<double> d_star;
      for (std::size_t i : positives) {
        d_hat.push_back(rpn.distance_raw[i]);
        d_star.push_back(gts[*assign[i].matched_gt].distance);
      }
      const std::vector<char> mask(d_hat.size(), 1);
      std::vector<double> g;
      losses.rpn_distance = neural::DistanceLoss(d_hat, d_star, mask, &g);
      for (std::size_t m = 0; m < positives.size(); ++m) g_dist[positives[m]] = g[m];
    }
    const Tensor3 g = neural::RpnBackward(fm, rpn, g_obj, g_del, g_dist, params);
    for (std::size_t i = 0; i < g.data.size(); ++i) grad_fm.data[i] += g.data[i];
  }

  // Radar proposal refinement.
  std::vector<Proposal> refined;
  if (cfg.use_radar) {
    const std::vector<Proposal> radar = RadarProposalsFor(scene, model);
    refined = RefineRadarProposals(fm, radar, model, w, h);
    const std::vector<TargetAssignment> assign =
        AssignTargets(std::span<const Proposal>(radar), gt_boxes, {0.7, 0.3, false});
    std::vector<std::size_t> pos_pool;
    std::vector<std::size_t> neg_pool;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (assign[i].label == TargetLabel::kPositive) pos_pool.push_back(i);
      if (assign[i].label == TargetLabel::kNegative) neg_pool.push_back(i);
    }
    const std::vector<std::size_t> pos = Sample(pos_pool, cfg.rpr_batch / 2, rng);
    const std::vector<std::size_t> neg = Sample(neg_pool, cfg.rpr_batch - pos.size(), rng);
    std::vector<std::size_t> picked = pos;
    picked.insert(picked.end(), neg.begin(), neg.end());
    std::sort(picked.begin(), picked.end());

    struct Item {
      std::size_t index;
      neural::RoiPoolResult pooled;
      neural::RprHeadOutput head;
    };
    std::vector<Item> items;
    neural::LossBatch batch;
    for (std::size_t i : picked) {
      auto pooled = Pool(fm, radar[i].box, cfg.pool_size);
      if (!pooled) continue;
      neural::RprHeadOutput head = neural::RprHead(pooled->values.data, params);
      const bool is_pos = assign[i].label == TargetLabel::kPositive;
      batch.p.push_back(head.objectness);
      batch.p_star.push_back(is_pos ? 1 : 0);
      if (is_pos) {
        batch.t.push_back(head.offsets);
        batch.t_star.push_back(*assign[i].regression_target);
      }
      items.push_back({i, std::move(*pooled), std::move(head)});
    }
    if (!items.empty()) {
      batch.SetDefaultNormalizers();
      batch.lambda = cfg.lambda;
      neural::LossBatchGrad grad;
      losses.rpr = neural::MultitaskLoss(batch, &grad);
      std::size_t m = 0;
      for (std::size_t j = 0; j < items.size(); ++j) {
        std::array<double, 4> g_off{};
        if (batch.p_star[j] == 1) g_off = grad.t[m++];
        const std::vector<double> g_pooled = neural::RprHeadBackward(
            items[j].pooled.values.data, items[j].head, grad.p[j], g_off, params);
        neural::RoiPoolBackward(items[j].pooled, g_pooled, grad_fm);
      }
    }
  }

  // Second stage over radar and image proposals before merge suppression,
  // plus the ground-truth boxes.
  {
    std::vector<Proposal> props = refined;
    const std::vector<Proposal> image = ImageProposals(fm, model, w, h);
    props.insert(props.end(), image.begin(), image.end());
    for (const GroundTruth2D& g : gts) props.push_back({g.box, g.distance, 1.0, ProposalSource::kImage, std::nullopt});
    std::vector<std::size_t> pos_pool;
    std::vector<std::size_t> neg_pool;
    std::vector<int> labels(props.size(), 0);
    std::vector<int> matched(props.size(), -1);
    for (std::size_t i = 0; i < props.size(); ++i) {
      double best = 0.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double iou = Iou2D(props[i].box, gts[g].box);
        if (iou > best) {
          best = iou;
          matched[i] = static_cast<int>(g);
        }
      }
      if (best >= cfg.second_stage_positive_iou) {
        labels[i] = model.anchors.IndexOf(gts[matched[i]].class_name) + 1;
        pos_pool.push_back(i);
      } else {
        neg_pool.push_back(i);
      }
    }
    const auto max_pos = static_cast<std::size_t>(
        std::lround(cfg.second_stage_batch * cfg.second_stage_positive_fraction));
    const std::vector<std::size_t> pos = Sample(pos_pool, max_pos, rng);
    const std::vector<std::size_t> neg = Sample(neg_pool, cfg.second_stage_batch - pos.size(), rng);
    std::vector<std::size_t> picked = pos;
    picked.insert(picked.end(), neg.begin(), neg.end());
    std::sort(picked.begin(), picked.end());

    const double n_cls = static_cast<double>(std::max<std::size_t>(1, picked.size()));
    const double n_reg = static_cast<double>(std::max<std::size_t>(1, pos.size()));
    for (std::size_t i : picked) {
      const auto pooled = Pool(fm, props[i].box, cfg.pool_size);
      if (!pooled) continue;
      const neural::DetectorHeadOutput head = neural::DetectorHead(pooled->values.data, params);
      std::vector<double> g_probs(head.probs.size(), 0.0);
      std::vector<double> g_deltas(head.deltas.size(), 0.0);
      losses.second_stage += neural::CrossEntropy(head.probs, labels[i], g_probs) / n_cls;
      for (double& g : g_probs) g /= n_cls;
      if (labels[i] > 0) {
        const int c = labels[i] - 1;
        const std::array<double, 4> target = EncodeCornerOffsets(props[i].box, gts[matched[i]].box);
        for (int k = 0; k < 4; ++k) {
          const double diff = head.deltas[4 * c + k] - target[k];
          losses.second_stage += cfg.lambda * neural::SmoothL1(diff) / n_reg;
          g_deltas[4 * c + k] = cfg.lambda * neural::SmoothL1Grad(diff) / n_reg;
        }
      }
      const std::vector<double> g_pooled =
          neural::DetectorHeadBackward(pooled->values.data, head, g_probs, g_deltas, params);
      neural::RoiPoolBackward(*pooled, g_pooled, grad_fm);
    }
  }

  neural::TinyBackboneBackward(cache, grad_fm, params, cfg.backbone);
  return losses;
}

TrainResult Train(std::span<const Scene> dataset, const PipelineConfig& config,
                  const EpochCallback& on_epoch) {
  return Train(dataset, Model::Create(config), on_epoch);
}

TrainResult Train(std::span<const Scene> dataset, Model initial, const EpochCallback& on_epoch) {
  TrainResult result{std::move(initial), {}};
  Model& model = result.model;
  const PipelineConfig& cfg = model.config;
  cfg.Validate();
  if (dataset.empty()) throw std::invalid_argument("training set is empty");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  neural::MomentumSgd optimizer(cfg.momentum);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  model.params.ZeroGrad();
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    lr *= std::pow(cfg.lr_gamma, std::count(cfg.lr_steps.begin(), cfg.lr_steps.end(), epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t k = start; k < end; ++k) {
        const Scene& scene = dataset[order[k]];
        TrainLosses l;
        try {
          l = AccumulateSceneGradients(scene, model, rng);
        } catch (const std::exception& e) {
          throw SceneError(scene.id, e.what());
        }
        if (!std::isfinite(l.total())) throw SceneError(scene.id, "non-finite training loss");
        sum += l.total();
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (neural::Param& p : model.params.params()) {
        for (double& g : p.grad) g *= scale;
      }
      try {
        optimizer.Step(model.params, lr);
      } catch (const neural::NonFiniteGradient& e) {
        throw SceneError(dataset[order[start]].id, e.what());
      }
    }
    const double mean = sum / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace rcfuse
