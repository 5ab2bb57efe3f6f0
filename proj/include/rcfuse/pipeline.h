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

#ifndef RCFUSE_PIPELINE_H_
#define RCFUSE_PIPELINE_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcfuse/dataio.h"
#include "rcfuse/detection.h"
#include "rcfuse/evalkit.h"
#include "rcfuse/fusion.h"
#include "rcfuse/neural/backbone.h"
#include "rcfuse/neural/heads.h"
#include "rcfuse/neural/params.h"
#include "rcfuse/proposals.h"

namespace rcfuse {

struct PipelineConfig {
  // Empty selects AnchorTable::Default().
  std::string anchor_table_path;
  MergeConfig merge;
  neural::BackboneConfig backbone;
  neural::RpnConfig rpn;
  int pool_size = 4;
  int rpr_hidden = 32;
  int det_hidden = 64;
  AggregateOptions radar_aggregation;

  // Inference.
  bool use_radar = true;  // false is the image-only ablation
  int rpn_pre_nms_top_n = 600;
  double rpn_nms_iou = 0.7;
  int rpn_post_nms_top_n = 100;
  double score_threshold = 0.05;
  double detection_nms_iou = 0.5;
  std::size_t max_detections = 100;

  // Training.
  int epochs = 50;
  int batch_size = 2;
  double learning_rate = 0.01;
  double momentum = 0.9;
  // The learning rate is multiplied by lr_gamma at the start of each listed epoch.
  std::vector<int> lr_steps = {35};
  double lr_gamma = 0.1;
  double lambda = 1.0;
  int rpn_batch = 64;
  int rpr_batch = 32;
  int second_stage_batch = 32;
  double second_stage_positive_fraction = 0.25;
  double second_stage_positive_iou = 0.5;
  std::uint64_t seed = 0;

  int PooledSize() const { return pool_size * pool_size * backbone.out_channels(); }
  void Validate() const;
  // Missing keys keep their defaults.
  static PipelineConfig FromJson(const std::string& text);
  std::string ToJson() const;
};

// Configuration, class set and parameters of one detector.
struct Model {
  PipelineConfig config;
  AnchorTable anchors;
  neural::ParamBlock params;

  // Randomly initialized parameters seeded from config.seed.
  static Model Create(const PipelineConfig& config, const AnchorTable& anchors);
  static Model Create(const PipelineConfig& config);
  int num_classes() const { return static_cast<int>(anchors.size()); }
};

// A model directory holds pipeline.json, anchors.json and model.ckpt.
void SaveModel(const Model& model, const std::string& dir);
// Throws std::invalid_argument when the checkpoint does not match the
// parameter layout implied by the stored config.
Model LoadModel(const std::string& dir);

// Raised by Detect/Train with the offending scene id in the message.
class SceneError : public std::runtime_error {
 public:
  SceneError(const std::string& scene_id, const std::string& message)
      : std::runtime_error("scene '" + scene_id + "': " + message), scene_id_(scene_id) {}
  const std::string& scene_id() const { return scene_id_; }

 private:
  std::string scene_id_;
};

// Radar proposals after RPR: refined corners, objectness as the score and
// the seeding detection's distance untouched.
std::vector<Proposal> RefineRadarProposals(const neural::FeatureMap& fm,
                                           std::span<const Proposal> radar, const Model& model,
                                           int image_width, int image_height);

// Top-scoring RPN anchors decoded into boxes with decoded distances, after
// the RPN's own NMS.
std::vector<Proposal> ImageProposals(const neural::FeatureMap& fm, const Model& model,
                                     int image_width, int image_height);

// RoI pool -> two FC layers -> softmax over background + classes and
// class-specific corner offsets. Background winners and scores under the
// threshold are dropped, then class-wise NMS. Distances and sources are
// copied from the proposals.
std::vector<Detection> SecondStage(const neural::FeatureMap& fm, std::span<const Proposal> proposals,
                                   const Model& model, int image_width, int image_height);

struct DetectTrace {
  std::vector<Proposal> radar_raw;
  std::vector<Proposal> radar_refined;
  std::vector<Proposal> image;
  std::vector<Proposal> merged;
};

std::vector<Detection> Detect(const Scene& scene, const Model& model, DetectTrace* trace = nullptr);

// Runs Detect over scenes (optionally on `jobs` threads) and pairs the
// results with converted ground truth.
std::vector<eval::SceneResult> DetectAll(std::span<const Scene> scenes, const Model& model,
                                         int jobs = 1);

struct TrainLosses {
  double rpn = 0.0;
  double rpn_distance = 0.0;
  double rpr = 0.0;
  double second_stage = 0.0;
  double total() const { return rpn + rpn_distance + rpr + second_stage; }
};

// Forward + backward over one scene, accumulating gradients into
// model.params. Sampling draws from `rng`.
TrainLosses AccumulateSceneGradients(const Scene& scene, Model& model, std::mt19937_64& rng);

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;  // mean per-scene total loss
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Mini-batch training of RPN (with distance layer), RPR and second stage
// with summed losses. Deterministic given config.seed.
TrainResult Train(std::span<const Scene> dataset, const PipelineConfig& config,
                  const EpochCallback& on_epoch = {});
TrainResult Train(std::span<const Scene> dataset, Model initial,
                  const EpochCallback& on_epoch = {});

}  // namespace rcfuse

#endif  // RCFUSE_PIPELINE_H_
