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

#include "rcfuse/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcfuse/dataio.h"
#include "rcfuse/evalkit.h"
#include "rcfuse/file_util.h"
#include "rcfuse/neural/gradcheck.h"
#include "rcfuse/pipeline.h"

namespace rcfuse {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Data or validation problem; reported with exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void RequireDir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw DataError(path + ": " + what + " directory not found");
}

void RequireFile(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(path + ": " + what + " file not found");
}

std::vector<std::string> JsonFiles(const std::string& dir) {
  std::vector<std::string> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Fn>
void ParallelFor(std::size_t n, int jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Scene> LoadScenes(const std::string& dir, const std::vector<std::string>& classes,
                              int jobs) {
  const std::vector<std::string> files = JsonFiles(dir);
  if (files.empty()) throw DataError(dir + ": no scene files (*.json)");
  std::vector<Scene> scenes(files.size());
  ParallelFor(files.size(), jobs, [&](std::size_t i) { scenes[i] = ReadScene(files[i], classes); });
  return scenes;
}

struct Config {
  std::string path;
  Json doc = Json::object();

  const Json& Section(const char* name) const {
    static const Json kEmpty = Json::object();
    const auto it = doc.find(name);
    if (it == doc.end()) return kEmpty;
    if (!it->is_object()) throw DataError(path + ": /" + name + ": expected an object");
    return *it;
  }

  template <typename T>
  T Get(const char* section, const char* key, T fallback) const {
    const Json& s = Section(section);
    const auto it = s.find(key);
    if (it == s.end()) return fallback;
    try {
      return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": /" + section + "/" + key + ": " + e.what());
    }
  }
};

Config LoadConfig(const std::string& flag_path) {
  Config c;
  c.path = flag_path;
  if (c.path.empty()) {
    if (const char* env = std::getenv("RCFUSE_CONFIG")) c.path = env;
  }
  if (c.path.empty()) return c;
  RequireFile(c.path, "config");
  try {
    c.doc = Json::parse(ReadFile(c.path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(c.path + ": invalid JSON: " + e.what());
  }
  if (!c.doc.is_object()) throw DataError(c.path + ": expected a JSON object");
  return c;
}

PipelineConfig PipelineFromConfig(const Config& c) {
  const Json& s = c.Section("pipeline");
  try {
    return PipelineConfig::FromJson(s.dump());
  } catch (const std::exception& e) {
    throw DataError(c.path + ": /pipeline: " + e.what());
  }
}

AnchorTable AnchorsFromConfig(const Config& c, const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) path = c.Get<std::string>("pipeline", "anchor_table", "");
  if (path.empty()) return AnchorTable::Default();
  RequireFile(path, "anchor table");
  try {
    return AnchorTable::Load(path);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

SyntheticParams SyntheticFromConfig(const Config& c) {
  SyntheticParams p;
  p.width = c.Get("generate", "width", p.width);
  p.height = c.Get("generate", "height", p.height);
  p.focal = c.Get("generate", "focal", p.focal);
  p.camera_height = c.Get("generate", "camera_height", p.camera_height);
  p.min_objects = c.Get("generate", "min_objects", p.min_objects);
  p.max_objects = c.Get("generate", "max_objects", p.max_objects);
  p.min_distance = c.Get("generate", "min_distance", p.min_distance);
  p.max_distance = c.Get("generate", "max_distance", p.max_distance);
  p.classes = c.Get("generate", "classes", p.classes);
  p.class_weights = c.Get("generate", "class_weights", p.class_weights);
  const std::vector<double> yaw_deg = c.Get("generate", "yaw_choices_deg", std::vector<double>{});
  if (!yaw_deg.empty()) {
    p.yaw_choices.clear();
    for (double d : yaw_deg) p.yaw_choices.push_back(d == 90.0 ? M_PI / 2 : d * M_PI / 180.0);
  }
  p.sigma_pos = c.Get("generate", "sigma_pos", p.sigma_pos);
  p.sigma_dist = c.Get("generate", "sigma_dist", p.sigma_dist);
  p.dropout = c.Get("generate", "dropout", p.dropout);
  p.clutter_rate = c.Get("generate", "clutter_rate", p.clutter_rate);
  p.max_overlap = c.Get("generate", "max_overlap", p.max_overlap);
  p.max_retries = c.Get("generate", "max_retries", p.max_retries);
  p.pixel_noise = c.Get("generate", "pixel_noise", p.pixel_noise);
  try {
    p.Validate();
  } catch (const std::exception& e) {
    throw DataError((c.path.empty() ? std::string("generate") : c.path + ": /generate") + ": " +
                    e.what());
  }
  return p;
}

std::vector<double> ParseGrid(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw DataError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw DataError(std::string(what) + ": empty grid");
  return out;
}

std::vector<double> GridFromConfig(const Config& c, const char* key, const std::string& flag,
                                   std::vector<double> fallback) {
  if (!flag.empty()) return ParseGrid(flag, key);
  return c.Get("sweep", key, fallback);
}

struct GlobalFlags {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  int jobs = 1;
};

int Generate(const GlobalFlags& g, const std::string& out_dir, int count_flag,
             const std::string& anchors_flag, std::ostream& out) {
  const Config c = LoadConfig(g.config);
  const AnchorTable anchors = AnchorsFromConfig(c, anchors_flag);
  const SyntheticParams params = SyntheticFromConfig(c);
  const int count = count_flag >= 0 ? count_flag : c.Get("generate", "count", 10);
  const std::uint64_t seed = g.seed_opt->count() ? g.seed : c.Get<std::uint64_t>("generate", "seed", 0);
  if (count < 0) throw DataError("generate: count must be non-negative");
  fs::create_directories(out_dir);
  ParallelFor(static_cast<std::size_t>(count), g.jobs, [&](std::size_t i) {
    Scene scene = GenerateSyntheticScene(seed + i, params, anchors);
    scene.image_path = scene.id + ".ppm";
    WriteScene(scene, (fs::path(out_dir) / (scene.id + ".json")).string());
  });
  out << "wrote " << count << " scenes to " << out_dir << "\n";
  return kExitOk;
}

int TrainCommand(const GlobalFlags& g, const std::string& data_dir, const std::string& out_dir,
                 int epochs, double lr, std::ostream& out) {
  RequireDir(data_dir, "data");
  const Config c = LoadConfig(g.config);
  PipelineConfig cfg = PipelineFromConfig(c);
  const AnchorTable anchors = AnchorsFromConfig(c, "");
  if (epochs >= 0) cfg.epochs = epochs;
  if (lr >= 0) cfg.learning_rate = lr;
  if (g.seed_opt->count()) cfg.seed = g.seed;
  cfg.anchor_table_path.clear();
  cfg.Validate();
  const std::vector<Scene> scenes = LoadScenes(data_dir, anchors.Names(), g.jobs);
  std::string log = "epoch,loss\n";
  const TrainResult result = Train(scenes, Model::Create(cfg, anchors), [&](int epoch, double loss) {
    out << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << Format("%.6f", loss) << "\n";
    out.flush();
    log += std::to_string(epoch + 1) + "," + Format("%.9g", loss) + "\n";
  });
  SaveModel(result.model, out_dir);
  WriteFileAtomic((fs::path(out_dir) / "loss.csv").string(), log);
  out << "saved model to " << out_dir << "\n";
  return kExitOk;
}

Model LoadModelChecked(const std::string& dir) {
  RequireDir(dir, "model");
  for (const char* f : {"pipeline.json", "anchors.json", "model.ckpt"}) {
    RequireFile((fs::path(dir) / f).string(), "model");
  }
  return LoadModel(dir);
}

int DetectCommand(const GlobalFlags& g, const std::string& model_dir, const std::string& data_dir,
                  const std::string& out_dir, bool no_radar, std::ostream& out) {
  RequireDir(data_dir, "data");
  Model model = LoadModelChecked(model_dir);
  if (no_radar) model.config.use_radar = false;
  const std::vector<Scene> scenes = LoadScenes(data_dir, model.anchors.Names(), g.jobs);
  fs::create_directories(out_dir);
  ParallelFor(scenes.size(), g.jobs, [&](std::size_t i) {
    const std::vector<Detection> dets = Detect(scenes[i], model);
    WriteFileAtomic((fs::path(out_dir) / (scenes[i].id + ".json")).string(),
                    DetectionsToJson(scenes[i].id, dets));
  });
  out << "wrote detections for " << scenes.size() << " scenes to " << out_dir << "\n";
  return kExitOk;
}

std::vector<eval::SceneResult> LoadResults(const std::vector<Scene>& scenes,
                                           const std::string& det_dir) {
  std::vector<eval::SceneResult> results;
  for (const Scene& s : scenes) {
    const std::string path = (fs::path(det_dir) / (s.id + ".json")).string();
    RequireFile(path, "detections");
    results.push_back({ReadDetections(path, s.id), ConvertAnnotations(s, DistanceMode::kCenter)});
  }
  return results;
}

eval::EvalConfig EvalFromConfig(const Config& c, const AnchorTable& anchors) {
  eval::EvalConfig e = eval::EvalConfig::Default(anchors.Names());
  e.max_detections = c.Get("eval", "max_detections", e.max_detections);
  e.mae_iou = c.Get("eval", "mae_iou", e.mae_iou);
  return e;
}

int EvalCommand(const GlobalFlags& g, const std::string& data_dir, const std::string& det_dir,
                const std::string& out_path, const std::string& anchors_flag, std::ostream& out) {
  RequireDir(data_dir, "data");
  RequireDir(det_dir, "detections");
  const Config c = LoadConfig(g.config);
  const AnchorTable anchors = AnchorsFromConfig(c, anchors_flag);
  const std::vector<Scene> scenes = LoadScenes(data_dir, anchors.Names(), g.jobs);
  const std::vector<eval::SceneResult> results = LoadResults(scenes, det_dir);
  const eval::EvalReport report = eval::Evaluate(results, EvalFromConfig(c, anchors));
  if (!out_path.empty()) WriteFileAtomic(out_path, eval::ReportToJson(report));
  out << eval::ReportToTable(report);
  return kExitOk;
}

int RenderCommand(const GlobalFlags& g, const std::string& data_dir, const std::string& det_dir,
                  const std::string& out_dir, const std::string& format,
                  const std::string& anchors_flag, std::ostream& out) {
  RequireDir(data_dir, "data");
  if (!det_dir.empty()) RequireDir(det_dir, "detections");
  if (format != "ppm" && format != "svg") throw DataError("render: format must be ppm or svg");
  const Config c = LoadConfig(g.config);
  const AnchorTable anchors = AnchorsFromConfig(c, anchors_flag);
  const std::vector<Scene> scenes = LoadScenes(data_dir, anchors.Names(), g.jobs);
  fs::create_directories(out_dir);
  ParallelFor(scenes.size(), g.jobs, [&](std::size_t i) {
    const Scene& s = scenes[i];
    std::vector<OverlayBox> boxes;
    if (det_dir.empty()) {
      boxes = OverlayFromGroundTruth(ConvertAnnotations(s, DistanceMode::kCenter));
    } else {
      const std::vector<Detection> dets =
          ReadDetections((fs::path(det_dir) / (s.id + ".json")).string(), s.id);
      boxes = OverlayFromDetections(dets, anchors);
    }
    RenderOverlay(s, boxes, (fs::path(out_dir) / (s.id + "." + format)).string());
  });
  out << "rendered " << scenes.size() << " scenes to " << out_dir << "\n";
  return kExitOk;
}

int GradcheckCommand(const GlobalFlags& g, int seeds, const std::string& out_path,
                     std::ostream& out) {
  if (seeds <= 0) throw DataError("gradcheck: --seeds must be positive");
  const std::uint64_t base = g.seed_opt->count() ? g.seed : 0;
  Json report = Json::array();
  bool all_passed = true;
  for (int s = 0; s < seeds; ++s) {
    for (const neural::NamedGradCheck& r : neural::RunGradCheckSuite(base + s)) {
      all_passed = all_passed && r.report.passed;
      report.push_back({{"seed", base + s},
                        {"block", r.name},
                        {"max_relative_error", r.report.max_relative_error},
                        {"worst_param", r.report.worst_param},
                        {"worst_index", r.report.worst_index},
                        {"checked", r.report.checked},
                        {"passed", r.report.passed}});
      out << "seed " << base + s << " " << r.name << " max_rel_err "
          << Format("%.3e", r.report.max_relative_error) << (r.report.passed ? " ok" : " FAIL")
          << "\n";
    }
  }
  if (!out_path.empty()) WriteFileAtomic(out_path, report.dump(2) + "\n");
  if (!all_passed) throw DataError("gradcheck: analytic and numeric gradients disagree");
  return kExitOk;
}

int SweepCommand(const GlobalFlags& g, const std::string& model_dir, const std::string& data_dir,
                 const std::string& out_path, const std::string& match_flag,
                 const std::string& nms_flag, std::ostream& out) {
  RequireDir(data_dir, "data");
  const Config c = LoadConfig(g.config);
  const std::vector<double> match_grid = GridFromConfig(c, "match_iou", match_flag, {0.3, 0.5, 0.7});
  const std::vector<double> nms_grid = GridFromConfig(c, "nms_iou", nms_flag, {0.3, 0.5, 0.7});
  Model model = LoadModelChecked(model_dir);
  const std::vector<Scene> scenes = LoadScenes(data_dir, model.anchors.Names(), g.jobs);
  const eval::EvalConfig eval_cfg = EvalFromConfig(c, model.anchors);
  std::string csv = "match_iou,nms_iou,ap,ap50,mae\n";
  for (double m : match_grid) {
    for (double n : nms_grid) {
      model.config.merge.match_iou = m;
      model.config.merge.nms_iou = n;
      try {
        model.config.merge.Validate();
      } catch (const std::exception& e) {
        throw DataError(std::string("sweep: ") + e.what());
      }
      const eval::EvalReport r = eval::Evaluate(DetectAll(scenes, model, g.jobs), eval_cfg);
      csv += Format("%g", m) + "," + Format("%g", n) + "," + Format("%.4f", 100 * r.ap) + "," +
             Format("%.4f", 100 * r.ap50) + "," + (r.mae ? Format("%.4f", *r.mae) : "") + "\n";
    }
  }
  WriteFileAtomic(out_path, csv);
  out << "wrote " << match_grid.size() * nms_grid.size() << " rows to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar-camera fusion 2D detection with distance estimation"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config file (default: $RCFUSE_CONFIG)");
  g.seed_opt = app.add_option("--seed", g.seed, "Seed overriding the config");
  app.add_option("--jobs", g.jobs, "Scene-level worker threads")->check(CLI::Range(1, 64));

  std::string out_path, data_dir, det_dir, model_dir, anchors_path;
  int count = -1;
  int epochs = -1;
  double lr = -1.0;
  bool no_radar = false;
  std::string format = "ppm";
  int seeds = 5;
  std::string match_grid, nms_grid;

  CLI::App* gen = app.add_subcommand("generate", "Write synthetic scenes");
  gen->add_option("--out", out_path, "Output directory")->required();
  gen->add_option("--count", count, "Number of scenes");
  gen->add_option("--anchors", anchors_path, "Anchor table JSON");

  CLI::App* train = app.add_subcommand("train", "Train a model on a scene directory");
  train->add_option("--data", data_dir, "Scene directory")->required();
  train->add_option("--out", out_path, "Model output directory")->required();
  train->add_option("--epochs", epochs, "Override pipeline.epochs");
  train->add_option("--lr", lr, "Override pipeline.learning_rate");

  CLI::App* detect = app.add_subcommand("detect", "Run a model over scenes");
  detect->add_option("--model", model_dir, "Model directory")->required();
  detect->add_option("--data", data_dir, "Scene directory")->required();
  detect->add_option("--out", out_path, "Detections output directory")->required();
  detect->add_flag("--no-radar", no_radar, "Image-only inference");

  CLI::App* ev = app.add_subcommand("eval", "Score detections against scene annotations");
  ev->add_option("--data", data_dir, "Scene directory")->required();
  ev->add_option("--detections", det_dir, "Detections directory")->required();
  ev->add_option("--out", out_path, "Report JSON path");
  ev->add_option("--anchors", anchors_path, "Anchor table JSON");

  CLI::App* render = app.add_subcommand("render", "Draw detections or ground truth");
  render->add_option("--data", data_dir, "Scene directory")->required();
  render->add_option("--detections", det_dir, "Detections directory (ground truth if omitted)");
  render->add_option("--out", out_path, "Image output directory")->required();
  render->add_option("--format", format, "ppm or svg");
  render->add_option("--anchors", anchors_path, "Anchor table JSON");

  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient report");
  gc->add_option("--seeds", seeds, "Number of seeds");
  gc->add_option("--out", out_path, "Report JSON path");

  CLI::App* sweep = app.add_subcommand("sweep", "Grid over merge thresholds");
  sweep->add_option("--model", model_dir, "Model directory")->required();
  sweep->add_option("--data", data_dir, "Scene directory")->required();
  sweep->add_option("--out", out_path, "CSV output path")->required();
  sweep->add_option("--match-iou", match_grid, "Comma-separated match IoU grid");
  sweep->add_option("--nms-iou", nms_grid, "Comma-separated NMS IoU grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen) return Generate(g, out_path, count, anchors_path, out);
    if (*train) return TrainCommand(g, data_dir, out_path, epochs, lr, out);
    if (*detect) return DetectCommand(g, model_dir, data_dir, out_path, no_radar, out);
    if (*ev) return EvalCommand(g, data_dir, det_dir, out_path, anchors_path, out);
    if (*render) return RenderCommand(g, data_dir, det_dir, out_path, format, anchors_path, out);
    if (*gc) return GradcheckCommand(g, seeds, out_path, out);
    if (*sweep) return SweepCommand(g, model_dir, data_dir, out_path, match_grid, nms_grid, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rcfuse
