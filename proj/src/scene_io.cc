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
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "rcfuse/dataio.h"
#include "rcfuse/file_util.h"

namespace rcfuse {

namespace {

using Json = nlohmann::ordered_json;

const Json& Require(const Json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ptr + "/" + key, "missing field");
  return *it;
}

double Number(const Json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaError(ptr, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(ptr, "expected a finite number");
  return d;
}

double NumberField(const Json& obj, const std::string& key, const std::string& ptr) {
  return Number(Require(obj, key, ptr), ptr + "/" + key);
}

int IntField(const Json& obj, const std::string& key, const std::string& ptr) {
  const Json& v = Require(obj, key, ptr);
  if (!v.is_number_integer()) throw SchemaError(ptr + "/" + key, "expected an integer");
  return v.get<int>();
}

std::vector<double> NumberArray(const Json& obj, const std::string& key, std::size_t n,
                                const std::string& ptr) {
  const Json& v = Require(obj, key, ptr);
  const std::string p = ptr + "/" + key;
  if (!v.is_array() || v.size() != n) {
    throw SchemaError(p, "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Number(v[i], p + "/" + std::to_string(i)));
  return out;
}

const Json& ArrayField(const Json& obj, const std::string& key, const std::string& ptr) {
  const Json& v = Require(obj, key, ptr);
  if (!v.is_array()) throw SchemaError(ptr + "/" + key, "expected an array");
  return v;
}

CameraCalibration ParseCalibration(const Json& c) {
  const std::string ptr = "/calibration";
  CameraCalibration calib;
  calib.fx = NumberField(c, "fx", ptr);
  calib.fy = NumberField(c, "fy", ptr);
  calib.cx = NumberField(c, "cx", ptr);
  calib.cy = NumberField(c, "cy", ptr);
  const std::vector<double> r = NumberArray(c, "rotation", 9, ptr);
  const std::vector<double> t = NumberArray(c, "translation", 3, ptr);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) calib.camera_from_vehicle.rotation(i, j) = r[3 * i + j];
    calib.camera_from_vehicle.translation(i) = t[i];
  }
  calib.width = IntField(c, "width", ptr);
  calib.height = IntField(c, "height", ptr);
  try {
    calib.Validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(ptr, e.what());
  }
  return calib;
}

Json CalibrationToJson(const CameraCalibration& c) {
  Json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  std::vector<double> r;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(c.camera_from_vehicle.rotation(i, k));
  }
  j["rotation"] = r;
  const Vec3& t = c.camera_from_vehicle.translation;
  j["translation"] = {t.x(), t.y(), t.z()};
  j["width"] = c.width;
  j["height"] = c.height;
  return j;
}

}  // namespace

// --- PPM ---------------------------------------------------------------------

std::string EncodePpm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return out;
}

Image DecodePpm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (token() != "P6") throw std::runtime_error("ppm: only binary P6 is supported");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw std::runtime_error("ppm: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("ppm: unsupported header");
  ++pos;  // single whitespace before the raster
  Image img(w, h);
  if (bytes.size() - std::min(pos, bytes.size()) < img.rgb.size()) {
    throw std::runtime_error("ppm: truncated raster");
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), img.rgb.size(), img.rgb.begin());
  return img;
}

void WritePpm(const Image& image, const std::string& path) {
  WriteFileAtomic(path, EncodePpm(image));
}

Image ReadPpm(const std::string& path) { return DecodePpm(ReadFile(path)); }

neural::Tensor3 ImageToTensor(const Image& image) {
  neural::Tensor3 t(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.rgb.size(); ++i) t.data[i] = image.rgb[i] / 255.0;
  return t;
}

// --- Scene -------------------------------------------------------------------

double Scene::ReferenceTime() const {
  double t = 0.0;
  bool any = false;
  for (const RadarSweep& s : radar_sweeps) {
    if (!any || s.time > t) t = s.time;
    any = true;
  }
  return t;
}

std::string SceneToJson(const Scene& scene) {
  Json doc;
  doc["schema_version"] = kSceneSchemaVersion;
  doc["id"] = scene.id;
  if (scene.image_path) {
    doc["image"] = {{"path", *scene.image_path}};
  } else {
    Json inl;
    inl["width"] = scene.image.width;
    inl["height"] = scene.image.height;
    inl["pixels"] = scene.image.rgb;
    doc["image"] = {{"inline", std::move(inl)}};
  }
  doc["calibration"] = CalibrationToJson(scene.calibration);
  Json sweeps = Json::array();
  for (const RadarSweep& s : scene.radar_sweeps) {
    Json pts = Json::array();
    for (const RadarDetection& d : s.detections) {
      Json p;
      p["x"] = d.position.x();
      p["y"] = d.position.y();
      p["z"] = d.position.z();
      p["vx"] = d.velocity.x();
      p["vy"] = d.velocity.y();
      p["rcs"] = d.rcs;
      p["sensor"] = d.sensor_id;
      pts.push_back(std::move(p));
    }
    sweeps.push_back({{"t", s.time}, {"points", std::move(pts)}});
  }
  doc["radar_sweeps"] = std::move(sweeps);
  Json anns = Json::array();
  for (const Annotation& a : scene.annotations) {
    Json j;
    j["class"] = a.class_name;
    j["center"] = {a.box.center.x(), a.box.center.y(), a.box.center.z()};
    j["size"] = {a.box.width, a.box.length, a.box.height};
    j["yaw"] = a.box.yaw;
    if (a.velocity) j["velocity"] = {a.velocity->x(), a.velocity->y()};
    anns.push_back(std::move(j));
  }
  doc["annotations"] = std::move(anns);
  if (scene.metadata) {
    doc["metadata"] = {{"requested_objects", scene.metadata->requested_objects},
                       {"placed_objects", scene.metadata->placed_objects}};
  }
  return doc.dump(1) + "\n";
}

Scene ParseScene(const std::string& text, const std::vector<std::string>& classes,
                 const std::string& base_dir, bool load_image) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("", "expected an object");
  Scene scene;
  const int version = IntField(doc, "schema_version", "");
  if (version != kSceneSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported version " + std::to_string(version));
  }
  const Json& id = Require(doc, "id", "");
  if (!id.is_string()) throw SchemaError("/id", "expected a string");
  scene.id = id.get<std::string>();
  scene.calibration = ParseCalibration(Require(doc, "calibration", ""));

  const Json& img = Require(doc, "image", "");
  if (img.contains("path")) {
    if (!img["path"].is_string()) throw SchemaError("/image/path", "expected a string");
    scene.image_path = img["path"].get<std::string>();
    if (load_image) {
      const std::filesystem::path full = std::filesystem::path(base_dir) / *scene.image_path;
      try {
        scene.image = ReadPpm(full.string());
      } catch (const std::exception& e) {
        throw SchemaError("/image/path", e.what());
      }
    }
  } else if (img.contains("inline")) {
    const Json& inl = img["inline"];
    const int w = IntField(inl, "width", "/image/inline");
    const int h = IntField(inl, "height", "/image/inline");
    const Json& px = ArrayField(inl, "pixels", "/image/inline");
    if (w < 0 || h < 0 || px.size() != static_cast<std::size_t>(w) * h * 3) {
      throw SchemaError("/image/inline/pixels", "expected width*height*3 values");
    }
    scene.image = Image(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (!px[i].is_number_unsigned() || px[i].get<unsigned>() > 255) {
        throw SchemaError("/image/inline/pixels/" + std::to_string(i), "expected 0..255");
      }
      scene.image.rgb[i] = static_cast<std::uint8_t>(px[i].get<unsigned>());
    }
  } else {
    throw SchemaError("/image", "expected \"path\" or \"inline\"");
  }
  if (!scene.image.empty() && (scene.image.width != scene.calibration.width ||
                               scene.image.height != scene.calibration.height)) {
    throw SchemaError("/image", "dimensions do not match the calibration image size");
  }

  const Json& sweeps = ArrayField(doc, "radar_sweeps", "");
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    const std::string sp = "/radar_sweeps/" + std::to_string(s);
    RadarSweep sweep;
    sweep.time = NumberField(sweeps[s], "t", sp);
    const Json& pts = ArrayField(sweeps[s], "points", sp);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string pp = sp + "/points/" + std::to_string(i);
      RadarDetection d;
      d.position = Vec3(NumberField(pts[i], "x", pp), NumberField(pts[i], "y", pp),
                        pts[i].contains("z") ? NumberField(pts[i], "z", pp) : 0.0);
      d.velocity = Vec2(pts[i].contains("vx") ? NumberField(pts[i], "vx", pp) : 0.0,
                        pts[i].contains("vy") ? NumberField(pts[i], "vy", pp) : 0.0);
      d.rcs = pts[i].contains("rcs") ? NumberField(pts[i], "rcs", pp) : 0.0;
      d.sensor_id = pts[i].contains("sensor") ? IntField(pts[i], "sensor", pp) : 0;
      d.timestamp = sweep.time;
      if (!d.IsValid()) throw SchemaError(pp, "detection must have a positive planar range");
      sweep.detections.push_back(d);
    }
    scene.radar_sweeps.push_back(std::move(sweep));
  }

  const Json& anns = ArrayField(doc, "annotations", "");
  for (std::size_t a = 0; a < anns.size(); ++a) {
    const std::string ap = "/annotations/" + std::to_string(a);
    const Json& cls = Require(anns[a], "class", ap);
    if (!cls.is_string()) throw SchemaError(ap + "/class", "expected a string");
    Annotation ann;
    ann.class_name = cls.get<std::string>();
    if (std::find(classes.begin(), classes.end(), ann.class_name) == classes.end()) {
      throw SchemaError(ap + "/class", "unknown class '" + ann.class_name + "'");
    }
    const std::vector<double> c = NumberArray(anns[a], "center", 3, ap);
    const std::vector<double> sz = NumberArray(anns[a], "size", 3, ap);
    const double yaw = NumberField(anns[a], "yaw", ap);
    try {
      ann.box = Box3D::Make(Vec3(c[0], c[1], c[2]), sz[0], sz[1], sz[2], yaw);
    } catch (const std::invalid_argument& e) {
      throw SchemaError(ap, e.what());
    }
    if (anns[a].contains("velocity")) {
      const std::vector<double> v = NumberArray(anns[a], "velocity", 2, ap);
      ann.velocity = Vec2(v[0], v[1]);
    }
    scene.annotations.push_back(std::move(ann));
  }
  if (doc.contains("metadata")) {
    const Json& m = doc["metadata"];
    SceneMetadata meta;
    meta.requested_objects = IntField(m, "requested_objects", "/metadata");
    meta.placed_objects = IntField(m, "placed_objects", "/metadata");
    scene.metadata = meta;
  }
  return scene;
}

Scene ReadScene(const std::string& path, const std::vector<std::string>& classes,
                bool load_image) {
  const std::string text = ReadFile(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  try {
    return ParseScene(text, classes, dir.empty() ? "." : dir, load_image);
  } catch (const SchemaError& e) {
    throw SchemaError(e.pointer(), path + ": " + std::string(e.what()).substr(e.pointer().size() + 2));
  }
}

void WriteScene(const Scene& scene, const std::string& path) {
  if (scene.image_path && !scene.image.empty()) {
    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    WritePpm(scene.image, (dir / *scene.image_path).string());
  }
  WriteFileAtomic(path, SceneToJson(scene));
}

std::string DetectionsToJson(const std::string& scene_id, std::span<const Detection> dets) {
  Json out = Json::array();
  for (const Detection& d : dets) {
    Json j;
    j["scene_id"] = scene_id;
    j["class"] = d.class_name;
    j["score"] = d.score;
    j["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
    j["distance"] = d.distance;
    j["source"] = std::string(SourceName(d.source));
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::vector<Detection> ParseDetections(const std::string& text, const std::string& scene_id) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw SchemaError("", "expected an array");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string ptr = "/" + std::to_string(i);
    const Json& j = doc[i];
    const Json& id = Require(j, "scene_id", ptr);
    if (!id.is_string()) throw SchemaError(ptr + "/scene_id", "expected a string");
    if (!scene_id.empty() && id.get<std::string>() != scene_id) {
      throw SchemaError(ptr + "/scene_id", "expected '" + scene_id + "'");
    }
    const Json& cls = Require(j, "class", ptr);
    if (!cls.is_string()) throw SchemaError(ptr + "/class", "expected a string");
    Detection d;
    d.class_name = cls.get<std::string>();
    d.score = NumberField(j, "score", ptr);
    const std::vector<double> b = NumberArray(j, "box", 4, ptr);
    d.box = {b[0], b[1], b[2], b[3]};
    if (!d.box.IsValid()) throw SchemaError(ptr + "/box", "expected x1 < x2 and y1 < y2");
    d.distance = NumberField(j, "distance", ptr);
    if (d.distance < 0) throw SchemaError(ptr + "/distance", "expected a non-negative distance");
    const Json& src = Require(j, "source", ptr);
    if (src == "radar") {
      d.source = ProposalSource::kRadar;
    } else if (src == "image") {
      d.source = ProposalSource::kImage;
    } else {
      throw SchemaError(ptr + "/source", "expected \"radar\" or \"image\"");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> ReadDetections(const std::string& path, const std::string& scene_id) {
  const std::string text = ReadFile(path);
  try {
    return ParseDetections(text, scene_id);
  } catch (const SchemaError& e) {
    throw SchemaError(e.pointer(), path + ": " + std::string(e.what()).substr(e.pointer().size() + 2));
  }
}

std::vector<GroundTruth2D> ConvertAnnotations(const Scene& scene, DistanceMode mode) {
  std::vector<GroundTruth2D> out;
  for (const Annotation& a : scene.annotations) {
    const std::optional<Box2D> box = EnclosingBox2D(a.box, scene.calibration);
    if (!box) continue;
    const double distance = mode == DistanceMode::kCenter
                                ? PlanarDistance(a.box.center)
                                : PlanarDistance(NearestFaceMidpoint(a.box));
    out.push_back({*box, a.class_name, distance});
  }
  return out;
}

}  // namespace rcfuse
