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

#ifndef RCFUSE_DATAIO_H_
#define RCFUSE_DATAIO_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcfuse/detection.h"
#include "rcfuse/geometry.h"
#include "rcfuse/neural/tensor.h"
#include "rcfuse/proposals.h"
#include "rcfuse/radar.h"

namespace rcfuse {

inline constexpr int kSceneSchemaVersion = 1;

// Thrown for malformed scene documents; `pointer()` is the JSON pointer of
// the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// 8-bit RGB, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
  bool empty() const { return rgb.empty(); }
  std::uint8_t* px(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Binary PPM (P6, maxval 255).
std::string EncodePpm(const Image& image);
Image DecodePpm(const std::string& bytes);
void WritePpm(const Image& image, const std::string& path);
Image ReadPpm(const std::string& path);

// H x W x 3 tensor scaled to [0, 1].
neural::Tensor3 ImageToTensor(const Image& image);

struct Annotation {
  std::string class_name;
  Box3D box;
  std::optional<Vec2> velocity;
};

struct SceneMetadata {
  int requested_objects = 0;
  int placed_objects = 0;
};

struct Scene {
  std::string id;
  // As stored in the document, relative to the scene file's directory. When
  // absent the pixels are serialized inline.
  std::optional<std::string> image_path;
  Image image;
  CameraCalibration calibration;
  std::vector<RadarSweep> radar_sweeps;
  std::vector<Annotation> annotations;
  std::optional<SceneMetadata> metadata;

  // Latest sweep time, or 0 without sweeps.
  double ReferenceTime() const;
};

// Serializes to the versioned scene schema. Reals use shortest round-trip
// formatting, so ParseScene(SceneToJson(s)) reproduces s exactly.
std::string SceneToJson(const Scene& scene);
// `base_dir` resolves a relative image path; pixels are loaded when
// `load_image` is set. Annotation classes must appear in `classes`.
Scene ParseScene(const std::string& text, const std::vector<std::string>& classes,
                 const std::string& base_dir = ".", bool load_image = true);

Scene ReadScene(const std::string& path, const std::vector<std::string>& classes,
                bool load_image = true);
// Writes the JSON atomically. When the scene has an image_path and pixels,
// the image is written next to the JSON as well.
void WriteScene(const Scene& scene, const std::string& path);

// Detections document: [{"scene_id", "class", "score", "box": [x1, y1, x2, y2],
// "distance", "source"}, ...].
std::string DetectionsToJson(const std::string& scene_id, std::span<const Detection> dets);
// Throws SchemaError for malformed entries. `scene_id`, when non-empty, must
// match every entry.
std::vector<Detection> ParseDetections(const std::string& text, const std::string& scene_id = "");
std::vector<Detection> ReadDetections(const std::string& path, const std::string& scene_id = "");

enum class DistanceMode { kCenter, kNearestFace };

// Enclosing 2D box and planar distance per annotation; annotations that do not
// project into the image are dropped.
std::vector<GroundTruth2D> ConvertAnnotations(const Scene& scene,
                                              DistanceMode mode = DistanceMode::kCenter);

struct SyntheticParams {
  int width = 256;
  int height = 128;
  double focal = 256.0;
  double camera_height = 1.5;
  int min_objects = 1;
  int max_objects = 4;
  double min_distance = 10.0;  // planar distance of the box center, meters
  double max_distance = 30.0;
  // Empty: every class in the anchor table, uniformly.
  std::vector<std::string> classes;
  std::vector<double> class_weights;
  std::vector<double> yaw_choices = {0.0, 1.5707963267948966};
  double sigma_pos = 0.3;    // meters, per ground-plane axis
  double sigma_dist = 0.0;   // meters, along the line of sight
  double dropout = 0.1;
  double clutter_rate = 1.0; // Poisson mean of background returns per scene
  double max_overlap = 0.25; // 2D intersection over the smaller box area
  int max_retries = 64;
  double pixel_noise = 10.0;

  void Validate() const;
};

// Places non-overlapping objects on the ground plane fully inside the image,
// renders flat-shaded class-colored boxes over a textured background, and
// emits one radar return per object at its nearest face midpoint (plus
// noise and dropout) together with Poisson clutter. Object sizes are the
// anchor table's class sizes.
Scene GenerateSyntheticScene(std::uint64_t seed, const SyntheticParams& params,
                             const AnchorTable& anchors);

// Display color for a class index.
std::array<std::uint8_t, 3> ClassColor(int class_index);

struct OverlayBox {
  Box2D box;
  std::string label;
  double distance = 0.0;
  std::array<std::uint8_t, 3> color{255, 255, 255};
  int thickness = 1;
};

std::vector<OverlayBox> OverlayFromDetections(std::span<const Detection> dets,
                                              const AnchorTable& anchors);
std::vector<OverlayBox> OverlayFromGroundTruth(std::span<const GroundTruth2D> gts);

// Draws boxes, their distances in meters and projected radar returns on a
// copy of the scene image.
Image RenderOverlayImage(const Scene& scene, std::span<const OverlayBox> boxes);
// ".svg" paths get vector output referencing the scene image; anything else
// gets a binary PPM.
void RenderOverlay(const Scene& scene, std::span<const OverlayBox> boxes, const std::string& path);

}  // namespace rcfuse

#endif  // RCFUSE_DATAIO_H_
