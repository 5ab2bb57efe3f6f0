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

#include <filesystem>
#include <functional>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "rcfuse/dataio.h"
#include "rcfuse/file_util.h"

namespace rcfuse {
namespace {

namespace fs = std::filesystem;

const AnchorTable& Anchors() {
  static const AnchorTable t = AnchorTable::Default();
  return t;
}

SyntheticParams NoiseFree() {
  SyntheticParams p;
  p.sigma_pos = 0.0;
  p.dropout = 0.0;
  p.clutter_rate = 0.0;
  return p;
}

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rcfuse_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Mutate(const std::string& text, const std::function<void(nlohmann::ordered_json&)>& fn) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
  fn(j);
  return j.dump();
}

TEST_CASE("ppm round trip") {
  Image img(5, 3);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  CHECK(DecodePpm(EncodePpm(img)) == img);
  CHECK_THROWS(DecodePpm("P3\n1 1\n255\n0 0 0"));
  CHECK_THROWS(DecodePpm("P6\n2 2\n255\nabc"));
  const neural::Tensor3 t = ImageToTensor(img);
  CHECK(t.height == 3);
  CHECK(t.width == 5);
  CHECK(t.at(0, 1, 0) == doctest::Approx(21.0 / 255.0));
}

TEST_CASE("synthetic scenes are deterministic") {
  const SyntheticParams p;
  const Scene a = GenerateSyntheticScene(7, p, Anchors());
  const Scene b = GenerateSyntheticScene(7, p, Anchors());
  CHECK(SceneToJson(a) == SceneToJson(b));
  CHECK(a.image == b.image);
  CHECK(SceneToJson(a) != SceneToJson(GenerateSyntheticScene(8, p, Anchors())));
  CHECK(a.id == "synth_7");
}

TEST_CASE("synthetic scene properties") {
  const SyntheticParams p;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene s = GenerateSyntheticScene(seed, p, Anchors());
    CHECK(s.image.width == 256);
    CHECK(s.image.height == 128);
    CHECK(s.annotations.size() >= 1);
    CHECK(s.annotations.size() <= 4);
    const auto gts = ConvertAnnotations(s);
    CHECK(gts.size() == s.annotations.size());
    for (const Annotation& a : s.annotations) {
      const double d = PlanarDistance(a.box.center);
      CHECK(d >= 10.0 - 1e-9);
      CHECK(d <= 30.0 + 1e-9);
      const int c = Anchors().IndexOf(a.class_name);
      REQUIRE(c >= 0);
      CHECK(a.box.width == Anchors().classes()[c].size.width);
      CHECK(a.box.length == Anchors().classes()[c].size.length);
      CHECK(a.box.center.z() == doctest::Approx(a.box.height / 2));
      // Fully visible: the unclipped projection stays inside the image.
      for (const Vec3& corner : Box3DCorners(a.box)) {
        const auto px = ProjectToImage(corner, s.calibration);
        REQUIRE(px);
        CHECK(px->x() >= 0);
        CHECK(px->x() <= 256);
        CHECK(px->y() >= 0);
        CHECK(px->y() <= 128);
      }
    }
  }
}

TEST_CASE("noise-free radar sits on the nearest face") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = GenerateSyntheticScene(seed, NoiseFree(), Anchors());
    REQUIRE(s.radar_sweeps.size() == 1);
    const auto& dets = s.radar_sweeps[0].detections;
    REQUIRE(dets.size() == s.annotations.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      CHECK(PlanarDistance(dets[i].position) == PlanarDistance(NearestFaceMidpoint(s.annotations[i].box)));
    }
  }
}

TEST_CASE("full dropout leaves only clutter") {
  SyntheticParams p = NoiseFree();
  p.dropout = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(GenerateSyntheticScene(seed, p, Anchors()).radar_sweeps[0].detections.empty());
  }
}

TEST_CASE("synthetic parameter validation") {
  SyntheticParams p;
  p.width = 100;
  CHECK_THROWS_AS(GenerateSyntheticScene(0, p, Anchors()), std::invalid_argument);
  p = {};
  p.min_objects = 5;
  CHECK_THROWS_AS(GenerateSyntheticScene(0, p, Anchors()), std::invalid_argument);
  p = {};
  p.dropout = 1.5;
  CHECK_THROWS_AS(GenerateSyntheticScene(0, p, Anchors()), std::invalid_argument);
  p = {};
  p.classes = {"tram"};
  CHECK_THROWS_AS(GenerateSyntheticScene(0, p, Anchors()), std::invalid_argument);
}

TEST_CASE("scene json round trip") {
  const Scene s = GenerateSyntheticScene(3, SyntheticParams{}, Anchors());
  const std::string text = SceneToJson(s);
  const Scene back = ParseScene(text, Anchors().Names());
  CHECK(SceneToJson(back) == text);
  CHECK(back.image == s.image);
  CHECK(back.annotations.size() == s.annotations.size());
  CHECK(back.calibration.fx == s.calibration.fx);
}

TEST_CASE("scene files with an external image") {
  const fs::path dir = TempDir("files");
  Scene s = GenerateSyntheticScene(4, SyntheticParams{}, Anchors());
  s.image_path = s.id + ".ppm";
  WriteScene(s, (dir / "scene.json").string());
  CHECK(fs::exists(dir / "synth_4.ppm"));
  const Scene back = ReadScene((dir / "scene.json").string(), Anchors().Names());
  CHECK(back.image == s.image);
  CHECK(SceneToJson(back) == SceneToJson(s));
  const Scene lazy = ReadScene((dir / "scene.json").string(), Anchors().Names(), false);
  CHECK(lazy.image.empty());
  fs::remove(dir / "synth_4.ppm");
  CHECK_THROWS(ReadScene((dir / "scene.json").string(), Anchors().Names()));
}

TEST_CASE("schema errors point at the offending field") {
  const std::string text = SceneToJson(GenerateSyntheticScene(5, SyntheticParams{}, Anchors()));
  auto pointer_of = [](const std::string& doc) -> std::string {
    try {
      ParseScene(doc, Anchors().Names());
    } catch (const SchemaError& e) {
      return e.pointer();
    }
    return "<none>";
  };
  CHECK(pointer_of(Mutate(text, [](auto& j) { j.erase("calibration"); })) == "/calibration");
  CHECK(pointer_of(Mutate(text, [](auto& j) { j["annotations"][0]["class"] = "tram"; })) ==
        "/annotations/0/class");
  CHECK(pointer_of(Mutate(text, [](auto& j) { j["schema_version"] = 99; })) == "/schema_version");
  CHECK(pointer_of(Mutate(text, [](auto& j) { j["calibration"]["fx"] = -1.0; })).starts_with("/calibration"));
  CHECK(pointer_of(Mutate(text, [](auto& j) { j["annotations"][0]["size"] = {1, 2}; })) ==
        "/annotations/0/size");
  CHECK(pointer_of("not json") == "");
  try {
    ParseScene(Mutate(text, [](auto& j) { j["annotations"][0]["class"] = "tram"; }), Anchors().Names());
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("tram") != std::string::npos);
  }
}

TEST_CASE("annotation conversion") {
  Scene s;
  s.calibration = CameraCalibration::ForwardFacing(100, 256, 128, 1.5);
  s.annotations.push_back({"car", Box3D::Make({4, 3, 0.85}, 1.9, 1.0, 1.7, M_PI / 2), std::nullopt});
  s.annotations.push_back({"car", Box3D::Make({-10, 0, 0.85}, 1.9, 4.6, 1.7, 0), std::nullopt});
  const auto gts = ConvertAnnotations(s);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].distance == doctest::Approx(5.0));
  CHECK(gts[0].class_name == "car");
  s.calibration = CameraCalibration::ForwardFacing(256, 256, 128, 1.5);
  s.annotations = {{"car", Box3D::Make({10, 0, 1.5}, 2, 2, 2, 0), std::nullopt}};
  const auto sym = ConvertAnnotations(s);
  REQUIRE(sym.size() == 1);
  CHECK(128 - sym[0].box.x1 == doctest::Approx(sym[0].box.x2 - 128));
  CHECK(ConvertAnnotations(s, DistanceMode::kNearestFace)[0].distance == doctest::Approx(9.0));
}

TEST_CASE("detections json round trip and validation") {
  const std::vector<Detection> dets = {{{1, 2, 30, 40}, "car", 0.875, 12.5, ProposalSource::kRadar},
                                       {{5, 6, 7, 8}, "bus", 0.25, 40.125, ProposalSource::kImage}};
  const std::string text = DetectionsToJson("s1", dets);
  const auto back = ParseDetections(text, "s1");
  REQUIRE(back.size() == 2);
  CHECK(back[0].box == dets[0].box);
  CHECK(back[0].source == ProposalSource::kRadar);
  CHECK(back[1].distance == 40.125);
  CHECK(DetectionsToJson("s1", back) == text);
  CHECK_THROWS_AS(ParseDetections(text, "s2"), SchemaError);
  try {
    ParseDetections(Mutate(text, [](auto& j) { j[1]["box"] = {5, 6, 4, 8}; }));
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/1/box");
  }
  CHECK(ParseDetections("[]").empty());
}

TEST_CASE("overlay keeps the image size and draws radar returns") {
  Scene s = GenerateSyntheticScene(6, NoiseFree(), Anchors());
  const Image img = RenderOverlayImage(s, {});
  CHECK(img.width == s.image.width);
  CHECK(img.height == s.image.height);
  const auto px = ProjectToImage(s.radar_sweeps[0].detections[0].position, s.calibration);
  REQUIRE(px);
  const std::uint8_t* p = img.px(static_cast<int>(px->x()), static_cast<int>(px->y()));
  CHECK(p[0] == 255);
  CHECK(p[1] == 140);
  CHECK(p[2] == 0);
  s.radar_sweeps.clear();
  CHECK(RenderOverlayImage(s, {}) == s.image);
}

TEST_CASE("a full-image box is drawn on the border") {
  Scene s;
  s.image = Image(64, 32);
  s.calibration = CameraCalibration::ForwardFacing(64, 64, 32, 1.5);
  const std::vector<OverlayBox> boxes = {{{-10, -10, 100, 100}, "car", 3.0, {10, 200, 30}, 1}};
  const Image img = RenderOverlayImage(s, boxes);
  for (auto [x, y] : std::vector<std::pair<int, int>>{{0, 0}, {63, 0}, {0, 31}, {63, 31}}) {
    const std::uint8_t* p = img.px(x, y);
    CHECK(p[0] == 10);
    CHECK(p[1] == 200);
    CHECK(p[2] == 30);
  }
  CHECK(img.px(32, 16)[1] == 0);
}

TEST_CASE("overlay files") {
  const fs::path dir = TempDir("overlay");
  Scene s = GenerateSyntheticScene(9, SyntheticParams{}, Anchors());
  s.image_path = "synth_9.ppm";
  WriteScene(s, (dir / "synth_9.json").string());
  const auto boxes = OverlayFromGroundTruth(ConvertAnnotations(s));
  RenderOverlay(s, boxes, (dir / "out.ppm").string());
  const Image img = ReadPpm((dir / "out.ppm").string());
  CHECK(img.width == 256);
  RenderOverlay(s, boxes, (dir / "out.svg").string());
  const std::string svg = ReadFile((dir / "out.svg").string());
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<rect") != std::string::npos);
}

}  // namespace
}  // namespace rcfuse
