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
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rcfuse/dataio.h"
#include "rcfuse/file_util.h"

namespace rcfuse {

namespace {

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
struct Glyph {
  char ch;
  std::uint8_t rows[5];
};

constexpr Glyph kFont[] = {
    {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}},
    {'3', {7, 1, 7, 1, 7}}, {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}},
    {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 2, 2, 2}}, {'8', {7, 5, 7, 5, 7}},
    {'9', {7, 5, 7, 1, 7}}, {'.', {0, 0, 0, 0, 2}}, {'m', {0, 0, 7, 7, 5}},
    {'-', {0, 0, 7, 0, 0}},
};

void SetPixel(Image& img, int x, int y, const std::array<std::uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::uint8_t* p = img.px(x, y);
  p[0] = c[0];
  p[1] = c[1];
  p[2] = c[2];
}

void DrawText(Image& img, int x, int y, const std::string& text,
              const std::array<std::uint8_t, 3>& c) {
  for (char ch : text) {
    for (const Glyph& g : kFont) {
      if (g.ch != ch) continue;
      for (int r = 0; r < 5; ++r) {
        for (int col = 0; col < 3; ++col) {
          if (g.rows[r] & (4 >> col)) SetPixel(img, x + col, y + r, c);
        }
      }
    }
    x += 4;
  }
}

std::string FormatDistance(double meters) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fm", meters);
  return buf;
}

}  // namespace

std::vector<OverlayBox> OverlayFromDetections(std::span<const Detection> dets,
                                              const AnchorTable& anchors) {
  std::vector<OverlayBox> out;
  for (const Detection& d : dets) {
    OverlayBox o;
    o.box = d.box;
    o.label = d.class_name;
    o.distance = d.distance;
    o.color = ClassColor(anchors.IndexOf(d.class_name));
    o.thickness = d.source == ProposalSource::kRadar ? 2 : 1;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<OverlayBox> OverlayFromGroundTruth(std::span<const GroundTruth2D> gts) {
  std::vector<OverlayBox> out;
  for (const GroundTruth2D& g : gts) {
    out.push_back({g.box, g.class_name, g.distance, {255, 255, 255}, 1});
  }
  return out;
}

Image RenderOverlayImage(const Scene& scene, std::span<const OverlayBox> boxes) {
  if (scene.image.empty()) throw std::invalid_argument("overlay: scene has no image");
  Image img = scene.image;
  const std::array<std::uint8_t, 3> kRadarDot = {255, 140, 0};
  for (const RadarSweep& sweep : scene.radar_sweeps) {
    for (const RadarDetection& d : sweep.detections) {
      const std::optional<Vec2> px = ProjectToImage(d.position, scene.calibration);
      if (!px) continue;
      const int cx = static_cast<int>(std::floor(px->x()));
      const int cy = static_cast<int>(std::floor(px->y()));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) SetPixel(img, cx + dx, cy + dy, kRadarDot);
      }
    }
  }
  for (const OverlayBox& o : boxes) {
    const Box2D b = ClipToImage(o.box, img.width, img.height);
    if (!b.IsValid()) continue;
    const int x0 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, img.height - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(b.x2)) - 1, 0, img.width - 1);
    const int y1 = std::clamp(static_cast<int>(std::ceil(b.y2)) - 1, 0, img.height - 1);
    for (int t = 0; t < o.thickness; ++t) {
      for (int x = x0; x <= x1; ++x) {
        SetPixel(img, x, std::min(y0 + t, y1), o.color);
        SetPixel(img, x, std::max(y1 - t, y0), o.color);
      }
      for (int y = y0; y <= y1; ++y) {
        SetPixel(img, std::min(x0 + t, x1), y, o.color);
        SetPixel(img, std::max(x1 - t, x0), y, o.color);
      }
    }
    const int ty = y0 >= 6 ? y0 - 6 : std::min(y0 + 2, img.height - 5);
    DrawText(img, x0 + 1, ty, FormatDistance(o.distance), o.color);
  }
  return img;
}

void RenderOverlay(const Scene& scene, std::span<const OverlayBox> boxes, const std::string& path) {
  const bool svg = path.size() >= 4 && path.compare(path.size() - 4, 4, ".svg") == 0;
  if (!svg) {
    WritePpm(RenderOverlayImage(scene, boxes), path);
    return;
  }
  const int w = scene.calibration.width;
  const int h = scene.calibration.height;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" "
     << "width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  if (scene.image_path) {
    os << "  <image x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" xlink:href=\""
       << *scene.image_path << "\"/>\n";
  } else {
    os << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"#606060\"/>\n";
  }
  for (const RadarSweep& sweep : scene.radar_sweeps) {
    for (const RadarDetection& d : sweep.detections) {
      const std::optional<Vec2> px = ProjectToImage(d.position, scene.calibration);
      if (!px) continue;
      os << "  <circle cx=\"" << px->x() << "\" cy=\"" << px->y()
         << "\" r=\"1.5\" fill=\"rgb(255,140,0)\"/>\n";
    }
  }
  for (const OverlayBox& o : boxes) {
    const Box2D b = ClipToImage(o.box, w, h);
    if (!b.IsValid()) continue;
    const std::string rgb = "rgb(" + std::to_string(o.color[0]) + "," + std::to_string(o.color[1]) +
                            "," + std::to_string(o.color[2]) + ")";
    os << "  <rect x=\"" << b.x1 << "\" y=\"" << b.y1 << "\" width=\"" << b.Width()
       << "\" height=\"" << b.Height() << "\" fill=\"none\" stroke=\"" << rgb
       << "\" stroke-width=\"" << o.thickness << "\"/>\n";
    os << "  <text x=\"" << b.x1 + 1 << "\" y=\"" << std::max(6.0, b.y1 - 1)
       << "\" font-size=\"6\" fill=\"" << rgb << "\">" << o.label << " "
       << FormatDistance(o.distance) << "</text>\n";
  }
  os << "</svg>\n";
  WriteFileAtomic(path, os.str());
}

}  // namespace rcfuse
