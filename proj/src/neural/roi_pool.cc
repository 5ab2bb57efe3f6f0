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

#include "rcfuse/neural/roi_pool.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcfuse::neural {

namespace {

struct CellRange {
  int begin = 0;
  int end = 0;  // exclusive
};

CellRange BinCells(double start, double stop, int limit) {
  const int b = std::max(0, static_cast<int>(std::floor(start)));
  const int e = std::min(limit, static_cast<int>(std::ceil(stop)));
  return {b, e};
}

}  // namespace

RoiPoolResult RoiPool(const FeatureMap& fm, const Box2D& box, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("roi pool: bad output size");
  if (!box.IsValid()) throw std::invalid_argument("roi pool: invalid box");
  const double s = fm.stride;
  const double fx1 = box.x1 / s;
  const double fy1 = box.y1 / s;
  const double fx2 = box.x2 / s;
  const double fy2 = box.y2 / s;
  if (fx2 <= 0.0 || fy2 <= 0.0 || fx1 >= fm.width() || fy1 >= fm.height()) {
    throw std::invalid_argument("roi pool: box lies outside the feature map");
  }
  const int c = fm.channels();
  RoiPoolResult r{Tensor3(out_h, out_w, c), std::vector<long>(static_cast<std::size_t>(out_h) * out_w * c, -1)};
  const double bin_h = (fy2 - fy1) / out_h;
  const double bin_w = (fx2 - fx1) / out_w;
  for (int py = 0; py < out_h; ++py) {
    const CellRange rows = BinCells(fy1 + py * bin_h, fy1 + (py + 1) * bin_h, fm.height());
    for (int px = 0; px < out_w; ++px) {
      const CellRange cols = BinCells(fx1 + px * bin_w, fx1 + (px + 1) * bin_w, fm.width());
      double* out = r.values.pixel(py, px);
      long* arg = r.argmax.data() + r.values.Index(py, px, 0);
      if (rows.begin >= rows.end || cols.begin >= cols.end) continue;
      for (int ch = 0; ch < c; ++ch) {
        double best = 0.0;
        long best_idx = -1;
        for (int y = rows.begin; y < rows.end; ++y) {
          for (int x = cols.begin; x < cols.end; ++x) {
            const long idx = static_cast<long>(fm.values.Index(y, x, ch));
            const double v = fm.values.data[idx];
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        out[ch] = best;
        arg[ch] = best_idx;
      }
    }
  }
  return r;
}

void RoiPoolBackward(const RoiPoolResult& pooled, std::span<const double> grad_output,
                     Tensor3& grad_features) {
  for (std::size_t i = 0; i < pooled.argmax.size(); ++i) {
    const long idx = pooled.argmax[i];
    if (idx >= 0) grad_features.data[idx] += grad_output[i];
  }
}

}  // namespace rcfuse::neural
