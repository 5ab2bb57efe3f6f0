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

#ifndef RCFUSE_NEURAL_TENSOR_H_
#define RCFUSE_NEURAL_TENSOR_H_

#include <cstddef>
#include <vector>

namespace rcfuse::neural {

// Dense height x width x channels grid, channels innermost.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t Index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c) { return data[Index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[Index(y, x, c)]; }
  double* pixel(int y, int x) { return data.data() + Index(y, x, 0); }
  const double* pixel(int y, int x) const { return data.data() + Index(y, x, 0); }

  bool SameShape(const Tensor3& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Backbone output; cell (i, j) covers image pixels [j*stride, (j+1)*stride)
// horizontally and likewise vertically.
struct FeatureMap {
  Tensor3 values;
  int stride = 1;

  int height() const { return values.height; }
  int width() const { return values.width; }
  int channels() const { return values.channels; }
};

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_TENSOR_H_
