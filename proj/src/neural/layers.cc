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

#include "rcfuse/neural/layers.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcfuse::neural {

namespace {

void CheckConvShapes(const Tensor3& input, const Param& weight, const Param& bias) {
  if (weight.shape.size() != 4 || weight.shape[0] != weight.shape[1] ||
      weight.shape[0] % 2 == 0) {
    throw std::invalid_argument("conv '" + weight.name + "': weight must be [k, k, in, out]");
  }
  if (weight.shape[2] != input.channels) {
    throw std::invalid_argument("conv '" + weight.name + "': input channel mismatch");
  }
  if (bias.shape.size() != 1 || bias.shape[0] != weight.shape[3]) {
    throw std::invalid_argument("conv '" + weight.name + "': bias shape mismatch");
  }
}

}  // namespace

Tensor3 Conv2dForward(const Tensor3& input, const Param& weight, const Param& bias) {
  CheckConvShapes(input, weight, bias);
  const int k = weight.shape[0];
  const int pad = k / 2;
  const int cin = weight.shape[2];
  const int cout = weight.shape[3];
  Tensor3 out(input.height, input.width, cout);
  const double* w = weight.value.data();
  for (int y = 0; y < input.height; ++y) {
    for (int x = 0; x < input.width; ++x) {
      double* o = out.pixel(y, x);
      std::copy(bias.value.begin(), bias.value.end(), o);
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= input.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= input.width) continue;
          const double* ip = input.pixel(yy, xx);
          const double* wp = w + static_cast<std::size_t>(ky * k + kx) * cin * cout;
          for (int c = 0; c < cin; ++c) {
            const double v = ip[c];
            if (v == 0.0) continue;
            const double* wr = wp + static_cast<std::size_t>(c) * cout;
            for (int oc = 0; oc < cout; ++oc) o[oc] += v * wr[oc];
          }
        }
      }
    }
  }
  return out;
}

Tensor3 Conv2dBackward(const Tensor3& input, const Tensor3& grad_output, Param& weight,
                       Param& bias, bool need_input_grad) {
  CheckConvShapes(input, weight, bias);
  const int k = weight.shape[0];
  const int pad = k / 2;
  const int cin = weight.shape[2];
  const int cout = weight.shape[3];
  Tensor3 grad_in;
  if (need_input_grad) grad_in = Tensor3(input.height, input.width, cin);
  const double* w = weight.value.data();
  double* gw = weight.grad.data();
  for (int y = 0; y < input.height; ++y) {
    for (int x = 0; x < input.width; ++x) {
      const double* go = grad_output.pixel(y, x);
      bool any = false;
      for (int oc = 0; oc < cout; ++oc) {
        if (go[oc] != 0.0) {
          any = true;
          bias.grad[oc] += go[oc];
        }
      }
      if (!any) continue;
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= input.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= input.width) continue;
          const double* ip = input.pixel(yy, xx);
          const std::size_t off = static_cast<std::size_t>(ky * k + kx) * cin * cout;
          double* gi = need_input_grad ? grad_in.pixel(yy, xx) : nullptr;
          for (int c = 0; c < cin; ++c) {
            const double v = ip[c];
            const double* wr = w + off + static_cast<std::size_t>(c) * cout;
            double* gwr = gw + off + static_cast<std::size_t>(c) * cout;
            double acc = 0.0;
            for (int oc = 0; oc < cout; ++oc) {
              acc += go[oc] * wr[oc];
              gwr[oc] += v * go[oc];
            }
            if (gi) gi[c] += acc;
          }
        }
      }
    }
  }
  return grad_in;
}

void ReluInPlace(Tensor3& t) { ReluInPlace(t.data); }

void ReluInPlace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void ReluBackwardInPlace(const Tensor3& output, Tensor3& grad) {
  ReluBackwardInPlace(output.data, grad.data);
}

void ReluBackwardInPlace(std::span<const double> output, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  }
}

Tensor3 AvgPool2Forward(const Tensor3& input) {
  if (input.height % 2 != 0 || input.width % 2 != 0) {
    throw std::invalid_argument("avg pool: input dims must be even");
  }
  Tensor3 out(input.height / 2, input.width / 2, input.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double* o = out.pixel(y, x);
      const double* a = input.pixel(2 * y, 2 * x);
      const double* b = input.pixel(2 * y, 2 * x + 1);
      const double* c = input.pixel(2 * y + 1, 2 * x);
      const double* d = input.pixel(2 * y + 1, 2 * x + 1);
      for (int ch = 0; ch < input.channels; ++ch) {
        o[ch] = 0.25 * (a[ch] + b[ch] + c[ch] + d[ch]);
      }
    }
  }
  return out;
}

Tensor3 AvgPool2Backward(const Tensor3& grad_output) {
  Tensor3 g(grad_output.height * 2, grad_output.width * 2, grad_output.channels);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double* go = grad_output.pixel(y / 2, x / 2);
      double* gi = g.pixel(y, x);
      for (int ch = 0; ch < g.channels; ++ch) gi[ch] = 0.25 * go[ch];
    }
  }
  return g;
}

std::vector<double> LinearForward(std::span<const double> input, const Param& weight,
                                  const Param& bias) {
  const int out_dim = weight.shape.at(0);
  const int in_dim = weight.shape.at(1);
  if (static_cast<int>(input.size()) != in_dim) {
    throw std::invalid_argument("linear '" + weight.name + "': input size mismatch");
  }
  std::vector<double> out(bias.value);
  for (int o = 0; o < out_dim; ++o) {
    const double* wr = weight.value.data() + static_cast<std::size_t>(o) * in_dim;
    double acc = 0.0;
    for (int i = 0; i < in_dim; ++i) acc += wr[i] * input[i];
    out[o] += acc;
  }
  return out;
}

std::vector<double> LinearBackward(std::span<const double> input,
                                   std::span<const double> grad_output, Param& weight,
                                   Param& bias) {
  const int out_dim = weight.shape.at(0);
  const int in_dim = weight.shape.at(1);
  std::vector<double> grad_in(in_dim, 0.0);
  for (int o = 0; o < out_dim; ++o) {
    const double g = grad_output[o];
    if (g == 0.0) continue;
    bias.grad[o] += g;
    const double* wr = weight.value.data() + static_cast<std::size_t>(o) * in_dim;
    double* gwr = weight.grad.data() + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      gwr[i] += g * input[i];
      grad_in[i] += g * wr[i];
    }
  }
  return grad_in;
}

double Logistic(double x) {
  const double z = std::clamp(x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> SoftmaxBackward(std::span<const double> probs,
                                    std::span<const double> grad_probs) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] * (grad_probs[i] - dot);
  return g;
}

}  // namespace rcfuse::neural
