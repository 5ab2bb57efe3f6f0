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

#ifndef RCFUSE_NEURAL_LAYERS_H_
#define RCFUSE_NEURAL_LAYERS_H_

#include <span>
#include <vector>

#include "rcfuse/neural/params.h"
#include "rcfuse/neural/tensor.h"

namespace rcfuse::neural {

// Stride-1 convolution with zero "same" padding. `weight` has shape
// [k, k, in, out] and `bias` [out]; k must be odd.
Tensor3 Conv2dForward(const Tensor3& input, const Param& weight, const Param& bias);
// Accumulates into weight.grad / bias.grad. Returns dL/dinput unless
// `need_input_grad` is false, in which case an empty tensor comes back.
Tensor3 Conv2dBackward(const Tensor3& input, const Tensor3& grad_output, Param& weight,
                       Param& bias, bool need_input_grad = true);

void ReluInPlace(Tensor3& t);
void ReluInPlace(std::vector<double>& v);
// Masks `grad` where the forward output was not positive.
void ReluBackwardInPlace(const Tensor3& output, Tensor3& grad);
void ReluBackwardInPlace(std::span<const double> output, std::span<double> grad);

// 2x2 average pooling with stride 2; height and width must be even.
Tensor3 AvgPool2Forward(const Tensor3& input);
Tensor3 AvgPool2Backward(const Tensor3& grad_output);

// y = W x + b with W of shape [out, in].
std::vector<double> LinearForward(std::span<const double> input, const Param& weight,
                                  const Param& bias);
std::vector<double> LinearBackward(std::span<const double> input,
                                   std::span<const double> grad_output, Param& weight,
                                   Param& bias);

// Logistic with the input clamped to [-30, 30].
double Logistic(double x);
std::vector<double> Softmax(std::span<const double> logits);
// dL/dlogits from dL/dprobs for p = softmax(logits).
std::vector<double> SoftmaxBackward(std::span<const double> probs,
                                    std::span<const double> grad_probs);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_LAYERS_H_
