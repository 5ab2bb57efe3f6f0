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

#ifndef RCFUSE_NEURAL_PARAMS_H_
#define RCFUSE_NEURAL_PARAMS_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rcfuse::neural {

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

// Named parameter arrays with gradient buffers of identical shape. Insertion
// order is stable and defines checkpoint order.
class ParamBlock {
 public:
  // Zero-initialized. Throws std::invalid_argument on a duplicate name.
  Param& Add(std::string name, std::vector<int> shape);
  Param& Get(std::string_view name);
  const Param& Get(std::string_view name) const;
  bool Has(std::string_view name) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t ScalarCount() const;

  void ZeroGrad();
  // Adds `other`'s gradients into this block. Layouts must match.
  void AccumulateGrad(const ParamBlock& other);
  // Copies the block with zeroed gradients; used for per-item gradient buffers.
  ParamBlock CloneStructure() const;

 private:
  std::vector<Param> params_;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter '" + param + "'"), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

// p <- p - lr * g for every parameter, then zeroes gradients. Checks every
// gradient first; on a non-finite entry nothing is updated and
// NonFiniteGradient names the parameter.
void SgdStep(ParamBlock& params, double learning_rate);

// Heavy-ball momentum on top of SgdStep semantics; momentum 0 reduces to SgdStep.
class MomentumSgd {
 public:
  explicit MomentumSgd(double momentum) : momentum_(momentum) {}
  void Step(ParamBlock& params, double learning_rate);

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

// Fills with N(0, 2 / fan_in).
void HeInit(Param& p, int fan_in, std::mt19937_64& rng);

// Binary checkpoint, little-endian:
//   "RCFP" | u32 version (1) | u32 count |
//   per param: u32 name_len | name | u32 ndims | u32 dims[ndims] | f64 data[]
std::vector<std::uint8_t> EncodeCheckpoint(const ParamBlock& params);
ParamBlock DecodeCheckpoint(const std::vector<std::uint8_t>& bytes);
void SaveCheckpoint(const ParamBlock& params, const std::string& path);
ParamBlock LoadCheckpoint(const std::string& path);

}  // namespace rcfuse::neural

#endif  // RCFUSE_NEURAL_PARAMS_H_
