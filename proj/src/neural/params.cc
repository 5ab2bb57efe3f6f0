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

#include "rcfuse/neural/params.h"

#include <bit>
#include <cmath>
#include <cstring>

#include "rcfuse/file_util.h"

namespace rcfuse::neural {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'F', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutF64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double F64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated data");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Param& ParamBlock::Add(std::string name, std::vector<int> shape) {
  if (Has(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("parameter '" + name + "' has a non-positive dim");
    n *= static_cast<std::size_t>(d);
  }
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamBlock::Get(std::string_view name) {
  for (Param& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
}

const Param& ParamBlock::Get(std::string_view name) const {
  for (const Param& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
}

bool ParamBlock::Has(std::string_view name) const {
  for (const Param& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParamBlock::ScalarCount() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.size();
  return n;
}

void ParamBlock::ZeroGrad() {
  for (Param& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void ParamBlock::AccumulateGrad(const ParamBlock& other) {
  if (other.params_.size() != params_.size()) {
    throw std::invalid_argument("AccumulateGrad: parameter layouts differ");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& dst = params_[i];
    const Param& src = other.params_[i];
    if (dst.name != src.name || dst.size() != src.size()) {
      throw std::invalid_argument("AccumulateGrad: mismatch at '" + dst.name + "'");
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst.grad[j] += src.grad[j];
  }
}

ParamBlock ParamBlock::CloneStructure() const {
  ParamBlock copy = *this;
  copy.ZeroGrad();
  return copy;
}

void SgdStep(ParamBlock& params, double learning_rate) {
  for (const Param& p : params.params()) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) throw NonFiniteGradient(p.name);
    }
  }
  for (Param& p : params.params()) {
    for (std::size_t i = 0; i < p.size(); ++i) p.value[i] -= learning_rate * p.grad[i];
  }
  params.ZeroGrad();
}

void MomentumSgd::Step(ParamBlock& params, double learning_rate) {
  if (momentum_ == 0.0) {
    SgdStep(params, learning_rate);
    return;
  }
  for (const Param& p : params.params()) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) throw NonFiniteGradient(p.name);
    }
  }
  if (velocity_.size() != params.params().size()) {
    velocity_.clear();
    for (const Param& p : params.params()) velocity_.emplace_back(p.size(), 0.0);
  }
  for (std::size_t k = 0; k < params.params().size(); ++k) {
    Param& p = params.params()[k];
    std::vector<double>& v = velocity_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] + p.grad[i];
      p.value[i] -= learning_rate * v[i];
    }
  }
  params.ZeroGrad();
}

void HeInit(Param& p, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (double& v : p.value) v = normal(rng);
}

std::vector<std::uint8_t> EncodeCheckpoint(const ParamBlock& params) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  PutU32(out, kCheckpointVersion);
  PutU32(out, static_cast<std::uint32_t>(params.params().size()));
  for (const Param& p : params.params()) {
    PutU32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    PutU32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) PutU32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value) PutF64(out, v);
  }
  return out;
}

ParamBlock DecodeCheckpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  ParamBlock block;
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.Str(r.U32());
    std::vector<int> shape(r.U32());
    for (int& d : shape) d = static_cast<int>(r.U32());
    Param& p = block.Add(std::move(name), std::move(shape));
    for (double& v : p.value) v = r.F64();
  }
  if (!r.AtEnd()) throw std::runtime_error("checkpoint: trailing bytes");
  return block;
}

void SaveCheckpoint(const ParamBlock& params, const std::string& path) {
  const std::vector<std::uint8_t> bytes = EncodeCheckpoint(params);
  WriteFileAtomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ParamBlock LoadCheckpoint(const std::string& path) {
  const std::string raw = ReadFile(path);
  return DecodeCheckpoint(std::vector<std::uint8_t>(raw.begin(), raw.end()));
}

}  // namespace rcfuse::neural
