//
// Copyright 2026 The dpadamw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPADAMW_NUMERICS_HPP_
#define DPADAMW_NUMERICS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpadamw {

// Dense parameter-space vector. Construction rejects empty or non-finite
// input; element access is unchecked.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  static ParamVector Zeros(std::size_t d);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> view() const noexcept { return values_; }
  std::span<double> view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool AllFinite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

// Row-major B x d matrix of per-sample gradients.
class GradMatrix {
 public:
  GradMatrix() = default;
  GradMatrix(std::size_t rows, std::size_t cols);
  GradMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static GradMatrix FromRows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const GradMatrix&, const GradMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Philox4x32-10 keyed by `seed`; the 128-bit counter is split into the
// 64-bit stream id and a 64-bit block index, so distinct stream ids never
// share a block.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // A fresh stream under the same seed. Used to hand each run or role in a
  // sweep its own sequence.
  RngStream Fork(std::uint64_t stream_id) const { return RngStream(seed_, stream_id); }

  std::uint64_t NextU64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform();
  // Standard normal via the Marsaglia polar method.
  double Gaussian();
  // Uniform integer in [0, n).
  std::uint64_t UniformIndex(std::uint64_t n);

  static std::array<std::uint32_t, 4> PhiloxBlock(std::array<std::uint32_t, 4> counter,
                                                  std::array<std::uint32_t, 2> key);

 private:
  void Refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

ParamVector GaussianVector(RngStream& rng, std::size_t d, double stddev);

double L2Norm(std::span<const double> v);
inline double L2Norm(const ParamVector& v) { return L2Norm(v.view()); }

double Dot(std::span<const double> a, std::span<const double> b);

}  // namespace dpadamw

#endif  // DPADAMW_NUMERICS_HPP_
