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

#include "dpadamw/numerics.hpp"

#include <cmath>
#include <string>

#include "dpadamw/errors.hpp"

namespace dpadamw {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
constexpr int kPhiloxRounds = 10;

void RequireFinite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kInvalidArgument, std::string(what) + " contains a non-finite entry");
    }
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::kInvalidDimension, "ParamVector dimension must be >= 1");
  }
  RequireFinite(values_, "ParamVector");
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : ParamVector(std::vector<double>(values)) {}

ParamVector ParamVector::Zeros(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "ParamVector dimension must be >= 1");
  return ParamVector(std::vector<double>(d, 0.0));
}

bool ParamVector::AllFinite() const noexcept {
  for (double x : values_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

GradMatrix::GradMatrix(std::size_t rows, std::size_t cols)
    : GradMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

GradMatrix::GradMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) {
    throw Error(ErrorCode::kInvalidDimension, "GradMatrix needs B >= 1 and d >= 1");
  }
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimensionMismatch, "GradMatrix value count does not match B x d");
  }
  RequireFinite(values_, "GradMatrix");
}

GradMatrix GradMatrix::FromRows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw Error(ErrorCode::kInvalidDimension, "GradMatrix needs B >= 1 and d >= 1");
  }
  const std::size_t cols = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorCode::kDimensionMismatch, "ragged GradMatrix rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return GradMatrix(rows.size(), cols, std::move(flat));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

std::array<std::uint32_t, 4> RngStream::PhiloxBlock(std::array<std::uint32_t, 4> ctr,
                                                    std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < kPhiloxRounds; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void RngStream::Refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = PhiloxBlock(counter, key);
  buffered_words_ = 4;
  ++block_;
}

std::uint64_t RngStream::NextU64() {
  if (buffered_words_ < 2) Refill();
  const int idx = 4 - buffered_words_;
  buffered_words_ -= 2;
  return (std::uint64_t{buffer_[idx + 1]} << 32) | buffer_[idx];
}

double RngStream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double RngStream::Gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * Uniform() - 1.0;
    v = 2.0 * Uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

std::uint64_t RngStream::UniformIndex(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "UniformIndex needs n >= 1");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = NextU64();
  while (x >= limit) x = NextU64();
  return x % n;
}

ParamVector GaussianVector(RngStream& rng, std::size_t d, double stddev) {
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "gaussian vector needs d >= 1");
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
    throw Error(ErrorCode::kInvalidArgument, "gaussian stddev must be finite and >= 0");
  }
  std::vector<double> out(d, 0.0);
  if (stddev == 0.0) return ParamVector(std::move(out));
  for (double& x : out) x = stddev * rng.Gaussian();
  return ParamVector(std::move(out));
}

double L2Norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "dot of unequal lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace dpadamw
