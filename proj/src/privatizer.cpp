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

#include "dpadamw/privatizer.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "dpadamw/errors.hpp"

namespace dpadamw {

void ClipConfig::Validate() const {
  if (!(clip_norm > 0.0) || !std::isfinite(clip_norm)) {
    throw Error(ErrorCode::kInvalidArgument, "clip norm C must be > 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size B must be >= 1");
  if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
    throw Error(ErrorCode::kInvalidArgument, "noise multiplier sigma must be >= 0");
  }
}

GradMatrix ClipPerSample(const GradMatrix& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "clip norm C must be > 0");
  GradMatrix out = grads;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double scale = L2Norm(row) / clip_norm;
    if (scale <= 1.0) continue;
    for (double& x : row) x /= scale;
  }
  return out;
}

PrivatizedGradient Privatize(const GradMatrix& grads, const ClipConfig& cfg, RngStream& rng) {
  cfg.Validate();
  if (grads.rows() != cfg.batch_size) {
    throw Error(ErrorCode::kBatchSizeMismatch,
                "gradient matrix has " + std::to_string(grads.rows()) + " rows but B = " +
                    std::to_string(cfg.batch_size));
  }
  const std::size_t d = grads.cols();
  std::vector<double> sum(d, 0.0);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < grads.rows(); ++i) {
    const auto row = grads.row(i);
    const double scale = L2Norm(row) / cfg.clip_norm;
    if (scale > 1.0) {
      ++clipped;
      for (std::size_t j = 0; j < d; ++j) sum[j] += row[j] / scale;
    } else {
      for (std::size_t j = 0; j < d; ++j) sum[j] += row[j];
    }
  }
  if (cfg.noise_multiplier > 0.0) {
    const ParamVector noise = GaussianVector(rng, d, cfg.noise_multiplier * cfg.clip_norm);
    for (std::size_t j = 0; j < d; ++j) sum[j] += noise[j];
  }
  const auto b = static_cast<double>(cfg.batch_size);
  for (double& x : sum) x /= b;
  return {ParamVector(std::move(sum)), static_cast<double>(clipped) / b};
}

}  // namespace dpadamw
