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

#ifndef DPADAMW_PRIVATIZER_HPP_
#define DPADAMW_PRIVATIZER_HPP_

#include <cstddef>

#include "dpadamw/numerics.hpp"

namespace dpadamw {

struct ClipConfig {
  double clip_norm = 1.0;
  std::size_t batch_size = 1;
  double noise_multiplier = 0.0;

  // Throws kInvalidArgument unless C > 0, B >= 1 and sigma >= 0.
  void Validate() const;
  friend bool operator==(const ClipConfig&, const ClipConfig&) = default;
};

// Output of the Gaussian mechanism. Every DP optimizer consumes only this.
struct PrivatizedGradient {
  ParamVector g_tilde;
  // Fraction of per-sample rows whose norm exceeded C.
  double clip_fraction = 0.0;
};

// Scales each row g_i by 1 / max(1, ||g_i|| / C). Rows already inside the
// ball are copied unchanged.
GradMatrix ClipPerSample(const GradMatrix& grads, double clip_norm);

// (1/B) * (sum_i clip(g_i) + N(0, sigma^2 C^2 I)). The noise vector is drawn
// once from `rng` after the reduction; sigma = 0 draws nothing.
PrivatizedGradient Privatize(const GradMatrix& grads, const ClipConfig& cfg, RngStream& rng);

}  // namespace dpadamw

#endif  // DPADAMW_PRIVATIZER_HPP_
