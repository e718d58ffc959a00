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

#ifndef DPADAMW_OPTIMIZERS_HPP_
#define DPADAMW_OPTIMIZERS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dpadamw/numerics.hpp"
#include "dpadamw/privatizer.hpp"

namespace dpadamw {

// Learning-rate schedules.
//   kConstant: eta_t = eta
//   kThm2:     eta_t = eta * sqrt((1 - beta2^t) / (1 - beta2))
//   kThm3:     eta_t = eta * (1 - beta1) * sqrt((1 - beta2^t) / (1 - beta2))
enum class Schedule { kConstant, kThm2, kThm3 };

std::string_view ScheduleName(Schedule s);
std::optional<Schedule> ParseSchedule(std::string_view name);

struct HyperParams {
  double eta = 1e-3;
  Schedule schedule = Schedule::kConstant;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  // Added to v_hat under the square root.
  double eps0 = 5e-8;
  // Floor on v_hat - Phi in the bias-corrected denominator.
  double gamma = 1e-8;
  ClipConfig clip{};
  std::int64_t total_steps = 1;

  void Validate() const;
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// eta_t for 1-based step t.
double LearningRate(const HyperParams& hp, std::int64_t t);
std::vector<double> LearningRateSchedule(const HyperParams& hp);

struct OptimizerState {
  ParamVector theta;
  ParamVector m;
  ParamVector v;
  std::int64_t t = 0;

  static OptimizerState Initial(ParamVector theta0);

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct StepDiagnostics {
  ParamVector m_hat;
  ParamVector v_hat;
  // Bias-corrected steppers only: fraction of coordinates where
  // max(v_hat - Phi, gamma) selected gamma.
  double clamp_fraction = 0.0;
  double update_norm = 0.0;
};

struct StepResult {
  OptimizerState state;
  StepDiagnostics diagnostics;
};

// DP-AdamW: theta <- theta - eta_t (m_hat / sqrt(v_hat + eps0) + lambda theta).
StepResult StepDpAdamW(const OptimizerState& state, const PrivatizedGradient& g,
                       const HyperParams& hp);
// DP-AdamW-BC: denominator sqrt(max(v_hat - phi, gamma)), no eps0.
StepResult StepDpAdamWBc(const OptimizerState& state, const PrivatizedGradient& g,
                         const HyperParams& hp, double phi);
StepResult StepDpAdam(const OptimizerState& state, const PrivatizedGradient& g,
                      const HyperParams& hp);
StepResult StepDpAdamBc(const OptimizerState& state, const PrivatizedGradient& g,
                        const HyperParams& hp, double phi);
// theta <- theta - eta_t g_tilde; moments untouched.
StepResult StepDpSgd(const OptimizerState& state, const PrivatizedGradient& g,
                     const HyperParams& hp);

// Non-private reference steppers fed a raw gradient. Written independently
// of the DP path so they can serve as oracles.
OptimizerState StepReferenceAdamW(const OptimizerState& state, const ParamVector& g,
                                  const HyperParams& hp);
OptimizerState StepReferenceAdam(const OptimizerState& state, const ParamVector& g,
                                 const HyperParams& hp);
OptimizerState StepReferenceSgd(const OptimizerState& state, const ParamVector& g,
                                const HyperParams& hp);

enum class OptimizerKind {
  kDpSgd,
  kDpAdam,
  kDpAdamBc,
  kDpAdamW,
  kDpAdamWBc,
  kSgd,
  kAdam,
  kAdamW,
};

struct OptimizerInfo {
  OptimizerKind kind;
  std::string_view name;
  // True when the stepper's only gradient input is a PrivatizedGradient.
  bool privatized_input;
  bool bias_corrected;
};

const std::vector<OptimizerInfo>& OptimizerRegistry();
std::optional<OptimizerInfo> FindOptimizer(std::string_view name);
const OptimizerInfo& InfoOf(OptimizerKind kind);

// Structural check: a stepper qualifies as postprocessing iff it accepts a
// PrivatizedGradient and cannot be handed raw gradients.
template <class Stepper, class... Extra>
inline constexpr bool kConsumesPrivatizedOnly =
    std::is_invocable_v<Stepper, const OptimizerState&, const PrivatizedGradient&,
                        const HyperParams&, Extra...> &&
    !std::is_invocable_v<Stepper, const OptimizerState&, const ParamVector&, const HyperParams&,
                         Extra...> &&
    !std::is_invocable_v<Stepper, const OptimizerState&, const GradMatrix&, const HyperParams&,
                         Extra...>;

}  // namespace dpadamw

#endif  // DPADAMW_OPTIMIZERS_HPP_
