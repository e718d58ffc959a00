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

#include "dpadamw/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpadamw/errors.hpp"

namespace dpadamw {
namespace {

void CheckStep(const OptimizerState& state, std::size_t grad_dim, const HyperParams& hp) {
  if (grad_dim != state.theta.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "gradient dimension " + std::to_string(grad_dim) + " != parameter dimension " +
                    std::to_string(state.theta.size()));
  }
  if (state.m.size() != state.theta.size() || state.v.size() != state.theta.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer state moments do not match theta");
  }
  if (state.t >= hp.total_steps) {
    throw Error(ErrorCode::kStepBudgetExhausted,
                "step budget exhausted: t = " + std::to_string(state.t) +
                    " >= T = " + std::to_string(hp.total_steps));
  }
}

enum class Denominator { kEps0, kBiasCorrected };

// Shared body of the four Adam-family DP steppers.
StepResult AdamFamilyStep(const OptimizerState& state, std::span<const double> g,
                          const HyperParams& hp, double weight_decay, Denominator denom,
                          double phi) {
  hp.Validate();
  CheckStep(state, g.size(), hp);
  const std::size_t d = g.size();
  const std::int64_t t = state.t + 1;
  const double eta_t = LearningRate(hp, t);
  const double m_corr = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(hp.beta2, static_cast<double>(t));

  std::vector<double> m(d), v(d), m_hat(d), v_hat(d), theta(d);
  std::size_t clamped = 0;
  double update_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g[i];
    v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * (g[i] * g[i]);
    m_hat[i] = m[i] / m_corr;
    v_hat[i] = v[i] / v_corr;
    double root = 0.0;
    if (denom == Denominator::kEps0) {
      root = std::sqrt(v_hat[i] + hp.eps0);
    } else {
      const double corrected = v_hat[i] - phi;
      if (corrected < hp.gamma) ++clamped;
      root = std::sqrt(std::max(corrected, hp.gamma));
    }
    const double delta = eta_t * (m_hat[i] / root + weight_decay * state.theta[i]);
    theta[i] = state.theta[i] - delta;
    update_sq += delta * delta;
  }

  StepResult out{
      OptimizerState{ParamVector(std::move(theta)), ParamVector(std::move(m)),
                     ParamVector(std::move(v)), t},
      StepDiagnostics{ParamVector(std::move(m_hat)), ParamVector(std::move(v_hat)),
                      static_cast<double>(clamped) / static_cast<double>(d),
                      std::sqrt(update_sq)},
  };
  return out;
}

void CheckPhi(double phi) {
  if (!(phi >= 0.0) || !std::isfinite(phi)) {
    throw Error(ErrorCode::kInvalidArgument, "bias correction term Phi must be finite and >= 0");
  }
}

}  // namespace

std::string_view ScheduleName(Schedule s) {
  switch (s) {
    case Schedule::kConstant: return "constant";
    case Schedule::kThm2: return "thm2";
    case Schedule::kThm3: return "thm3";
  }
  return "constant";
}

std::optional<Schedule> ParseSchedule(std::string_view name) {
  if (name == "constant") return Schedule::kConstant;
  if (name == "thm2") return Schedule::kThm2;
  if (name == "thm3") return Schedule::kThm3;
  return std::nullopt;
}

void HyperParams::Validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight decay must be >= 0");
  if (!(eps0 >= 0.0) || !std::isfinite(eps0)) fail("eps0 must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be > 0");
  if (total_steps < 1) fail("total steps T must be >= 1");
  clip.Validate();
}

double LearningRate(const HyperParams& hp, std::int64_t t) {
  switch (hp.schedule) {
    case Schedule::kConstant:
      return hp.eta;
    case Schedule::kThm2:
      return hp.eta *
             std::sqrt((1.0 - std::pow(hp.beta2, static_cast<double>(t))) / (1.0 - hp.beta2));
    case Schedule::kThm3:
      return hp.eta * (1.0 - hp.beta1) *
             std::sqrt((1.0 - std::pow(hp.beta2, static_cast<double>(t))) / (1.0 - hp.beta2));
  }
  return hp.eta;
}

std::vector<double> LearningRateSchedule(const HyperParams& hp) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hp.total_steps));
  for (std::int64_t t = 1; t <= hp.total_steps; ++t) out.push_back(LearningRate(hp, t));
  return out;
}

OptimizerState OptimizerState::Initial(ParamVector theta0) {
  const std::size_t d = theta0.size();
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "theta0 must have d >= 1");
  return OptimizerState{std::move(theta0), ParamVector::Zeros(d), ParamVector::Zeros(d), 0};
}

StepResult StepDpAdamW(const OptimizerState& state, const PrivatizedGradient& g,
                       const HyperParams& hp) {
  return AdamFamilyStep(state, g.g_tilde.view(), hp, hp.weight_decay, Denominator::kEps0, 0.0);
}

StepResult StepDpAdamWBc(const OptimizerState& state, const PrivatizedGradient& g,
                         const HyperParams& hp, double phi) {
  CheckPhi(phi);
  return AdamFamilyStep(state, g.g_tilde.view(), hp, hp.weight_decay,
                        Denominator::kBiasCorrected, phi);
}

StepResult StepDpAdam(const OptimizerState& state, const PrivatizedGradient& g,
                      const HyperParams& hp) {
  return AdamFamilyStep(state, g.g_tilde.view(), hp, 0.0, Denominator::kEps0, 0.0);
}

StepResult StepDpAdamBc(const OptimizerState& state, const PrivatizedGradient& g,
                        const HyperParams& hp, double phi) {
  CheckPhi(phi);
  return AdamFamilyStep(state, g.g_tilde.view(), hp, 0.0, Denominator::kBiasCorrected, phi);
}

StepResult StepDpSgd(const OptimizerState& state, const PrivatizedGradient& g,
                     const HyperParams& hp) {
  hp.Validate();
  CheckStep(state, g.g_tilde.size(), hp);
  const std::int64_t t = state.t + 1;
  const double eta_t = LearningRate(hp, t);
  std::vector<double> theta(state.theta.values());
  double update_sq = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double delta = eta_t * g.g_tilde[i];
    theta[i] -= delta;
    update_sq += delta * delta;
  }
  StepResult out{OptimizerState{ParamVector(std::move(theta)), state.m, state.v, t},
                 StepDiagnostics{state.m, state.v, 0.0, std::sqrt(update_sq)}};
  return out;
}

OptimizerState StepReferenceAdamW(const OptimizerState& state, const ParamVector& g,
                                  const HyperParams& hp) {
  hp.Validate();
  CheckStep(state, g.size(), hp);
  OptimizerState next = state;
  next.t = state.t + 1;
  const double lr = LearningRate(hp, next.t);
  const double b1t = std::pow(hp.beta1, static_cast<double>(next.t));
  const double b2t = std::pow(hp.beta2, static_cast<double>(next.t));
  for (std::size_t i = 0; i < g.size(); ++i) {
    next.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g[i];
    next.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * (g[i] * g[i]);
    const double mh = next.m[i] / (1.0 - b1t);
    const double vh = next.v[i] / (1.0 - b2t);
    next.theta[i] = state.theta[i] - lr * (mh / std::sqrt(vh + hp.eps0) +
                                           hp.weight_decay * state.theta[i]);
  }
  return next;
}

OptimizerState StepReferenceAdam(const OptimizerState& state, const ParamVector& g,
                                 const HyperParams& hp) {
  HyperParams no_decay = hp;
  no_decay.weight_decay = 0.0;
  return StepReferenceAdamW(state, g, no_decay);
}

OptimizerState StepReferenceSgd(const OptimizerState& state, const ParamVector& g,
                                const HyperParams& hp) {
  hp.Validate();
  CheckStep(state, g.size(), hp);
  OptimizerState next = state;
  next.t = state.t + 1;
  const double lr = LearningRate(hp, next.t);
  for (std::size_t i = 0; i < g.size(); ++i) next.theta[i] -= lr * g[i];
  return next;
}

namespace {

constexpr auto kDpSgdFn = [](const OptimizerState& s, const PrivatizedGradient& g,
                             const HyperParams& hp) { return StepDpSgd(s, g, hp); };
constexpr auto kDpAdamFn = [](const OptimizerState& s, const PrivatizedGradient& g,
                              const HyperParams& hp) { return StepDpAdam(s, g, hp); };
constexpr auto kDpAdamWFn = [](const OptimizerState& s, const PrivatizedGradient& g,
                               const HyperParams& hp) { return StepDpAdamW(s, g, hp); };
constexpr auto kDpAdamBcFn = [](const OptimizerState& s, const PrivatizedGradient& g,
                                const HyperParams& hp, double phi) {
  return StepDpAdamBc(s, g, hp, phi);
};
constexpr auto kDpAdamWBcFn = [](const OptimizerState& s, const PrivatizedGradient& g,
                                 const HyperParams& hp, double phi) {
  return StepDpAdamWBc(s, g, hp, phi);
};
constexpr auto kRefSgdFn = [](const OptimizerState& s, const ParamVector& g,
                              const HyperParams& hp) { return StepReferenceSgd(s, g, hp); };
constexpr auto kRefAdamFn = [](const OptimizerState& s, const ParamVector& g,
                               const HyperParams& hp) { return StepReferenceAdam(s, g, hp); };
constexpr auto kRefAdamWFn = [](const OptimizerState& s, const ParamVector& g,
                                const HyperParams& hp) { return StepReferenceAdamW(s, g, hp); };

}  // namespace

const std::vector<OptimizerInfo>& OptimizerRegistry() {
  static const std::vector<OptimizerInfo> kRegistry = {
      {OptimizerKind::kDpSgd, "dp-sgd", kConsumesPrivatizedOnly<decltype(kDpSgdFn)>, false},
      {OptimizerKind::kDpAdam, "dp-adam", kConsumesPrivatizedOnly<decltype(kDpAdamFn)>, false},
      {OptimizerKind::kDpAdamBc, "dp-adambc",
       kConsumesPrivatizedOnly<decltype(kDpAdamBcFn), double>, true},
      {OptimizerKind::kDpAdamW, "dp-adamw", kConsumesPrivatizedOnly<decltype(kDpAdamWFn)>,
       false},
      {OptimizerKind::kDpAdamWBc, "dp-adamw-bc",
       kConsumesPrivatizedOnly<decltype(kDpAdamWBcFn), double>, true},
      {OptimizerKind::kSgd, "sgd", kConsumesPrivatizedOnly<decltype(kRefSgdFn)>, false},
      {OptimizerKind::kAdam, "adam", kConsumesPrivatizedOnly<decltype(kRefAdamFn)>, false},
      {OptimizerKind::kAdamW, "adamw", kConsumesPrivatizedOnly<decltype(kRefAdamWFn)>, false},
  };
  return kRegistry;
}

std::optional<OptimizerInfo> FindOptimizer(std::string_view name) {
  for (const auto& info : OptimizerRegistry()) {
    if (info.name == name) return info;
  }
  return std::nullopt;
}

const OptimizerInfo& InfoOf(OptimizerKind kind) {
  for (const auto& info : OptimizerRegistry()) {
    if (info.kind == kind) return info;
  }
  throw Error(ErrorCode::kInvalidArgument, "unregistered optimizer kind");
}

}  // namespace dpadamw
