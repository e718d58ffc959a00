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

#ifndef DPADAMW_BOUNDS_HPP_
#define DPADAMW_BOUNDS_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpadamw/numerics.hpp"
#include "dpadamw/optimizers.hpp"
#include "json.hpp"

namespace dpadamw {

// Constants of the smoothness / boundedness assumptions behind the
// convergence bounds.
struct AssumptionConstants {
  double c1 = 1.0;          // a.s. bound on stochastic gradient norms, c1 <= C
  double lipschitz = 1.0;   // L
  double f_star = 0.0;      // lower bound of F
  double f_theta0 = 0.0;    // F(theta_0)
  std::size_t d = 1;
  double alpha = 0.05;      // failure probability
  double theta0_norm = 0.0;

  void Validate(double clip_norm) const;
};

enum class BoundVariant { kAdamW, kAdamWBc };

std::string_view BoundVariantName(BoundVariant v);
std::optional<BoundVariant> ParseBoundVariant(std::string_view name);

struct ConcentrationConstants {
  double mu_star = 0.0;
  double nu_star = 0.0;
  double b_star = 0.0;
};

struct BoundReport {
  BoundVariant variant = BoundVariant::kAdamW;
  int theorem = 2;
  double phi = 0.0;
  double mu_star = 0.0;
  double nu_star = 0.0;
  double b_star = 0.0;
  double delta0 = 0.0;
  bool delta0_admissible = false;
  double r = 0.0;  // R, or R_BC for the bias-corrected variant
  double c_lambda = 0.0;  // (1 + 1/lambda) * max_t(eta_t + eta_t^2)
  std::optional<double> e;  // E or E_BC, theorem 3 only
  std::optional<double> t_tilde;
  double sum_eta = 0.0;
  double sum_eta_sq = 0.0;
  double leading_term = 0.0;
  double r_coupled_term = 0.0;
  double decay_term = 0.0;
  double rhs = 0.0;
  std::vector<std::string> warnings;
};

// Phi = (sigma C / B)^2, the excess second moment injected by DP noise.
double Phi(double sigma, double clip_norm, std::size_t batch_size);

ConcentrationConstants ComputeConcentration(double beta2, std::int64_t steps, double phi,
                                            double clip_norm);

// ln(1 / (alpha / 2T)).
double Delta0LogFactor(double alpha, std::int64_t steps);

// Piecewise condition: below the branch point nu*^2 / b* the sub-Gaussian
// threshold mu* + sqrt(2 ln(2T/alpha) nu*^2) applies, above it the
// sub-exponential threshold mu* + 2 ln(2T/alpha) b*.
bool Delta0Admissible(double delta0, double alpha, std::int64_t steps,
                      const ConcentrationConstants& cc);
double MinimalAdmissibleDelta0(double alpha, std::int64_t steps, const ConcentrationConstants& cc);

// R of the beta1 = 0 bound:
//   R    = d (ln(1 + (C^2+Phi) / ((1-beta2) eps0)) - T ln beta2)
//   R_BC = d (ln|1 - (C^2+Phi) / ((1-beta2) Phi)| - T ln beta2)
double RTerm(std::size_t d, double clip_norm, double phi, double beta2, double eps0,
             std::int64_t steps, BoundVariant variant);
// R of the momentum bound, with delta0^2 in place of C^2 + Phi.
double RTermMomentum(std::size_t d, double delta0, double phi, double beta2, double eps0,
                     std::int64_t steps, BoundVariant variant);

// (1 + 1/lambda) * max_t (eta_t + eta_t^2); 0 when lambda = 0 because every
// summand of the decay penalty carries a lambda factor.
double CLambdaTerm(double weight_decay, std::span<const double> etas);

// E (or E_BC) of the momentum bound.
double ETerm(const AssumptionConstants& consts, const HyperParams& hp, double delta0, double phi,
             BoundVariant variant);

// Right-hand side of the beta1 = 0 bound. Requires beta1 = 0 and the thm2
// schedule. An inadmissible delta0 throws unless `force`, in which case the
// report carries a warning.
BoundReport BoundRhsTheorem2(const AssumptionConstants& consts, const HyperParams& hp,
                             double delta0, BoundVariant variant, bool force = false);
// Right-hand side of the momentum bound: 0 < beta1 < beta2, thm3 schedule,
// T - beta1/(1-beta1) > 0.
BoundReport BoundRhsTheorem3(const AssumptionConstants& consts, const HyperParams& hp,
                             double delta0, BoundVariant variant, bool force = false);

// Normalised P(tau = t) proportional to 1 - beta1^(T-t), t in [0, T).
std::vector<double> TauDistribution(std::int64_t steps, double beta1);

class TauSampler {
 public:
  TauSampler(std::int64_t steps, double beta1);
  std::int64_t Sample(RngStream& rng) const;

 private:
  std::vector<double> cdf_;
};

std::int64_t SampleTau(std::int64_t steps, double beta1, RngStream& rng);

struct SeedComparison {
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct BoundComparison {
  std::vector<SeedComparison> per_seed;
  double mean_lhs = 0.0;
  double rhs = 0.0;
  double satisfied_fraction = 0.0;
  bool warning = false;
};

// `grad_norms[s][t]` holds ||grad F(theta_t)|| for t in [0, T) of seed s.
// Theorem 2 averages the squares over t; theorem 3 averages over
// `tau_draws` samples of tau.
BoundComparison EmpiricalBoundCheck(const std::vector<std::vector<double>>& grad_norms,
                                    const std::vector<std::uint64_t>& seeds,
                                    const BoundReport& report, double beta1, RngStream& rng,
                                    std::size_t tau_draws = 10000);

nlohmann::json ToJson(const BoundReport& report);

}  // namespace dpadamw

#endif  // DPADAMW_BOUNDS_HPP_
