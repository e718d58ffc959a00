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

#include "dpadamw/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dpadamw/errors.hpp"

namespace dpadamw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void CheckBeta2(double beta2) {
  if (!(beta2 > 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kDomain, "beta2 must lie in (0, 1)");
  }
}

struct ScheduleSums {
  double sum_eta = 0.0;
  double sum_eta_sq = 0.0;
  double c_lambda = 0.0;
};

ScheduleSums SumSchedule(const HyperParams& hp) {
  const std::vector<double> etas = LearningRateSchedule(hp);
  ScheduleSums s;
  for (double e : etas) {
    s.sum_eta += e;
    s.sum_eta_sq += e * e;
  }
  s.c_lambda = CLambdaTerm(hp.weight_decay, etas);
  return s;
}

// (1/2T)(C1^2 + ||theta0||^2 + c(lambda) max(eta+eta^2) R)
//   * (lambda sum eta + L/2 (lambda + lambda^2) sum eta^2)
double DecayPenalty(const AssumptionConstants& c, const HyperParams& hp, const ScheduleSums& s,
                    double r) {
  const double lambda = hp.weight_decay;
  if (lambda == 0.0) return 0.0;
  const double parameter_bound = c.c1 * c.c1 + c.theta0_norm * c.theta0_norm + s.c_lambda * r;
  const double schedule_factor =
      lambda * s.sum_eta + 0.5 * c.lipschitz * (lambda + lambda * lambda) * s.sum_eta_sq;
  return parameter_bound * schedule_factor / (2.0 * static_cast<double>(hp.total_steps));
}

void FillConcentration(BoundReport& rep, const AssumptionConstants& consts,
                       const HyperParams& hp, double delta0, bool force) {
  rep.phi = Phi(hp.clip.noise_multiplier, hp.clip.clip_norm, hp.clip.batch_size);
  const ConcentrationConstants cc =
      ComputeConcentration(hp.beta2, hp.total_steps, rep.phi, hp.clip.clip_norm);
  rep.mu_star = cc.mu_star;
  rep.nu_star = cc.nu_star;
  rep.b_star = cc.b_star;
  rep.delta0 = delta0;
  rep.delta0_admissible = Delta0Admissible(delta0, consts.alpha, hp.total_steps, cc);
  if (!rep.delta0_admissible) {
    if (!force) {
      throw Error(ErrorCode::kInadmissibleDelta0,
                  "delta0 = " + std::to_string(delta0) +
                      " fails the concentration threshold (minimal admissible " +
                      std::to_string(MinimalAdmissibleDelta0(consts.alpha, hp.total_steps, cc)) +
                      ")");
    }
    rep.warnings.emplace_back("delta0_inadmissible_forced");
  }
}

void CheckCommon(const AssumptionConstants& consts, const HyperParams& hp, double delta0,
                 BoundVariant variant) {
  hp.Validate();
  consts.Validate(hp.clip.clip_norm);
  if (!(delta0 >= 0.0) || !std::isfinite(delta0)) {
    throw Error(ErrorCode::kDomain, "delta0 must be finite and >= 0");
  }
  if (variant == BoundVariant::kAdamW && !(hp.eps0 > 0.0)) {
    throw Error(ErrorCode::kDomain, "eps0 > 0 is required by the non-bias-corrected bound");
  }
}

}  // namespace

void AssumptionConstants::Validate(double clip_norm) const {
  if (!(c1 > 0.0)) throw Error(ErrorCode::kDomain, "C1 must be > 0");
  if (c1 > clip_norm) {
    throw Error(ErrorCode::kDomain, "assumption C1 <= C violated: C1 = " + std::to_string(c1) +
                                        " > C = " + std::to_string(clip_norm));
  }
  if (!(lipschitz > 0.0)) throw Error(ErrorCode::kDomain, "L must be > 0");
  if (f_theta0 < f_star) throw Error(ErrorCode::kDomain, "F(theta0) >= F* violated");
  if (d < 1) throw Error(ErrorCode::kDomain, "d must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kDomain, "alpha must lie in (0, 1)");
  if (!(theta0_norm >= 0.0)) throw Error(ErrorCode::kDomain, "||theta0|| must be >= 0");
}

std::string_view BoundVariantName(BoundVariant v) {
  return v == BoundVariant::kAdamW ? "adamw" : "adamw_bc";
}

std::optional<BoundVariant> ParseBoundVariant(std::string_view name) {
  if (name == "adamw") return BoundVariant::kAdamW;
  if (name == "adamw_bc") return BoundVariant::kAdamWBc;
  return std::nullopt;
}

double Phi(double sigma, double clip_norm, std::size_t batch_size) {
  const double s = sigma * clip_norm / static_cast<double>(batch_size);
  return s * s;
}

ConcentrationConstants ComputeConcentration(double beta2, std::int64_t steps, double phi,
                                            double clip_norm) {
  CheckBeta2(beta2);
  if (steps < 1) throw Error(ErrorCode::kDomain, "T must be >= 1");
  const auto t = static_cast<double>(steps);
  const double geometric = beta2 * (1.0 - std::pow(beta2, t)) / (1.0 - beta2);
  const double half_normal = std::sqrt(2.0 * phi / std::numbers::pi);
  ConcentrationConstants cc;
  cc.mu_star = geometric * ((phi - 2.0 * phi / std::numbers::pi) +
                            (clip_norm + half_normal) * (clip_norm + half_normal));
  cc.nu_star = 2.0 * beta2 * beta2 * phi *
               std::sqrt((1.0 - std::pow(beta2, 2.0 * t)) / (1.0 - beta2 * beta2));
  cc.b_star = 4.0 * beta2 * phi;
  return cc;
}

double Delta0LogFactor(double alpha, std::int64_t steps) {
  return std::log(1.0 / (alpha / (2.0 * static_cast<double>(steps))));
}

bool Delta0Admissible(double delta0, double alpha, std::int64_t steps,
                      const ConcentrationConstants& cc) {
  const double lf = Delta0LogFactor(alpha, steps);
  if (cc.b_star == 0.0) {
    // No noise: both branch terms vanish when nu* = 0.
    return delta0 >= cc.mu_star + std::sqrt(lf * 2.0 * cc.nu_star * cc.nu_star);
  }
  const double branch_point = cc.nu_star * cc.nu_star / cc.b_star;
  const double sub_gaussian = cc.mu_star + std::sqrt(lf * 2.0 * cc.nu_star * cc.nu_star);
  const double sub_exponential = cc.mu_star + lf * 2.0 * cc.b_star;
  const bool lower = delta0 <= branch_point && delta0 >= sub_gaussian;
  const bool upper = delta0 >= branch_point && delta0 >= sub_exponential;
  return lower || upper;
}

double MinimalAdmissibleDelta0(double alpha, std::int64_t steps,
                               const ConcentrationConstants& cc) {
  const double lf = Delta0LogFactor(alpha, steps);
  const double sub_gaussian = cc.mu_star + std::sqrt(lf * 2.0 * cc.nu_star * cc.nu_star);
  if (cc.b_star == 0.0) return sub_gaussian;
  const double branch_point = cc.nu_star * cc.nu_star / cc.b_star;
  if (sub_gaussian <= branch_point) return sub_gaussian;
  return std::max(branch_point, cc.mu_star + lf * 2.0 * cc.b_star);
}

double RTerm(std::size_t d, double clip_norm, double phi, double beta2, double eps0,
             std::int64_t steps, BoundVariant variant) {
  CheckBeta2(beta2);
  const double numer = clip_norm * clip_norm + phi;
  const double drift = -static_cast<double>(steps) * std::log(beta2);
  double log_part = 0.0;
  if (variant == BoundVariant::kAdamW) {
    if (!(eps0 > 0.0)) throw Error(ErrorCode::kDomain, "R needs eps0 > 0");
    log_part = std::log(1.0 + numer / ((1.0 - beta2) * eps0));
  } else {
    if (!(phi > 0.0)) {
      throw Error(ErrorCode::kUndefinedBound, "R_BC is undefined for Phi = 0 (sigma = 0)");
    }
    log_part = std::log(std::abs(1.0 - numer / ((1.0 - beta2) * phi)));
  }
  return static_cast<double>(d) * (log_part + drift);
}

double RTermMomentum(std::size_t d, double delta0, double phi, double beta2, double eps0,
                     std::int64_t steps, BoundVariant variant) {
  CheckBeta2(beta2);
  const double drift = -static_cast<double>(steps) * std::log(beta2);
  double log_part = 0.0;
  if (variant == BoundVariant::kAdamW) {
    if (!(eps0 > 0.0)) throw Error(ErrorCode::kDomain, "R needs eps0 > 0");
    log_part = std::log(1.0 + delta0 * delta0 / (eps0 * (1.0 - beta2)));
  } else {
    if (!(phi > 0.0)) {
      throw Error(ErrorCode::kUndefinedBound, "R_BC is undefined for Phi = 0 (sigma = 0)");
    }
    log_part = std::log(std::abs(1.0 - delta0 * delta0 / (phi * (1.0 - beta2))));
  }
  return static_cast<double>(d) * (log_part + drift);
}

double CLambdaTerm(double weight_decay, std::span<const double> etas) {
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kDomain, "lambda must be >= 0");
  if (weight_decay == 0.0) return 0.0;
  double peak = 0.0;
  for (double e : etas) peak = std::max(peak, e + e * e);
  return (1.0 + 1.0 / weight_decay) * peak;
}

double ETerm(const AssumptionConstants& c, const HyperParams& hp, double delta0, double phi,
             BoundVariant variant) {
  const double b1 = hp.beta1;
  const double b2 = hp.beta2;
  const double eta = hp.eta;
  const auto d = static_cast<double>(c.d);
  const double gap = 1.0 - b1 / b2;
  if (!(gap > 0.0)) throw Error(ErrorCode::kDomain, "1 - beta1/beta2 must be > 0");
  double first = delta0;
  double third = delta0 * delta0;
  if (variant == BoundVariant::kAdamWBc) {
    if (!(delta0 * delta0 > phi)) {
      throw Error(ErrorCode::kDomain, "E_BC needs delta0^2 > Phi");
    }
    first = std::sqrt(delta0 * delta0 - phi);
    third = delta0 * delta0 - phi;
  }
  return eta * d * c.lipschitz * (1.0 - b1) * first / (gap * (1.0 - b2)) +
         2.0 * eta * eta * d * c.lipschitz * c.lipschitz * b1 / (gap * std::pow(1.0 - b2, 1.5)) +
         12.0 * d * third * std::sqrt(1.0 - b1) / (std::pow(gap, 1.5) * std::sqrt(1.0 - b2));
}

BoundReport BoundRhsTheorem2(const AssumptionConstants& consts, const HyperParams& hp,
                             double delta0, BoundVariant variant, bool force) {
  if (hp.beta1 != 0.0) {
    throw Error(ErrorCode::kWrongTheorem, "the beta1 = 0 bound needs beta1 = 0; use theorem 3");
  }
  if (hp.schedule != Schedule::kThm2) {
    throw Error(ErrorCode::kWrongTheorem, "the beta1 = 0 bound needs the thm2 schedule");
  }
  CheckCommon(consts, hp, delta0, variant);

  BoundReport rep;
  rep.variant = variant;
  rep.theorem = 2;
  FillConcentration(rep, consts, hp, delta0, force);
  const double phi = rep.phi;
  const double c = hp.clip.clip_norm;
  const double c_sq = c * c;
  const auto d = static_cast<double>(consts.d);
  const auto t = static_cast<double>(hp.total_steps);
  const double gap = consts.f_theta0 - consts.f_star;
  const double one_minus_b2 = 1.0 - hp.beta2;
  const double eta = hp.eta;
  const double lam = hp.weight_decay;
  const double l = consts.lipschitz;

  rep.r = RTerm(consts.d, c, phi, hp.beta2, hp.eps0, hp.total_steps, variant);
  if (variant == BoundVariant::kAdamW) {
    rep.leading_term = 2.0 * (delta0 + consts.c1) * gap / (eta * t);
    rep.r_coupled_term = (4.0 * d * (c_sq + phi) / std::sqrt(one_minus_b2) +
                          eta * d * l * std::sqrt(c_sq + phi) * (1.0 + lam) / one_minus_b2) *
                         rep.r / t;
  } else {
    const double shifted = (delta0 + consts.c1) * (delta0 + consts.c1) - phi;
    if (!(shifted > 0.0)) throw Error(ErrorCode::kDomain, "(delta0 + C1)^2 > Phi is required");
    rep.leading_term = 2.0 * std::sqrt(shifted) * gap / (eta * t);
    rep.r_coupled_term = (4.0 * d * c_sq / std::sqrt(one_minus_b2) +
                          eta * d * l * (1.0 + lam) * c / one_minus_b2) *
                         rep.r / t;
    if (rep.r < 0.0) rep.warnings.emplace_back("negative_R_BC");
  }
  const ScheduleSums sums = SumSchedule(hp);
  rep.sum_eta = sums.sum_eta;
  rep.sum_eta_sq = sums.sum_eta_sq;
  rep.c_lambda = sums.c_lambda;
  rep.decay_term = DecayPenalty(consts, hp, sums, rep.r);
  rep.rhs = rep.leading_term + rep.r_coupled_term + rep.decay_term;
  return rep;
}

BoundReport BoundRhsTheorem3(const AssumptionConstants& consts, const HyperParams& hp,
                             double delta0, BoundVariant variant, bool force) {
  if (!(hp.beta1 > 0.0)) {
    throw Error(ErrorCode::kWrongTheorem, "the momentum bound needs beta1 > 0; use theorem 2");
  }
  if (hp.beta1 >= hp.beta2) {
    throw Error(ErrorCode::kDomain, "beta1 < beta2 is required (1 - beta1/beta2 > 0)");
  }
  if (hp.schedule != Schedule::kThm3) {
    throw Error(ErrorCode::kWrongTheorem, "the momentum bound needs the thm3 schedule");
  }
  const auto t = static_cast<double>(hp.total_steps);
  const double t_tilde = t - hp.beta1 / (1.0 - hp.beta1);
  if (t_tilde <= 1e-12 * t) {
    throw Error(ErrorCode::kHorizonTooShort,
                "T - beta1/(1-beta1) = " + std::to_string(t_tilde) + " must be > 0");
  }
  CheckCommon(consts, hp, delta0, variant);

  BoundReport rep;
  rep.variant = variant;
  rep.theorem = 3;
  rep.t_tilde = t_tilde;
  FillConcentration(rep, consts, hp, delta0, force);
  const double phi = rep.phi;
  const double gap = consts.f_theta0 - consts.f_star;

  rep.r = RTermMomentum(consts.d, delta0, phi, hp.beta2, hp.eps0, hp.total_steps, variant);
  rep.e = ETerm(consts, hp, delta0, phi, variant);
  if (variant == BoundVariant::kAdamW) {
    rep.leading_term = 2.0 * (delta0 + consts.c1) * gap / (hp.eta * t_tilde);
  } else {
    const double shifted = (delta0 + consts.c1) * (delta0 + consts.c1) - phi;
    if (!(shifted > 0.0)) throw Error(ErrorCode::kDomain, "(delta0 + C1)^2 > Phi is required");
    rep.leading_term = 2.0 * std::sqrt(shifted) * gap / (hp.eta * t_tilde);
    if (rep.r < 0.0) rep.warnings.emplace_back("negative_R_BC");
  }
  rep.r_coupled_term = *rep.e * rep.r;
  const ScheduleSums sums = SumSchedule(hp);
  rep.sum_eta = sums.sum_eta;
  rep.sum_eta_sq = sums.sum_eta_sq;
  rep.c_lambda = sums.c_lambda;
  rep.decay_term = DecayPenalty(consts, hp, sums, rep.r);
  rep.rhs = rep.leading_term + rep.r_coupled_term + rep.decay_term;
  return rep;
}

std::vector<double> TauDistribution(std::int64_t steps, double beta1) {
  if (steps < 1) throw Error(ErrorCode::kDomain, "T must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error(ErrorCode::kDomain, "beta1 must lie in [0, 1)");
  std::vector<double> w(static_cast<std::size_t>(steps));
  double total = 0.0;
  for (std::int64_t t = 0; t < steps; ++t) {
    w[static_cast<std::size_t>(t)] = 1.0 - std::pow(beta1, static_cast<double>(steps - t));
    total += w[static_cast<std::size_t>(t)];
  }
  for (double& x : w) x /= total;
  return w;
}

TauSampler::TauSampler(std::int64_t steps, double beta1) {
  const std::vector<double> p = TauDistribution(steps, beta1);
  cdf_.resize(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

std::int64_t TauSampler::Sample(RngStream& rng) const {
  const double u = rng.Uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::int64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                            static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
}

std::int64_t SampleTau(std::int64_t steps, double beta1, RngStream& rng) {
  return TauSampler(steps, beta1).Sample(rng);
}

BoundComparison EmpiricalBoundCheck(const std::vector<std::vector<double>>& grad_norms,
                                    const std::vector<std::uint64_t>& seeds,
                                    const BoundReport& report, double beta1, RngStream& rng,
                                    std::size_t tau_draws) {
  if (grad_norms.empty()) throw Error(ErrorCode::kMissingData, "no runs to compare");
  if (seeds.size() != grad_norms.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one seed per run is required");
  }
  BoundComparison out;
  out.rhs = report.rhs;
  out.warning = !report.delta0_admissible || !report.warnings.empty();
  std::size_t satisfied = 0;
  for (std::size_t s = 0; s < grad_norms.size(); ++s) {
    const auto& norms = grad_norms[s];
    if (norms.empty()) throw Error(ErrorCode::kMissingData, "run has no gradient norms");
    for (double n : norms) {
      if (!std::isfinite(n)) {
        throw Error(ErrorCode::kMissingData, "gradient norms missing (true gradient unavailable)");
      }
    }
    double lhs = 0.0;
    if (report.theorem == 2) {
      for (double n : norms) lhs += n * n;
      lhs /= static_cast<double>(norms.size());
    } else {
      if (tau_draws == 0) throw Error(ErrorCode::kInvalidArgument, "tau_draws must be >= 1");
      const TauSampler sampler(static_cast<std::int64_t>(norms.size()), beta1);
      for (std::size_t k = 0; k < tau_draws; ++k) {
        const double n = norms[static_cast<std::size_t>(sampler.Sample(rng))];
        lhs += n * n;
      }
      lhs /= static_cast<double>(tau_draws);
    }
    const bool ok = lhs <= report.rhs;
    satisfied += ok ? 1 : 0;
    out.per_seed.push_back({seeds[s], lhs, report.rhs, ok});
    out.mean_lhs += lhs;
  }
  out.mean_lhs /= static_cast<double>(grad_norms.size());
  out.satisfied_fraction = static_cast<double>(satisfied) / static_cast<double>(grad_norms.size());
  return out;
}

nlohmann::json ToJson(const BoundReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["theorem"] = r.theorem;
  j["variant"] = std::string(BoundVariantName(r.variant));
  j["phi"] = r.phi;
  j["mu_star"] = r.mu_star;
  j["nu_star"] = r.nu_star;
  j["b_star"] = r.b_star;
  j["delta0"] = r.delta0;
  j["delta0_admissible"] = r.delta0_admissible;
  j[r.variant == BoundVariant::kAdamW ? "R" : "R_BC"] = r.r;
  j["c_lambda"] = r.c_lambda;
  if (r.e) j[r.variant == BoundVariant::kAdamW ? "E" : "E_BC"] = *r.e;
  if (r.t_tilde) j["T_tilde"] = *r.t_tilde;
  j["sum_eta"] = r.sum_eta;
  j["sum_eta_sq"] = r.sum_eta_sq;
  j["leading_term"] = r.leading_term;
  j["r_coupled_term"] = r.r_coupled_term;
  j["decay_term"] = r.decay_term;
  j["rhs"] = r.rhs;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace dpadamw
