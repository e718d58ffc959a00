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

#include "dpadamw/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dpadamw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void ValidateBudget(double epsilon, double delta, double q, std::int64_t steps) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidBudget, "epsilon must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidBudget, "delta must lie in (0, 1)");
  }
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::kInvalidBudget, "q must lie in (0, 1]");
  if (steps < 1) throw Error(ErrorCode::kInvalidBudget, "T must be >= 1");
}

double LogAdd(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(exp(a) - exp(b)) for a >= b.
double LogSub(double a, double b) {
  if (b == -kInf) return a;
  if (b >= a) return -kInf;
  return a + std::log1p(-std::exp(b - a));
}

double LogErfc(double x) {
  const double direct = std::erfc(x);
  if (direct > 1e-280) return std::log(direct);
  // Asymptotic expansion for large positive x.
  const double x2 = x * x;
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) +
         std::log1p(-1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2));
}

double LogBinomInt(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log A_alpha for integer alpha, A_alpha = E_{z~mu0}[(mu(z)/mu0(z))^alpha] with
// mu0 = N(0, sigma^2), mu = (1-q) mu0 + q N(1, sigma^2).
double LogAInt(double q, double sigma, int alpha) {
  double log_a = -kInf;
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  for (int i = 0; i <= alpha; ++i) {
    const double term = LogBinomInt(alpha, i) + i * lq + (alpha - i) * l1q +
                        (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma);
    log_a = LogAdd(log_a, term);
  }
  return log_a;
}

// Fractional alpha: split the integral at z0 where mu(z) / mu0(z) changes
// regime and expand both halves as binomial series (Mironov et al. 2019).
double LogAFrac(double q, double sigma, double alpha) {
  double log_a0 = -kInf;
  double log_a1 = -kInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  double coef = 1.0;
  for (int i = 0; i < 100000; ++i) {
    if (i > 0) coef *= (alpha - i + 1.0) / i;
    const double log_coef = std::log(std::abs(coef));
    const double j = alpha - i;
    const double log_t0 = log_coef + i * lq + j * l1q;
    const double log_t1 = log_coef + j * lq + i * l1q;
    const double log_e0 = std::log(0.5) + LogErfc((i - z0) / (M_SQRT2 * sigma));
    const double log_e1 = std::log(0.5) + LogErfc((z0 - j) / (M_SQRT2 * sigma));
    const double log_s0 = log_t0 + (i * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (coef > 0.0) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0) break;
  }
  return LogAdd(log_a0, log_a1);
}

}  // namespace

std::string_view AccountantModeName(AccountantMode mode) {
  return mode == AccountantMode::kClosedForm ? "closed_form" : "rdp";
}

std::optional<AccountantMode> ParseAccountantMode(std::string_view name) {
  if (name == "closed_form") return AccountantMode::kClosedForm;
  if (name == "rdp") return AccountantMode::kRdp;
  return std::nullopt;
}

const std::vector<double>& DefaultRdpOrders() {
  static const std::vector<double> kOrders = {1.25, 1.5, 2, 3, 4, 8, 16, 32, 64};
  return kOrders;
}

double CalibrateSigmaClosedForm(double epsilon, double delta, double q, std::int64_t steps,
                                double c2) {
  ValidateBudget(epsilon, delta, q, steps);
  if (!(c2 > 0.0)) throw Error(ErrorCode::kInvalidBudget, "c2 must be > 0");
  return c2 * q * std::sqrt(static_cast<double>(steps) * std::log(1.0 / delta)) / epsilon;
}

double EpsilonClosedForm(double sigma, double delta, double q, std::int64_t steps, double c2) {
  ValidateBudget(1.0, delta, q, steps);
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0) return kInf;
  return c2 * q * std::sqrt(static_cast<double>(steps) * std::log(1.0 / delta)) / sigma;
}

double RdpSubsampledGaussian(double sigma, double q, double order) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "q must lie in (0, 1]");
  if (!(order > 1.0)) throw Error(ErrorCode::kInvalidArgument, "RDP order must be > 1");
  if (sigma == 0.0) return kInf;
  if (q == 1.0) return order / (2.0 * sigma * sigma);
  const double rounded = std::round(order);
  const double log_a = (order == rounded && rounded < 1e6)
                           ? LogAInt(q, sigma, static_cast<int>(rounded))
                           : LogAFrac(q, sigma, order);
  return std::max(0.0, log_a / (order - 1.0));
}

RdpCurve ComputeRdp(double sigma, double q, std::int64_t steps, const std::vector<double>& orders) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "T must be >= 1");
  RdpCurve curve;
  curve.orders = orders;
  curve.rdp_values.reserve(orders.size());
  for (double a : orders) {
    curve.rdp_values.push_back(static_cast<double>(steps) * RdpSubsampledGaussian(sigma, q, a));
  }
  return curve;
}

DpConversion RdpToDp(const RdpCurve& curve, double delta) {
  if (curve.orders.empty()) throw Error(ErrorCode::kEmptyCurve, "RDP curve has no orders");
  if (curve.orders.size() != curve.rdp_values.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "RDP curve orders and values differ in length");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidBudget, "delta must lie in (0, 1)");
  }
  DpConversion best{kInf, curve.orders.front()};
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps = curve.rdp_values[i] + log_inv_delta / (curve.orders[i] - 1.0);
    if (eps < best.epsilon) best = {eps, curve.orders[i]};
  }
  return best;
}

DpConversion EpsilonRdp(double sigma, double q, std::int64_t steps, double delta,
                        const std::vector<double>& orders) {
  return RdpToDp(ComputeRdp(sigma, q, steps, orders), delta);
}

double CalibrateSigmaRdp(double epsilon, double delta, double q, std::int64_t steps,
                         const std::vector<double>& orders, double rel_tol) {
  ValidateBudget(epsilon, delta, q, steps);
  auto eps_of = [&](double s) { return EpsilonRdp(s, q, steps, delta, orders).epsilon; };

  double hi = 1.0;
  while (eps_of(hi) > epsilon) {
    hi *= 2.0;
    if (hi > 1e8) throw Error(ErrorCode::kInvalidBudget, "no sigma below 1e8 meets the budget");
  }
  double lo = hi / 2.0;
  while (eps_of(lo) <= epsilon) {
    hi = lo;
    lo /= 2.0;
    if (lo < 1e-8) return hi;
  }
  // Invariant: eps(lo) > epsilon >= eps(hi).
  for (int iter = 0; iter < 200; ++iter) {
    if (eps_of(hi) >= epsilon * (1.0 - rel_tol)) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eps_of(mid) <= epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

PrivacySpec AccountMechanism(const MechanismParams& p) {
  if (!(p.clip_norm > 0.0)) throw Error(ErrorCode::kInvalidArgument, "clip norm must be > 0");
  if (p.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  ValidateBudget(1.0, p.delta, p.sampling_rate, p.total_steps);
  if (!(p.sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");

  PrivacySpec spec;
  spec.delta = p.delta;
  spec.sampling_rate = p.sampling_rate;
  spec.total_steps = p.total_steps;
  spec.sigma = p.sigma;
  spec.mode = p.mode;
  if (p.sigma == 0.0) {
    spec.non_private = true;
    spec.epsilon = kInf;
    return spec;
  }
  if (p.mode == AccountantMode::kClosedForm) {
    spec.epsilon = EpsilonClosedForm(p.sigma, p.delta, p.sampling_rate, p.total_steps, p.c2);
  } else {
    const DpConversion conv = EpsilonRdp(p.sigma, p.sampling_rate, p.total_steps, p.delta);
    spec.epsilon = conv.epsilon;
    spec.argmin_order = conv.order;
  }
  return spec;
}

PrivacySpec CertifyPostprocessing(std::string_view optimizer_name, const MechanismParams& params) {
  const auto info = FindOptimizer(optimizer_name);
  if (!info) {
    throw Error(ErrorCode::kConfig, "unknown optimizer '" + std::string(optimizer_name) + "'");
  }
  if (!info->privatized_input) {
    throw Error(ErrorCode::kCertificationRefused,
                "optimizer '" + std::string(optimizer_name) +
                    "' reads raw gradients; post-processing argument does not apply");
  }
  return AccountMechanism(params);
}

nlohmann::json LedgerRecord(const PrivacySpec& spec) {
  nlohmann::json j;
  j["epsilon"] = spec.non_private ? nlohmann::json(nullptr) : nlohmann::json(spec.epsilon);
  j["non_private"] = spec.non_private;
  j["delta"] = spec.delta;
  j["sigma"] = spec.sigma;
  j["q"] = spec.sampling_rate;
  j["T"] = spec.total_steps;
  j["mode"] = std::string(AccountantModeName(spec.mode));
  j["argmin_order"] =
      spec.argmin_order ? nlohmann::json(*spec.argmin_order) : nlohmann::json(nullptr);
  return j;
}

}  // namespace dpadamw
