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

#ifndef DPADAMW_ACCOUNTANT_HPP_
#define DPADAMW_ACCOUNTANT_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpadamw/errors.hpp"
#include "dpadamw/optimizers.hpp"
#include "json.hpp"

namespace dpadamw {

enum class AccountantMode { kClosedForm, kRdp };

std::string_view AccountantModeName(AccountantMode mode);
std::optional<AccountantMode> ParseAccountantMode(std::string_view name);

// A spent or targeted (epsilon, delta) budget together with the mechanism
// parameters that realise it. `non_private` marks sigma = 0, where epsilon
// is unbounded; `epsilon` is then meaningless and serializes as null.
struct PrivacySpec {
  double epsilon = 0.0;
  double delta = 1e-5;
  double sampling_rate = 1.0;
  std::int64_t total_steps = 1;
  double sigma = 0.0;
  AccountantMode mode = AccountantMode::kRdp;
  std::optional<double> argmin_order;
  bool non_private = false;

  friend bool operator==(const PrivacySpec&, const PrivacySpec&) = default;
};

struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> rdp_values;
};

struct DpConversion {
  double epsilon = 0.0;
  double order = 0.0;
};

// {1.25, 1.5, 2, 3, 4, 8, 16, 32, 64}.
const std::vector<double>& DefaultRdpOrders();

// sigma = c2 * q * sqrt(T ln(1/delta)) / epsilon. The closed form is an
// order-of-magnitude guideline with an unspecified constant c2 (default 1);
// experiment budgets should come from the RDP path.
double CalibrateSigmaClosedForm(double epsilon, double delta, double q, std::int64_t steps,
                                double c2 = 1.0);
// Inverse of the closed form: epsilon spent by a given sigma.
double EpsilonClosedForm(double sigma, double delta, double q, std::int64_t steps,
                         double c2 = 1.0);

// Per-step Renyi DP of the sampled Gaussian mechanism at order `order`.
// Returns +infinity for sigma = 0 (check with IsNonPrivate).
double RdpSubsampledGaussian(double sigma, double q, double order);

inline bool IsNonPrivate(double epsilon) { return epsilon == std::numeric_limits<double>::infinity(); }

RdpCurve ComputeRdp(double sigma, double q, std::int64_t steps,
                    const std::vector<double>& orders = DefaultRdpOrders());

// epsilon = min over orders of rdp + ln(1/delta) / (order - 1).
DpConversion RdpToDp(const RdpCurve& curve, double delta);

DpConversion EpsilonRdp(double sigma, double q, std::int64_t steps, double delta,
                        const std::vector<double>& orders = DefaultRdpOrders());

// Smallest sigma (to relative tolerance `rel_tol` on epsilon) with
// epsilon(sigma) <= target.
double CalibrateSigmaRdp(double epsilon, double delta, double q, std::int64_t steps,
                         const std::vector<double>& orders = DefaultRdpOrders(),
                         double rel_tol = 1e-4);

struct MechanismParams {
  double sigma = 0.0;
  double clip_norm = 1.0;
  std::size_t batch_size = 1;
  double sampling_rate = 1.0;
  std::int64_t total_steps = 1;
  double delta = 1e-5;
  AccountantMode mode = AccountantMode::kRdp;
  double c2 = 1.0;
};

// Privacy spent by the mechanism, independent of any optimizer.
PrivacySpec AccountMechanism(const MechanismParams& params);

// Post-processing certification for a stepper type: returns the mechanism's
// spec unchanged when the stepper only sees privatized gradients.
template <class Stepper, class... Extra>
PrivacySpec CertifyStepper(const MechanismParams& params) {
  if constexpr (!kConsumesPrivatizedOnly<Stepper, Extra...>) {
    throw Error(ErrorCode::kCertificationRefused,
                "stepper accepts raw gradients; post-processing argument does not apply");
  } else {
    return AccountMechanism(params);
  }
}

// Same, by registered optimizer name.
PrivacySpec CertifyPostprocessing(std::string_view optimizer_name, const MechanismParams& params);

// {epsilon, delta, sigma, q, T, mode, argmin_order, non_private}
nlohmann::json LedgerRecord(const PrivacySpec& spec);

}  // namespace dpadamw

#endif  // DPADAMW_ACCOUNTANT_HPP_
