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

#include <gtest/gtest.h>

#include <cmath>

#include "dpadamw/accountant.hpp"
#include "dpadamw/errors.hpp"
#include "oracles.hpp"

namespace dpadamw {
namespace {

TEST(ClosedForm, HandExampleAndScaling) {
  const double s = CalibrateSigmaClosedForm(1.0, 1e-5, 0.01, 100);
  EXPECT_NEAR(s, 0.33930, 1e-4);
  EXPECT_DOUBLE_EQ(s, 0.01 * std::sqrt(100.0 * std::log(1e5)));
  EXPECT_DOUBLE_EQ(CalibrateSigmaClosedForm(2.0, 1e-5, 0.01, 100), s / 2.0);
  EXPECT_NEAR(CalibrateSigmaClosedForm(1.0, 1e-5, 0.01, 400), 2.0 * s, 1e-15);
  EXPECT_NEAR(CalibrateSigmaClosedForm(1.0, 1e-5, 0.02, 100), 2.0 * s, 1e-15);
  EXPECT_NEAR(CalibrateSigmaClosedForm(1.0, 1e-10, 0.01, 100), std::sqrt(2.0) * s, 1e-14);
  EXPECT_NEAR(CalibrateSigmaClosedForm(1.0, 1e-5, 0.01, 100, 3.0), 3.0 * s, 1e-15);
}

TEST(ClosedForm, InvalidBudget) {
  for (auto [eps, delta] : {std::pair{0.0, 1e-5}, {-1.0, 1e-5}, {1.0, 1.0}, {1.0, 0.0}}) {
    try {
      CalibrateSigmaClosedForm(eps, delta, 0.01, 100);
      FAIL() << eps << " " << delta;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidBudget);
    }
  }
}

TEST(ClosedForm, InverseRoundTrip) {
  const double s = CalibrateSigmaClosedForm(1.7, 1e-6, 0.05, 321);
  EXPECT_NEAR(EpsilonClosedForm(s, 1e-6, 0.05, 321), 1.7, 1e-12);
}

TEST(Rdp, FullBatchIsGaussianMechanism) {
  EXPECT_EQ(RdpSubsampledGaussian(1.0, 1.0, 2.0), 1.0);
  EXPECT_EQ(RdpSubsampledGaussian(2.0, 1.0, 8.0), 1.0);
  EXPECT_DOUBLE_EQ(RdpSubsampledGaussian(0.7, 1.0, 1.5), 1.5 / (2.0 * 0.49));
}

TEST(Rdp, SigmaZeroIsNonPrivate) {
  EXPECT_TRUE(IsNonPrivate(RdpSubsampledGaussian(0.0, 0.01, 2.0)));
  EXPECT_TRUE(IsNonPrivate(EpsilonRdp(0.0, 0.1, 10, 1e-5).epsilon));
}

TEST(Rdp, Order2ClosedFormAndQuadrature) {
  const double v = RdpSubsampledGaussian(1.0, 0.01, 2.0);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
  // Pinned from the order-2 closed form ln(1 + q^2 (e - 1)).
  EXPECT_NEAR(v, 1.71813422e-4, 1e-12);
  EXPECT_NEAR(v, oracle::RdpOrder2(1.0, 0.01), 1e-15);
  EXPECT_NEAR(v, oracle::RdpQuadrature(1.0, 0.01, 2.0), 1e-9 * v);
}

struct RdpCase {
  double sigma, q, order;
};

class RdpQuadratureTest : public ::testing::TestWithParam<RdpCase> {};

TEST_P(RdpQuadratureTest, MatchesNumericalIntegration) {
  const RdpCase c = GetParam();
  const double got = RdpSubsampledGaussian(c.sigma, c.q, c.order);
  const double want = oracle::RdpQuadrature(c.sigma, c.q, c.order);
  EXPECT_NEAR(got, want, 1e-6 * want + 1e-13) << c.sigma << " " << c.q << " " << c.order;
}

INSTANTIATE_TEST_SUITE_P(
    Grid, RdpQuadratureTest,
    ::testing::Values(RdpCase{1.0, 0.01, 1.25}, RdpCase{1.0, 0.01, 1.5}, RdpCase{1.0, 0.01, 3.0},
                      RdpCase{1.0, 0.01, 8.0}, RdpCase{0.8, 0.05, 1.5}, RdpCase{0.8, 0.05, 4.0},
                      RdpCase{2.0, 0.1, 2.5}, RdpCase{2.0, 0.1, 16.0}, RdpCase{5.0, 0.5, 7.3},
                      RdpCase{1.5, 0.2, 32.0}, RdpCase{3.0, 0.02, 64.0}, RdpCase{0.6, 0.3, 1.25}));

TEST(RdpToDp, Examples) {
  const DpConversion one = RdpToDp({{2.0}, {1.0}}, 1e-5);
  EXPECT_NEAR(one.epsilon, 1.0 + std::log(1e5), 1e-12);
  EXPECT_NEAR(one.epsilon, 12.5129, 1e-4);
  EXPECT_EQ(one.order, 2.0);

  const std::vector<double>& orders = DefaultRdpOrders();
  const DpConversion zero = RdpToDp({orders, std::vector<double>(orders.size(), 0.0)}, 1e-5);
  EXPECT_NEAR(zero.epsilon, std::log(1e5) / 63.0, 1e-12);
  EXPECT_EQ(zero.order, 64.0);

  const RdpCurve c = ComputeRdp(1.1, 0.02, 500);
  RdpCurve doubled = c;
  for (double& v : doubled.rdp_values) v *= 2.0;
  EXPECT_GE(RdpToDp(doubled, 1e-5).epsilon, RdpToDp(c, 1e-5).epsilon);
}

TEST(RdpToDp, EmptyCurve) {
  try {
    RdpToDp({}, 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCurve);
  }
}

TEST(Rdp, CompositionIsLinearInT) {
  const RdpCurve one = ComputeRdp(1.3, 0.03, 1);
  const RdpCurve many = ComputeRdp(1.3, 0.03, 250);
  for (std::size_t i = 0; i < one.orders.size(); ++i) {
    EXPECT_DOUBLE_EQ(many.rdp_values[i], 250.0 * one.rdp_values[i]);
  }
}

TEST(Rdp, StrictlyMonotoneOnGrid) {
  const double q = 0.01;
  for (int i = 0; i < 10; ++i) {
    const double sigma = 0.6 + 0.25 * i;
    for (int j = 0; j < 10; ++j) {
      const std::int64_t steps = 50 + 100 * j;
      const double e = EpsilonRdp(sigma, q, steps, 1e-5).epsilon;
      if (j > 0) { EXPECT_GT(e, EpsilonRdp(sigma, q, steps - 100, 1e-5).epsilon); }
      if (i > 0) { EXPECT_LT(e, EpsilonRdp(sigma - 0.25, q, steps, 1e-5).epsilon); }
    }
  }
}

TEST(CalibrateRdp, RoundTrip) {
  for (double target : {0.5, 1.0, 3.0, 8.0}) {
    const double s = CalibrateSigmaRdp(target, 1e-5, 0.02, 1000);
    const double e = EpsilonRdp(s, 0.02, 1000, 1e-5).epsilon;
    EXPECT_LE(e, target);
    EXPECT_GE(e, target * (1.0 - 1e-4));
    EXPECT_GT(EpsilonRdp(s * (1.0 - 1e-3), 0.02, 1000, 1e-5).epsilon, target);
  }
}

TEST(Certify, SameSpecAcrossPrivateOptimizers) {
  MechanismParams m;
  m.sigma = 1.1;
  m.clip_norm = 1.0;
  m.batch_size = 50;
  m.sampling_rate = 0.025;
  m.total_steps = 200;
  const PrivacySpec ref = AccountMechanism(m);
  for (const char* name : {"dp-sgd", "dp-adam", "dp-adambc", "dp-adamw", "dp-adamw-bc"}) {
    EXPECT_EQ(CertifyPostprocessing(name, m), ref) << name;
  }
  for (const char* name : {"sgd", "adam", "adamw"}) {
    try {
      CertifyPostprocessing(name, m);
      FAIL() << name;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCertificationRefused);
    }
  }
}

TEST(Certify, StructuralCheckOnStepperTypes) {
  MechanismParams m;
  m.sigma = 1.0;
  m.sampling_rate = 0.1;
  m.total_steps = 10;
  auto private_only = [](const OptimizerState& s, const PrivatizedGradient& g,
                         const HyperParams& hp) { return StepDpAdamW(s, g, hp); };
  auto reads_raw = [](const OptimizerState& s, const GradMatrix& g, const HyperParams& hp) {
    return StepReferenceSgd(s, ParamVector(std::vector<double>(g.row(0).begin(), g.row(0).end())),
                            hp);
  };
  EXPECT_EQ(CertifyStepper<decltype(private_only)>(m), AccountMechanism(m));
  EXPECT_THROW(CertifyStepper<decltype(reads_raw)>(m), Error);
}

TEST(Ledger, NonPrivateSerializesNull) {
  MechanismParams m;
  m.sigma = 0.0;
  m.sampling_rate = 0.1;
  m.total_steps = 10;
  const PrivacySpec s = AccountMechanism(m);
  EXPECT_TRUE(s.non_private);
  const nlohmann::json j = LedgerRecord(s);
  EXPECT_TRUE(j["epsilon"].is_null());
  EXPECT_TRUE(j["non_private"].get<bool>());
  EXPECT_EQ(j.dump().find("inf"), std::string::npos);
  for (const char* key : {"delta", "sigma", "q", "T", "mode", "argmin_order"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

}  // namespace
}  // namespace dpadamw
