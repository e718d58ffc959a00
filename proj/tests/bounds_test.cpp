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
#include <numbers>

#include "dpadamw/bounds.hpp"
#include "dpadamw/errors.hpp"
#include "oracles.hpp"

namespace dpadamw {
namespace {

using oracle::Mp;

double D(const Mp& x) { return x.convert_to<double>(); }

HyperParams Thm2Params() {
  HyperParams hp;
  hp.eta = 0.01;
  hp.schedule = Schedule::kThm2;
  hp.beta1 = 0.0;
  hp.beta2 = 0.99;
  hp.weight_decay = 0.01;
  hp.eps0 = 5e-8;
  hp.clip = {1.0, 16, 1.0};
  hp.total_steps = 300;
  return hp;
}

AssumptionConstants Consts() {
  AssumptionConstants c;
  c.c1 = 0.8;
  c.lipschitz = 1.0;
  c.f_star = 0.0;
  c.f_theta0 = 0.00125;
  c.d = 10;
  c.alpha = 0.05;
  c.theta0_norm = 1.3;
  return c;
}

TEST(Phi, Examples) {
  EXPECT_EQ(Phi(0.0, 1.0, 8), 0.0);
  EXPECT_NEAR(Phi(2.0, 0.5, 10), 0.01, 1e-17);
  EXPECT_EQ(Phi(1.0, 1.0, 1), 1.0);
}

TEST(Concentration, NoiselessDegenerate) {
  const ConcentrationConstants cc = ComputeConcentration(0.9, 7, 0.0, 1.0);
  EXPECT_NEAR(cc.mu_star, 0.9 * (1 - std::pow(0.9, 7)) / 0.1, 1e-13);
  EXPECT_EQ(cc.nu_star, 0.0);
  EXPECT_EQ(cc.b_star, 0.0);
}

TEST(Concentration, MatchesHighPrecisionOracle) {
  const ConcentrationConstants cc = ComputeConcentration(0.5, 2, 1.0, 1.0);
  const oracle::Concentration mp = oracle::ConcentrationMp(Mp("0.5"), 2, Mp(1), Mp(1));
  EXPECT_NEAR(cc.mu_star, D(mp.mu), 1e-14 * D(mp.mu));
  EXPECT_NEAR(cc.nu_star, D(mp.nu), 1e-15);
  EXPECT_EQ(cc.b_star, 2.0);
  // Hand arithmetic: geometric factor 0.75, nu* = 0.5 sqrt(0.9375 / 0.75).
  EXPECT_NEAR(cc.nu_star, 0.5 * std::sqrt(1.25), 1e-15);

  for (double b2 : {0.9, 0.99, 0.999}) {
    for (double phi : {1e-4, 0.01, 0.5}) {
      const auto a = ComputeConcentration(b2, 500, phi, 1.0);
      const auto o = oracle::ConcentrationMp(Mp(b2), 500, Mp(phi), Mp(1));
      EXPECT_NEAR(a.mu_star, D(o.mu), 1e-12 * D(o.mu));
      EXPECT_NEAR(a.nu_star, D(o.nu), 1e-12 * D(o.nu));
    }
  }
}

TEST(Concentration, BStarLinearInPhi) {
  EXPECT_DOUBLE_EQ(ComputeConcentration(0.9, 10, 0.2, 1.0).b_star,
                   2.0 * ComputeConcentration(0.9, 10, 0.1, 1.0).b_star);
}

TEST(Concentration, Beta2Domain) {
  EXPECT_THROW(ComputeConcentration(1.0, 10, 0.1, 1.0), Error);
  EXPECT_THROW(ComputeConcentration(0.0, 10, 0.1, 1.0), Error);
}

TEST(Delta0, NoiselessThresholdIsMu) {
  const auto cc = ComputeConcentration(0.9, 10, 0.0, 1.0);
  EXPECT_TRUE(Delta0Admissible(cc.mu_star, 0.05, 10, cc));
  EXPECT_FALSE(Delta0Admissible(cc.mu_star - 1.0, 0.05, 10, cc));
  EXPECT_EQ(MinimalAdmissibleDelta0(0.05, 10, cc), cc.mu_star);
}

TEST(Delta0, OracleThresholdExample) {
  const auto cc = ComputeConcentration(0.5, 2, 1.0, 1.0);
  const Mp thr = oracle::MinimalDelta0Mp(oracle::ConcentrationMp(Mp("0.5"), 2, Mp(1), Mp(1)),
                                         Mp("0.05"), 2);
  EXPECT_TRUE(Delta0Admissible(D(thr) + 0.01, 0.05, 2, cc));
  EXPECT_FALSE(Delta0Admissible(D(thr) - 0.01, 0.05, 2, cc));
  EXPECT_FALSE(Delta0Admissible(cc.mu_star - 1.0, 0.05, 2, cc));
  EXPECT_NEAR(MinimalAdmissibleDelta0(0.05, 2, cc), D(thr), 1e-12);
}

TEST(Delta0, MinimalAgreesWithOracleAcrossRegimes) {
  for (double b2 : {0.5, 0.9, 0.999}) {
    for (double phi : {1e-6, 1e-3, 0.1, 2.0, 50.0}) {
      for (int steps : {2, 100, 5000}) {
        const auto cc = ComputeConcentration(b2, steps, phi, 1.0);
        const double got = MinimalAdmissibleDelta0(0.05, steps, cc);
        const double want =
            D(oracle::MinimalDelta0Mp(oracle::ConcentrationMp(Mp(b2), steps, Mp(phi), Mp(1)),
                                      Mp("0.05"), steps));
        EXPECT_NEAR(got, want, 1e-11 * want) << b2 << " " << phi << " " << steps;
        EXPECT_TRUE(Delta0Admissible(got * (1 + 1e-12), 0.05, steps, cc));
        EXPECT_FALSE(Delta0Admissible(got * (1 - 1e-6), 0.05, steps, cc));
      }
    }
  }
}

TEST(RTerm, HandExampleAndStructure) {
  const double r = RTerm(2, 1.0, 0.01, 0.99, 1e-8, 10, BoundVariant::kAdamW);
  EXPECT_NEAR(r, 46.27, 0.01);
  EXPECT_NEAR(r, 2.0 * (std::log(1.0 + 1.01 / (0.01 * 1e-8)) - 10.0 * std::log(0.99)), 1e-12);
  const double r11 = RTerm(2, 1.0, 0.01, 0.99, 1e-8, 11, BoundVariant::kAdamW);
  EXPECT_NEAR(r11 - r, -2.0 * std::log(0.99), 1e-12);
  EXPECT_DOUBLE_EQ(RTerm(4, 1.0, 0.01, 0.99, 1e-8, 10, BoundVariant::kAdamW), 2.0 * r);
}

TEST(RTerm, BcLiteralAndUndefined) {
  const double r = RTerm(3, 1.0, 0.25, 0.9, 5e-8, 20, BoundVariant::kAdamWBc);
  EXPECT_NEAR(r, 3.0 * (std::log(std::abs(1.0 - 1.25 / (0.1 * 0.25))) - 20.0 * std::log(0.9)),
              1e-12);
  try {
    RTerm(3, 1.0, 0.0, 0.9, 5e-8, 20, BoundVariant::kAdamWBc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedBound);
  }
  const double rm = RTermMomentum(2, 3.0, 0.5, 0.99, 1e-8, 5, BoundVariant::kAdamWBc);
  EXPECT_NEAR(rm, 2.0 * (std::log(std::abs(1.0 - 9.0 / (0.5 * 0.01))) - 5.0 * std::log(0.99)),
              1e-12);
}

TEST(CLambda, Examples) {
  const std::vector<double> etas(5, 0.1);
  EXPECT_NEAR(CLambdaTerm(1.0, etas), 0.22, 1e-15);
  EXPECT_NEAR(CLambdaTerm(1e12, etas) / 0.11, 1.0, 1e-11);
  EXPECT_EQ(CLambdaTerm(0.0, etas), 0.0);
}

TEST(BetaZeroBound, MatchesHighPrecisionOracle) {
  for (bool bc : {false, true}) {
    for (double lambda : {0.0, 0.01, 0.5}) {
      HyperParams hp = Thm2Params();
      hp.weight_decay = lambda;
      const AssumptionConstants c = Consts();
      const double phi = Phi(1.0, 1.0, 16);
      const auto cc = ComputeConcentration(hp.beta2, hp.total_steps, phi, 1.0);
      const double delta0 = MinimalAdmissibleDelta0(c.alpha, hp.total_steps, cc);
      const BoundReport r = BoundRhsTheorem2(
          c, hp, delta0, bc ? BoundVariant::kAdamWBc : BoundVariant::kAdamW);
      const Mp want = oracle::Rhs2Mp({c.c1, c.lipschitz, c.f_theta0, c.theta0_norm, 10, hp.eta,
                                      hp.beta2, lambda, hp.eps0, 1.0, 1.0, 16, 300, delta0, bc});
      EXPECT_NEAR(r.rhs, D(want), 1e-10 * std::abs(D(want))) << bc << " " << lambda;
      EXPECT_TRUE(r.delta0_admissible);
      if (lambda == 0.0) { EXPECT_EQ(r.decay_term, 0.0); }
    }
  }
}

TEST(BetaZeroBound, NoiselessReducesToTwoTerms) {
  HyperParams hp = Thm2Params();
  hp.weight_decay = 0.0;
  hp.clip.noise_multiplier = 0.0;
  const AssumptionConstants c = Consts();
  const auto cc = ComputeConcentration(hp.beta2, hp.total_steps, 0.0, 1.0);
  const BoundReport r = BoundRhsTheorem2(c, hp, cc.mu_star, BoundVariant::kAdamW);
  EXPECT_EQ(r.phi, 0.0);
  const Mp want = oracle::Rhs2Mp({c.c1, c.lipschitz, c.f_theta0, c.theta0_norm, 10, hp.eta,
                                  hp.beta2, 0.0, hp.eps0, 1.0, 0.0, 16, 300, cc.mu_star, false});
  EXPECT_NEAR(r.rhs, D(want), 1e-10 * D(want));
  EXPECT_NEAR(r.rhs, r.leading_term + r.r_coupled_term, 1e-15 * r.rhs);
}

TEST(BetaZeroBound, LeadingTermStructure) {
  HyperParams hp = Thm2Params();
  AssumptionConstants c = Consts();
  c.f_theta0 = c.f_star;
  EXPECT_EQ(BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamW).leading_term, 0.0);
  c = Consts();
  const double lead = BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamW).leading_term;
  hp.total_steps *= 2;
  EXPECT_NEAR(BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamW).leading_term, lead / 2.0,
              1e-15 * lead);
}

TEST(BetaZeroBound, Preconditions) {
  HyperParams hp = Thm2Params();
  const AssumptionConstants c = Consts();
  hp.beta1 = 0.9;
  try {
    BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWrongTheorem);
  }
  hp = Thm2Params();
  try {
    BoundRhsTheorem2(c, hp, 0.1, BoundVariant::kAdamW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInadmissibleDelta0);
  }
  const BoundReport forced = BoundRhsTheorem2(c, hp, 0.1, BoundVariant::kAdamW, true);
  EXPECT_FALSE(forced.delta0_admissible);
  EXPECT_EQ(forced.warnings, std::vector<std::string>{"delta0_inadmissible_forced"});
  AssumptionConstants big = c;
  big.c1 = 1.5;
  EXPECT_THROW(BoundRhsTheorem2(big, hp, 200.0, BoundVariant::kAdamW), Error);
}

TEST(BetaZeroBound, BcConvergesToNonBcLeadingTerm) {
  const AssumptionConstants c = Consts();
  double prev = std::numeric_limits<double>::infinity();
  for (double phi : {1e-2, 1e-4, 1e-6}) {
    HyperParams hp = Thm2Params();
    // sigma chosen to hit the requested Phi with C = 1, B = 16.
    hp.clip.noise_multiplier = std::sqrt(phi) * 16.0;
    const BoundReport a = BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamW);
    const BoundReport b = BoundRhsTheorem2(c, hp, 200.0, BoundVariant::kAdamWBc);
    const double diff = std::abs(a.leading_term - b.leading_term);
    EXPECT_LT(diff, prev);
    prev = diff;
  }
}

HyperParams Thm3Params() {
  HyperParams hp = Thm2Params();
  hp.beta1 = 0.9;
  hp.beta2 = 0.999;
  hp.schedule = Schedule::kThm3;
  return hp;
}

TEST(MomentumBound, EMatchesFormula) {
  const HyperParams hp = Thm3Params();
  const AssumptionConstants c = Consts();
  const double d0 = 50.0;
  const double phi = Phi(1.0, 1.0, 16);
  const double g = 1.0 - 0.9 / 0.999;
  const double want = hp.eta * 10 * 1.0 * 0.1 * d0 / (g * 0.001) +
                      2.0 * hp.eta * hp.eta * 10 * 0.9 / (g * std::pow(0.001, 1.5)) +
                      12.0 * 10 * d0 * d0 * std::sqrt(0.1) / (std::pow(g, 1.5) * std::sqrt(0.001));
  EXPECT_NEAR(ETerm(c, hp, d0, phi, BoundVariant::kAdamW), want, 1e-12 * want);
  AssumptionConstants c2 = c;
  c2.d = 20;
  EXPECT_NEAR(ETerm(c2, hp, d0, phi, BoundVariant::kAdamW), 2.0 * want, 1e-12 * want);
  const double s = d0 * d0 - phi;
  const double want_bc = hp.eta * 10 * 0.1 * std::sqrt(s) / (g * 0.001) +
                         2.0 * hp.eta * hp.eta * 10 * 0.9 / (g * std::pow(0.001, 1.5)) +
                         12.0 * 10 * s * std::sqrt(0.1) / (std::pow(g, 1.5) * std::sqrt(0.001));
  EXPECT_NEAR(ETerm(c, hp, d0, phi, BoundVariant::kAdamWBc), want_bc, 1e-12 * want_bc);
}

TEST(MomentumBound, RhsAssembly) {
  const HyperParams hp = Thm3Params();
  const AssumptionConstants c = Consts();
  const BoundReport r = BoundRhsTheorem3(c, hp, 300.0, BoundVariant::kAdamW);
  ASSERT_TRUE(r.t_tilde.has_value());
  EXPECT_NEAR(*r.t_tilde, 300.0 - 9.0, 1e-12);
  EXPECT_NEAR(r.leading_term, 2.0 * (300.0 + 0.8) * c.f_theta0 / (hp.eta * 291.0), 1e-12);
  const double rr = 10.0 * (std::log(1.0 + 9e4 / (5e-8 * 0.001)) - 300.0 * std::log(0.999));
  EXPECT_NEAR(r.r, rr, 1e-10 * rr);
  EXPECT_NEAR(r.r_coupled_term, *r.e * rr, 1e-10 * r.r_coupled_term);
  EXPECT_NEAR(r.rhs, r.leading_term + r.r_coupled_term + r.decay_term, 1e-12 * r.rhs);
}

TEST(MomentumBound, Preconditions) {
  AssumptionConstants c = Consts();
  HyperParams hp = Thm3Params();
  hp.total_steps = 9;
  try {
    BoundRhsTheorem3(c, hp, 300.0, BoundVariant::kAdamW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHorizonTooShort);
  }
  hp = Thm3Params();
  hp.beta1 = 0.0;
  hp.schedule = Schedule::kThm3;
  try {
    BoundRhsTheorem3(c, hp, 300.0, BoundVariant::kAdamW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWrongTheorem);
  }
  hp = Thm3Params();
  hp.beta1 = 0.95;
  hp.beta2 = 0.9;
  try {
    BoundRhsTheorem3(c, hp, 300.0, BoundVariant::kAdamW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
  }
}

TEST(MomentumBound, SmallBeta1MiddleTermVanishes) {
  HyperParams hp = Thm3Params();
  const AssumptionConstants c = Consts();
  auto middle = [&](double b1) {
    hp.beta1 = b1;
    const double g = 1.0 - b1 / hp.beta2;
    return ETerm(c, hp, 50.0, 0.0, BoundVariant::kAdamW) -
           hp.eta * 10 * (1 - b1) * 50.0 / (g * (1 - hp.beta2)) -
           12.0 * 10 * 2500.0 * std::sqrt(1 - b1) / (std::pow(g, 1.5) * std::sqrt(1 - hp.beta2));
  };
  EXPECT_LT(std::abs(middle(1e-9)), 1e-6);
  EXPECT_GT(middle(0.5), 0.0);
  hp.beta1 = 1e-12;
  hp.total_steps = 5;
  HyperParams h2 = hp;
  h2.beta1 = 0.0;
  h2.schedule = Schedule::kThm2;
  for (std::int64_t t = 1; t <= 5; ++t) EXPECT_NEAR(LearningRate(hp, t), LearningRate(h2, t), 1e-13);
}

TEST(Tau, Distribution) {
  const auto uniform = TauDistribution(4, 0.0);
  for (double p : uniform) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto p = TauDistribution(2, 0.5);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.4, 1e-15);
  const auto q = TauDistribution(50, 0.9);
  EXPECT_GT(q.back(), 0.0);
}

TEST(Tau, SamplerFrequencies) {
  RngStream rng(21, 0);
  const TauSampler s(2, 0.5);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) zeros += s.Sample(rng) == 0;
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.6, 0.01);
}

TEST(EmpiricalCheck, BetaZeroMeanOfSquares) {
  BoundReport rep;
  rep.theorem = 2;
  rep.rhs = 3.0;
  rep.delta0_admissible = true;
  RngStream rng(0, 0);
  const BoundComparison c = EmpiricalBoundCheck({{1.0, 2.0}, {2.0, 2.0}}, {5, 6}, rep, 0.0, rng);
  EXPECT_DOUBLE_EQ(c.per_seed[0].lhs, 2.5);
  EXPECT_TRUE(c.per_seed[0].satisfied);
  EXPECT_FALSE(c.per_seed[1].satisfied);
  EXPECT_DOUBLE_EQ(c.satisfied_fraction, 0.5);
  EXPECT_FALSE(c.warning);
  rep.delta0_admissible = false;
  EXPECT_TRUE(EmpiricalBoundCheck({{1.0}}, {0}, rep, 0.0, rng).warning);
}

TEST(EmpiricalCheck, MissingNorms) {
  BoundReport rep;
  RngStream rng(0, 0);
  try {
    EmpiricalBoundCheck({{1.0, std::nan("")}}, {0}, rep, 0.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingData);
  }
  EXPECT_THROW(EmpiricalBoundCheck({}, {}, rep, 0.0, rng), Error);
}

TEST(EmpiricalCheck, MomentumTauWeighted) {
  BoundReport rep;
  rep.theorem = 3;
  rep.rhs = 10.0;
  rep.delta0_admissible = true;
  RngStream rng(4, 0);
  // Norms 0 at t = 0 and 1 at t = 1 with P(tau = 1) = 0.4.
  const BoundComparison c = EmpiricalBoundCheck({{0.0, 1.0}}, {0}, rep, 0.5, rng, 100000);
  EXPECT_NEAR(c.per_seed[0].lhs, 0.4, 0.01);
}

TEST(Json, NamedIntermediates) {
  const BoundReport r = BoundRhsTheorem3(Consts(), Thm3Params(), 300.0, BoundVariant::kAdamWBc);
  const nlohmann::json j = ToJson(r);
  for (const char* k : {"phi", "mu_star", "nu_star", "b_star", "delta0", "R_BC", "E_BC",
                        "c_lambda", "rhs", "T_tilde", "warnings"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}

}  // namespace
}  // namespace dpadamw
