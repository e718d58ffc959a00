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

#ifndef DPADAMW_HARNESS_HPP_
#define DPADAMW_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpadamw/accountant.hpp"
#include "dpadamw/numerics.hpp"
#include "dpadamw/optimizers.hpp"

namespace dpadamw {

struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> features;  // row-major n x p
  std::vector<int> labels;       // empty for the quadratic task
  int num_classes = 0;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * p, p}; }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Two unit-covariance Gaussian clusters centred at -/+ (separation/2) e_1,
// labels 0 / 1, floor(n/2) points each. `note` receives a message when n is
// odd and one point is dropped.
Dataset GenBlobs(std::size_t n, std::size_t p, double separation, std::uint64_t seed,
                 std::string* note = nullptr);

enum class ModelKind { kQuadratic, kLogistic, kMlp1 };

std::string_view ModelKindName(ModelKind k);
std::optional<ModelKind> ParseModelKind(std::string_view name);

// quadratic: f_i(theta) = 1/2 ||theta - theta*||^2 + <xi_i, theta>, with the
//            perturbations xi_i stored as dataset rows (antithetic pairs, so
//            they average to zero and F = 1/2 ||theta - theta*||^2).
// logistic:  theta = [w (p), b], binary cross-entropy.
// mlp1:      theta = [W1 (hidden x p), b1 (hidden), w2 (hidden), b2], tanh
//            hidden layer, one sigmoid output.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t input_dim = 1;
  std::size_t hidden = 0;
  ParamVector theta_star;    // quadratic only
  double noise_bound = 0.0;  // quadratic only
  double radius = 0.0;       // quadratic only: projection ball around theta*

  std::size_t ParamCount() const;
};

GradMatrix PerSampleGradients(const ModelSpec& model, const ParamVector& theta,
                              const Dataset& data, std::span<const std::size_t> batch);
std::vector<double> PerSampleLosses(const ModelSpec& model, const ParamVector& theta,
                                    const Dataset& data, std::span<const std::size_t> batch);
// grad F(theta) = theta - theta*. Quadratic only; other models throw
// kUnsupported.
ParamVector TrueObjectiveGradient(const ModelSpec& model, const ParamVector& theta);
double QuadraticObjective(const ModelSpec& model, const ParamVector& theta);
double Accuracy(const ModelSpec& model, const ParamVector& theta, const Dataset& data);
// Projects theta onto the ball of radius model.radius around theta*.
void ProjectToBall(const ModelSpec& model, ParamVector& theta);

struct QuadraticTask {
  ModelSpec model;
  Dataset perturbations;
  ParamVector theta0;
};

// theta* ~ N(0, I/d); theta0 = theta* + init_distance * u for a random unit
// u; projection radius = radius_factor * init_distance.
QuadraticTask MakeQuadraticTask(std::size_t d, std::size_t n, double noise_bound,
                                double init_distance, double radius_factor, std::uint64_t seed);

// Assumption certificate for a quadratic task: F* = 0, L = 1,
// C1 = radius + noise_bound.
struct QuadraticCertificate {
  double f_star = 0.0;
  double lipschitz = 1.0;
  double c1 = 0.0;
  double f_theta0 = 0.0;
  double theta0_norm = 0.0;
  std::size_t d = 0;
};
QuadraticCertificate CertifyQuadratic(const QuadraticTask& task);

enum class TaskKind { kQuadratic, kBlobs };

std::string_view TaskKindName(TaskKind k);
std::optional<TaskKind> ParseTaskKind(std::string_view name);

struct TaskConfig {
  TaskKind kind = TaskKind::kBlobs;
  std::size_t n_train = 1000;
  std::size_t n_test = 500;
  std::size_t dim = 2;
  double separation = 4.0;
  double noise_bound = 0.3;
  double init_distance = 0.05;
  double radius_factor = 10.0;
  std::uint64_t data_seed = 0;

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

struct PrivacyConfig {
  double epsilon = 3.0;
  double delta = 1e-5;
  AccountantMode mode = AccountantMode::kRdp;
  // When set, used directly instead of calibrating against epsilon.
  std::optional<double> sigma;
  double c2 = 1.0;

  friend bool operator==(const PrivacyConfig&, const PrivacyConfig&) = default;
};

struct RunConfig {
  TaskConfig task;
  ModelKind model = ModelKind::kLogistic;
  std::size_t hidden = 8;
  OptimizerKind optimizer = OptimizerKind::kDpAdamW;
  // hp.clip.noise_multiplier is filled in by Prepare.
  HyperParams hp;
  // When set, T = epochs * ceil(N / B) overrides hp.total_steps.
  std::optional<std::int64_t> epochs;
  PrivacyConfig privacy;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Everything derived from a RunConfig that is shared by all seeds.
struct PreparedRun {
  RunConfig config;
  ModelSpec model;
  Dataset train;
  std::optional<Dataset> test;
  ParamVector theta0;
  HyperParams hp;  // resolved T and sigma
  double sampling_rate = 1.0;
  double phi = 0.0;
  std::size_t steps_per_epoch = 1;
  bool is_private = true;
};

PreparedRun Prepare(const RunConfig& config);

struct RunMetrics {
  std::uint64_t seed = 0;
  std::vector<double> loss;
  std::vector<double> grad_norm_f;  // ||grad F(theta_{t-1})||, NaN when unavailable
  std::vector<double> clip_fraction;
  std::vector<double> clamp_fraction;
  std::vector<double> update_norm;
  std::vector<double> epoch_test_accuracy;
  std::vector<double> epoch_clamp_fraction;
  std::optional<double> final_test_accuracy;
  std::optional<double> final_objective;  // quadratic only
  ParamVector final_theta;
  PrivacySpec privacy;

  std::size_t steps() const { return loss.size(); }
};

RunMetrics RunTraining(const PreparedRun& run, std::uint64_t seed);
inline RunMetrics RunTraining(const RunConfig& config, std::uint64_t seed) {
  return RunTraining(Prepare(config), seed);
}

// Columns: step,loss,grad_norm_F,clip_fraction,clamp_fraction,update_norm.
void WriteMetricsCsv(const RunMetrics& metrics, std::ostream& out);

struct BiasCheckConfig {
  double sigma = 1.0;
  double clip_norm = 1.0;
  std::size_t batch_size = 4;
  double beta2 = 0.99;
  std::int64_t steps = 1000;
  std::size_t seeds = 1000;
  std::vector<double> gradient = {0.3, -0.2, 0.1, 0.4};
  std::uint64_t base_seed = 0;
};

struct BiasCoordinate {
  double second_moment = 0.0;   // s_i = g_i^2 of the clipped mean
  double mean_v_hat = 0.0;
  double bias = 0.0;            // mean v_hat - s
  double corrected_error = 0.0; // mean (v_hat - Phi) - s
  double standard_error = 0.0;
};

struct BiasCheckReport {
  double phi = 0.0;
  double pooled_bias = 0.0;
  double pooled_standard_error = 0.0;
  std::vector<BiasCoordinate> coordinates;
  bool bias_matches_phi = false;       // every |bias - Phi| <= 5 SE
  bool corrected_recovers_g2 = false;  // every |corrected_error| <= 5 SE
};

// Feeds a constant clipped-mean gradient through the mechanism and the DP-Adam
// moment recursion across independent seeds, then compares the across-seed
// mean of v_hat with g^2 + Phi. Requires sigma > 0 and beta2^steps < 1e-3.
BiasCheckReport StationaryBiasCheck(const BiasCheckConfig& config);

}  // namespace dpadamw

#endif  // DPADAMW_HARNESS_HPP_
