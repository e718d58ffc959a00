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

#include "dpadamw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "dpadamw/bounds.hpp"
#include "dpadamw/errors.hpp"
#include "dpadamw/privatizer.hpp"

namespace dpadamw {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// RNG stream ids under a run seed.
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kInitStream = 3;
// Stream ids under the data seed.
constexpr std::uint64_t kTrainDataStream = 0;
constexpr std::uint64_t kTestDataStream = 1;
constexpr std::uint64_t kQuadraticStream = 2;

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z))
double Softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Dataset Blobs(std::size_t n, std::size_t p, double separation, RngStream rng,
              std::string* note) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "blobs need N >= 2");
  if (p < 1) throw Error(ErrorCode::kInvalidArgument, "blobs need p >= 1");
  if (!(separation >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "separation must be >= 0");
  const std::size_t per_class = n / 2;
  if (n % 2 != 0 && note != nullptr) {
    *note = "odd N = " + std::to_string(n) + " rounded down to " + std::to_string(2 * per_class);
  }
  Dataset ds;
  ds.n = 2 * per_class;
  ds.p = p;
  ds.num_classes = 2;
  ds.features.resize(ds.n * p);
  ds.labels.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const int label = i < per_class ? 0 : 1;
    ds.labels[i] = label;
    for (std::size_t j = 0; j < p; ++j) ds.features[i * p + j] = rng.Gaussian();
    ds.features[i * p] += (label == 0 ? -0.5 : 0.5) * separation;
  }
  return ds;
}

void CheckTheta(const ModelSpec& model, const ParamVector& theta) {
  if (theta.size() != model.ParamCount()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "theta has " + std::to_string(theta.size()) + " entries, model expects " +
                    std::to_string(model.ParamCount()));
  }
}

void CheckBatch(const ModelSpec& model, const Dataset& data, std::span<const std::size_t> batch) {
  if (data.p != model.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset feature width does not match the model");
  }
  for (std::size_t i : batch) {
    if (i >= data.n) throw Error(ErrorCode::kInvalidArgument, "batch index out of range");
  }
  if (model.kind != ModelKind::kQuadratic && data.labels.size() != data.n) {
    throw Error(ErrorCode::kInvalidArgument, "classification model needs labels");
  }
}

// Forward pass of the MLP for one sample; fills hidden activations and
// returns the logit.
double MlpForward(const ModelSpec& m, std::span<const double> theta, std::span<const double> x,
                  std::vector<double>& h) {
  const std::size_t p = m.input_dim;
  const std::size_t hd = m.hidden;
  const double* w1 = theta.data();
  const double* b1 = w1 + hd * p;
  const double* w2 = b1 + hd;
  const double b2 = w2[hd];
  h.resize(hd);
  double z = b2;
  for (std::size_t k = 0; k < hd; ++k) {
    double a = b1[k];
    for (std::size_t j = 0; j < p; ++j) a += w1[k * p + j] * x[j];
    h[k] = std::tanh(a);
    z += w2[k] * h[k];
  }
  return z;
}

double Logit(const ModelSpec& m, std::span<const double> theta, std::span<const double> x,
             std::vector<double>& scratch) {
  if (m.kind == ModelKind::kLogistic) {
    double z = theta[m.input_dim];
    for (std::size_t j = 0; j < m.input_dim; ++j) z += theta[j] * x[j];
    return z;
  }
  return MlpForward(m, theta, x, scratch);
}

}  // namespace

Dataset GenBlobs(std::size_t n, std::size_t p, double separation, std::uint64_t seed,
                 std::string* note) {
  return Blobs(n, p, separation, RngStream(seed, kTrainDataStream), note);
}

std::string_view ModelKindName(ModelKind k) {
  switch (k) {
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp1: return "mlp1";
  }
  return "logistic";
}

std::optional<ModelKind> ParseModelKind(std::string_view name) {
  if (name == "quadratic") return ModelKind::kQuadratic;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp1") return ModelKind::kMlp1;
  return std::nullopt;
}

std::string_view TaskKindName(TaskKind k) {
  return k == TaskKind::kQuadratic ? "quadratic" : "blobs";
}

std::optional<TaskKind> ParseTaskKind(std::string_view name) {
  if (name == "quadratic") return TaskKind::kQuadratic;
  if (name == "blobs") return TaskKind::kBlobs;
  return std::nullopt;
}

std::size_t ModelSpec::ParamCount() const {
  switch (kind) {
    case ModelKind::kQuadratic: return input_dim;
    case ModelKind::kLogistic: return input_dim + 1;
    case ModelKind::kMlp1: return hidden * input_dim + 2 * hidden + 1;
  }
  return 0;
}

GradMatrix PerSampleGradients(const ModelSpec& model, const ParamVector& theta,
                              const Dataset& data, std::span<const std::size_t> batch) {
  CheckTheta(model, theta);
  CheckBatch(model, data, batch);
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  const std::size_t d = theta.size();
  std::vector<double> out(batch.size() * d, 0.0);
  std::vector<double> h;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto x = data.row(batch[r]);
    double* g = out.data() + r * d;
    switch (model.kind) {
      case ModelKind::kQuadratic:
        for (std::size_t j = 0; j < d; ++j) g[j] = theta[j] - model.theta_star[j] + x[j];
        break;
      case ModelKind::kLogistic: {
        const double z = Logit(model, theta.view(), x, h);
        const double dz = Sigmoid(z) - data.labels[batch[r]];
        for (std::size_t j = 0; j < model.input_dim; ++j) g[j] = dz * x[j];
        g[model.input_dim] = dz;
        break;
      }
      case ModelKind::kMlp1: {
        const std::size_t p = model.input_dim;
        const std::size_t hd = model.hidden;
        const double z = MlpForward(model, theta.view(), x, h);
        const double dz = Sigmoid(z) - data.labels[batch[r]];
        const double* w2 = theta.view().data() + hd * p + hd;
        double* gw1 = g;
        double* gb1 = g + hd * p;
        double* gw2 = gb1 + hd;
        for (std::size_t k = 0; k < hd; ++k) {
          const double da = dz * w2[k] * (1.0 - h[k] * h[k]);
          for (std::size_t j = 0; j < p; ++j) gw1[k * p + j] = da * x[j];
          gb1[k] = da;
          gw2[k] = dz * h[k];
        }
        gw2[hd] = dz;
        break;
      }
    }
  }
  return GradMatrix(batch.size(), d, std::move(out));
}

std::vector<double> PerSampleLosses(const ModelSpec& model, const ParamVector& theta,
                                    const Dataset& data, std::span<const std::size_t> batch) {
  CheckTheta(model, theta);
  CheckBatch(model, data, batch);
  std::vector<double> out;
  out.reserve(batch.size());
  std::vector<double> h;
  for (std::size_t i : batch) {
    const auto x = data.row(i);
    if (model.kind == ModelKind::kQuadratic) {
      double sq = 0.0;
      double lin = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double diff = theta[j] - model.theta_star[j];
        sq += diff * diff;
        lin += x[j] * theta[j];
      }
      out.push_back(0.5 * sq + lin);
    } else {
      const double z = Logit(model, theta.view(), x, h);
      out.push_back(Softplus(z) - data.labels[i] * z);
    }
  }
  return out;
}

ParamVector TrueObjectiveGradient(const ModelSpec& model, const ParamVector& theta) {
  if (model.kind != ModelKind::kQuadratic) {
    throw Error(ErrorCode::kUnsupported,
                "exact objective gradient is only available for the quadratic model");
  }
  CheckTheta(model, theta);
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = theta[j] - model.theta_star[j];
  return ParamVector(std::move(g));
}

double QuadraticObjective(const ModelSpec& model, const ParamVector& theta) {
  const ParamVector g = TrueObjectiveGradient(model, theta);
  const double n = L2Norm(g);
  return 0.5 * n * n;
}

double Accuracy(const ModelSpec& model, const ParamVector& theta, const Dataset& data) {
  if (model.kind == ModelKind::kQuadratic) {
    throw Error(ErrorCode::kUnsupported, "accuracy is undefined for the quadratic model");
  }
  CheckTheta(model, theta);
  if (data.n == 0) return kNaN;
  std::vector<double> h;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    const int pred = Logit(model, theta.view(), data.row(i), h) > 0.0 ? 1 : 0;
    correct += pred == data.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.n);
}

void ProjectToBall(const ModelSpec& model, ParamVector& theta) {
  if (model.kind != ModelKind::kQuadratic || !(model.radius > 0.0)) return;
  double sq = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double diff = theta[j] - model.theta_star[j];
    sq += diff * diff;
  }
  const double dist = std::sqrt(sq);
  if (dist <= model.radius) return;
  const double scale = model.radius / dist;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    theta[j] = model.theta_star[j] + (theta[j] - model.theta_star[j]) * scale;
  }
}

QuadraticTask MakeQuadraticTask(std::size_t d, std::size_t n, double noise_bound,
                                double init_distance, double radius_factor, std::uint64_t seed) {
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "quadratic task needs d >= 1");
  if (n < 2 || n % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "quadratic task needs an even N >= 2");
  }
  if (!(noise_bound >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise bound must be >= 0");
  if (!(init_distance > 0.0)) throw Error(ErrorCode::kInvalidArgument, "init distance must be > 0");
  if (!(radius_factor >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "radius factor must be >= 1");

  RngStream rng(seed, kQuadraticStream);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> star(d);
  for (double& x : star) x = scale * rng.Gaussian();

  auto unit = [&] {
    std::vector<double> u(d);
    double norm = 0.0;
    do {
      for (double& x : u) x = rng.Gaussian();
      norm = L2Norm(u);
    } while (norm == 0.0);
    for (double& x : u) x /= norm;
    return u;
  };

  std::vector<double> theta0(d);
  const std::vector<double> u0 = unit();
  for (std::size_t j = 0; j < d; ++j) theta0[j] = star[j] + init_distance * u0[j];

  // Uniform in the ball: radius noise_bound * U^(1/d), in +/- pairs.
  Dataset pert;
  pert.n = n;
  pert.p = d;
  pert.features.resize(n * d);
  for (std::size_t i = 0; i < n; i += 2) {
    const std::vector<double> u = unit();
    const double r = noise_bound * std::pow(rng.Uniform(), 1.0 / static_cast<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
      pert.features[i * d + j] = r * u[j];
      pert.features[(i + 1) * d + j] = -r * u[j];
    }
  }

  QuadraticTask task;
  task.model.kind = ModelKind::kQuadratic;
  task.model.input_dim = d;
  task.model.theta_star = ParamVector(std::move(star));
  task.model.noise_bound = noise_bound;
  task.model.radius = radius_factor * init_distance;
  task.perturbations = std::move(pert);
  task.theta0 = ParamVector(std::move(theta0));
  return task;
}

QuadraticCertificate CertifyQuadratic(const QuadraticTask& task) {
  QuadraticCertificate c;
  c.d = task.model.input_dim;
  c.c1 = task.model.radius + task.model.noise_bound;
  c.f_theta0 = QuadraticObjective(task.model, task.theta0);
  c.theta0_norm = L2Norm(task.theta0);
  return c;
}

PreparedRun Prepare(const RunConfig& config) {
  PreparedRun run;
  run.config = config;
  const TaskConfig& task = config.task;
  const OptimizerInfo& info = InfoOf(config.optimizer);
  run.is_private = info.privatized_input;

  if (task.kind == TaskKind::kQuadratic) {
    if (config.model != ModelKind::kQuadratic) {
      throw Error(ErrorCode::kConfig, "the quadratic task requires model 'quadratic'");
    }
    QuadraticTask q = MakeQuadraticTask(task.dim, task.n_train, task.noise_bound,
                                        task.init_distance, task.radius_factor, task.data_seed);
    run.model = std::move(q.model);
    run.train = std::move(q.perturbations);
    run.theta0 = std::move(q.theta0);
  } else {
    if (config.model == ModelKind::kQuadratic) {
      throw Error(ErrorCode::kConfig, "model 'quadratic' requires the quadratic task");
    }
    run.train = Blobs(task.n_train, task.dim, task.separation,
                      RngStream(task.data_seed, kTrainDataStream), nullptr);
    if (task.n_test >= 2) {
      run.test = Blobs(task.n_test, task.dim, task.separation,
                       RngStream(task.data_seed, kTestDataStream), nullptr);
    }
    run.model.kind = config.model;
    run.model.input_dim = task.dim;
    run.model.hidden = config.model == ModelKind::kMlp1 ? config.hidden : 0;
    if (config.model == ModelKind::kMlp1 && config.hidden < 1) {
      throw Error(ErrorCode::kConfig, "mlp1 needs hidden >= 1");
    }
    run.theta0 = ParamVector::Zeros(run.model.ParamCount());
  }

  run.hp = config.hp;
  const std::size_t b = run.hp.clip.batch_size;
  if (b < 1 || b > run.train.n) {
    throw Error(ErrorCode::kConfig, "batch size must lie in [1, N]");
  }
  run.steps_per_epoch = (run.train.n + b - 1) / b;
  if (config.epochs) {
    if (*config.epochs < 1) throw Error(ErrorCode::kConfig, "epochs must be >= 1");
    run.hp.total_steps = *config.epochs * static_cast<std::int64_t>(run.steps_per_epoch);
  }
  run.sampling_rate = static_cast<double>(b) / static_cast<double>(run.train.n);

  double sigma = 0.0;
  if (run.is_private) {
    const PrivacyConfig& pc = config.privacy;
    if (pc.sigma) {
      sigma = *pc.sigma;
    } else if (pc.mode == AccountantMode::kRdp) {
      sigma = CalibrateSigmaRdp(pc.epsilon, pc.delta, run.sampling_rate, run.hp.total_steps);
    } else {
      sigma = CalibrateSigmaClosedForm(pc.epsilon, pc.delta, run.sampling_rate,
                                       run.hp.total_steps, pc.c2);
    }
  }
  run.hp.clip.noise_multiplier = sigma;
  run.hp.Validate();
  run.phi = Phi(sigma, run.hp.clip.clip_norm, b);
  return run;
}

RunMetrics RunTraining(const PreparedRun& run, std::uint64_t seed) {
  const HyperParams& hp = run.hp;
  const std::size_t n = run.train.n;
  const std::size_t b = hp.clip.batch_size;
  const auto steps = static_cast<std::size_t>(hp.total_steps);
  const bool quadratic = run.model.kind == ModelKind::kQuadratic;

  RngStream noise_rng(seed, kNoiseStream);
  RngStream shuffle_rng(seed, kShuffleStream);
  RngStream init_rng(seed, kInitStream);

  ParamVector theta0 = run.theta0;
  if (run.model.kind == ModelKind::kMlp1) {
    const std::size_t p = run.model.input_dim;
    const std::size_t hd = run.model.hidden;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(p));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t k = 0; k < hd * p; ++k) theta0[k] = s1 * init_rng.Gaussian();
    for (std::size_t k = 0; k < hd; ++k) theta0[hd * p + hd + k] = s2 * init_rng.Gaussian();
  }
  OptimizerState state = OptimizerState::Initial(std::move(theta0));

  RunMetrics metrics;
  metrics.seed = seed;
  metrics.loss.reserve(steps);
  metrics.grad_norm_f.reserve(steps);
  metrics.clip_fraction.reserve(steps);
  metrics.clamp_fraction.reserve(steps);
  metrics.update_norm.reserve(steps);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> batch(b);
  double epoch_clamp = 0.0;
  std::size_t epoch_steps = 0;

  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t in_epoch = step % run.steps_per_epoch;
    if (in_epoch == 0) {
      for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[shuffle_rng.UniformIndex(i + 1)]);
      }
    }
    for (std::size_t j = 0; j < b; ++j) batch[j] = perm[(in_epoch * b + j) % n];

    try {
      const GradMatrix grads = PerSampleGradients(run.model, state.theta, run.train, batch);
      const std::vector<double> losses = PerSampleLosses(run.model, state.theta, run.train, batch);
      metrics.loss.push_back(std::accumulate(losses.begin(), losses.end(), 0.0) /
                             static_cast<double>(b));
      metrics.grad_norm_f.push_back(
          quadratic ? L2Norm(TrueObjectiveGradient(run.model, state.theta)) : kNaN);

      StepResult result;
      double clip_fraction = 0.0;
      if (run.is_private) {
        const PrivatizedGradient pg = Privatize(grads, hp.clip, noise_rng);
        clip_fraction = pg.clip_fraction;
        switch (run.config.optimizer) {
          case OptimizerKind::kDpSgd: result = StepDpSgd(state, pg, hp); break;
          case OptimizerKind::kDpAdam: result = StepDpAdam(state, pg, hp); break;
          case OptimizerKind::kDpAdamBc: result = StepDpAdamBc(state, pg, hp, run.phi); break;
          case OptimizerKind::kDpAdamW: result = StepDpAdamW(state, pg, hp); break;
          case OptimizerKind::kDpAdamWBc: result = StepDpAdamWBc(state, pg, hp, run.phi); break;
          default: throw Error(ErrorCode::kInvalidArgument, "not a private optimizer");
        }
      } else {
        std::vector<double> mean(grads.cols(), 0.0);
        std::size_t over = 0;
        for (std::size_t r = 0; r < grads.rows(); ++r) {
          const auto row = grads.row(r);
          if (L2Norm(row) > hp.clip.clip_norm) ++over;
          for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
        }
        for (double& x : mean) x /= static_cast<double>(b);
        clip_fraction = static_cast<double>(over) / static_cast<double>(b);
        const ParamVector g(std::move(mean));
        OptimizerState next;
        switch (run.config.optimizer) {
          case OptimizerKind::kSgd: next = StepReferenceSgd(state, g, hp); break;
          case OptimizerKind::kAdam: next = StepReferenceAdam(state, g, hp); break;
          case OptimizerKind::kAdamW: next = StepReferenceAdamW(state, g, hp); break;
          default: throw Error(ErrorCode::kInvalidArgument, "not a reference optimizer");
        }
        double sq = 0.0;
        for (std::size_t j = 0; j < next.theta.size(); ++j) {
          const double delta = next.theta[j] - state.theta[j];
          sq += delta * delta;
        }
        result.state = std::move(next);
        result.diagnostics.update_norm = std::sqrt(sq);
      }
      if (quadratic) ProjectToBall(run.model, result.state.theta);
      if (!result.state.theta.AllFinite()) {
        throw Error(ErrorCode::kDomain, "parameters became non-finite");
      }
      metrics.clip_fraction.push_back(clip_fraction);
      metrics.clamp_fraction.push_back(result.diagnostics.clamp_fraction);
      metrics.update_norm.push_back(result.diagnostics.update_norm);
      state = std::move(result.state);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(step + 1) + ": " + e.what());
    }

    epoch_clamp += metrics.clamp_fraction.back();
    ++epoch_steps;
    const bool epoch_done = in_epoch + 1 == run.steps_per_epoch || step + 1 == steps;
    if (epoch_done) {
      metrics.epoch_clamp_fraction.push_back(epoch_clamp / static_cast<double>(epoch_steps));
      epoch_clamp = 0.0;
      epoch_steps = 0;
      if (run.test) metrics.epoch_test_accuracy.push_back(Accuracy(run.model, state.theta, *run.test));
    }
  }

  if (run.test) metrics.final_test_accuracy = Accuracy(run.model, state.theta, *run.test);
  if (quadratic) metrics.final_objective = QuadraticObjective(run.model, state.theta);
  metrics.final_theta = state.theta;

  MechanismParams mech;
  mech.sigma = run.is_private ? hp.clip.noise_multiplier : 0.0;
  mech.clip_norm = hp.clip.clip_norm;
  mech.batch_size = b;
  mech.sampling_rate = run.sampling_rate;
  mech.total_steps = hp.total_steps;
  mech.delta = run.config.privacy.delta;
  mech.mode = run.config.privacy.mode;
  mech.c2 = run.config.privacy.c2;
  metrics.privacy = AccountMechanism(mech);
  return metrics;
}

void WriteMetricsCsv(const RunMetrics& m, std::ostream& out) {
  out << "step,loss,grad_norm_F,clip_fraction,clamp_fraction,update_norm\n";
  char buf[64];
  auto put = [&](double x) {
    if (std::isnan(x)) return;
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf;
  };
  for (std::size_t i = 0; i < m.steps(); ++i) {
    out << (i + 1) << ',';
    put(m.loss[i]);
    out << ',';
    put(m.grad_norm_f[i]);
    out << ',';
    put(m.clip_fraction[i]);
    out << ',';
    put(m.clamp_fraction[i]);
    out << ',';
    put(m.update_norm[i]);
    out << '\n';
  }
}

BiasCheckReport StationaryBiasCheck(const BiasCheckConfig& cfg) {
  if (!(cfg.sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma = 0 injects no bias; nothing to verify");
  }
  if (cfg.seeds < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 seeds");
  if (cfg.gradient.empty()) throw Error(ErrorCode::kInvalidDimension, "empty gradient");
  if (!(std::pow(cfg.beta2, static_cast<double>(cfg.steps)) < 1e-3)) {
    throw Error(ErrorCode::kInvalidArgument,
                "burn-in too short: beta2^steps must be < 1e-3");
  }
  const std::size_t d = cfg.gradient.size();
  ClipConfig clip{cfg.clip_norm, cfg.batch_size, cfg.sigma};
  clip.Validate();

  std::vector<double> rows;
  rows.reserve(cfg.batch_size * d);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    rows.insert(rows.end(), cfg.gradient.begin(), cfg.gradient.end());
  }
  const GradMatrix grads(cfg.batch_size, d, std::move(rows));
  const GradMatrix clipped = ClipPerSample(grads, cfg.clip_norm);

  HyperParams hp;
  hp.beta1 = 0.0;
  hp.beta2 = cfg.beta2;
  hp.eta = 1e-3;
  hp.clip = clip;
  hp.total_steps = cfg.steps;

  BiasCheckReport report;
  report.phi = Phi(cfg.sigma, cfg.clip_norm, cfg.batch_size);
  std::vector<double> sum(d, 0.0);
  std::vector<double> sum_sq(d, 0.0);
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    RngStream rng(cfg.base_seed, s);
    OptimizerState state = OptimizerState::Initial(ParamVector::Zeros(d));
    StepResult last;
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
      const PrivatizedGradient pg = Privatize(grads, clip, rng);
      last = StepDpAdam(state, pg, hp);
      state = std::move(last.state);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double v = last.diagnostics.v_hat[j];
      sum[j] += v;
      sum_sq[j] += v * v;
    }
  }

  const auto n = static_cast<double>(cfg.seeds);
  bool bias_ok = true;
  bool corrected_ok = true;
  double pooled_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    BiasCoordinate c;
    c.second_moment = clipped(0, j) * clipped(0, j);
    c.mean_v_hat = sum[j] / n;
    const double var = (sum_sq[j] - n * c.mean_v_hat * c.mean_v_hat) / (n - 1.0);
    c.standard_error = std::sqrt(std::max(var, 0.0) / n);
    c.bias = c.mean_v_hat - c.second_moment;
    c.corrected_error = (c.mean_v_hat - report.phi) - c.second_moment;
    bias_ok = bias_ok && std::abs(c.bias - report.phi) <= 5.0 * c.standard_error;
    corrected_ok = corrected_ok && std::abs(c.corrected_error) <= 5.0 * c.standard_error;
    report.pooled_bias += c.bias / static_cast<double>(d);
    pooled_var += c.standard_error * c.standard_error;
    report.coordinates.push_back(c);
  }
  report.pooled_standard_error = std::sqrt(pooled_var) / static_cast<double>(d);
  report.bias_matches_phi = bias_ok;
  report.corrected_recovers_g2 = corrected_ok;
  return report;
}

}  // namespace dpadamw
