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

// dpbench: calibrate noise, train, evaluate convergence bounds and check the
// second-moment bias from the command line.
//
// Exit codes: 0 success, 1 usage, 2 config, 3 precondition, 4 runtime.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dpadamw/accountant.hpp"
#include "dpadamw/bounds.hpp"
#include "dpadamw/errors.hpp"
#include "dpadamw/experiment.hpp"
#include "dpadamw/harness.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using dpadamw::Error;
using dpadamw::ErrorCode;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitRuntime = 4;

fs::path OutputRoot() {
  const char* root = std::getenv("DPBENCH_OUT");
  return (root != nullptr && *root != '\0') ? fs::path(root) : fs::path("runs");
}

void WriteJson(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
}

struct CalibrateArgs {
  double eps = 0.0;
  double delta = 1e-5;
  double q = 0.0;
  std::int64_t steps = 0;
  std::string mode = "rdp";
  double c2 = 1.0;
  std::optional<double> sigma;
  std::string out;
};

int RunCalibrate(const CalibrateArgs& a) {
  const auto mode = dpadamw::ParseAccountantMode(a.mode);
  if (!mode) throw Error(ErrorCode::kConfig, "unknown mode '" + a.mode + "'");

  dpadamw::PrivacySpec spec;
  if (a.sigma) {
    // Accounting request for a given sigma rather than a calibration.
    if (*a.sigma == 0.0) {
      json rec{{"non_private", true}, {"epsilon", nullptr}, {"sigma", 0.0}};
      std::cerr << "refused: sigma = 0 is non-private (epsilon is unbounded)\n"
                << rec.dump() << "\n";
      return kExitPrecondition;
    }
    dpadamw::MechanismParams m;
    m.sigma = *a.sigma;
    m.sampling_rate = a.q;
    m.total_steps = a.steps;
    m.delta = a.delta;
    m.mode = *mode;
    m.c2 = a.c2;
    spec = dpadamw::AccountMechanism(m);
  } else if (*mode == dpadamw::AccountantMode::kClosedForm) {
    spec.sigma = dpadamw::CalibrateSigmaClosedForm(a.eps, a.delta, a.q, a.steps, a.c2);
    spec.epsilon = a.eps;
  } else {
    spec.sigma = dpadamw::CalibrateSigmaRdp(a.eps, a.delta, a.q, a.steps);
    const auto conv = dpadamw::EpsilonRdp(spec.sigma, a.q, a.steps, a.delta);
    spec.epsilon = conv.epsilon;
    spec.argmin_order = conv.order;
  }
  spec.delta = a.delta;
  spec.sampling_rate = a.q;
  spec.total_steps = a.steps;
  spec.mode = *mode;

  const json rec = dpadamw::LedgerRecord(spec);
  std::printf("sigma = %.5f\n", spec.sigma);
  std::cout << rec.dump(2) << "\n";
  const fs::path out = a.out.empty() ? OutputRoot() / "calibrate" / "ledger.json" : fs::path(a.out);
  WriteJson(out, rec);
  return 0;
}

int RunTrain(const std::string& config_path, const std::string& out, int jobs) {
  dpadamw::ExperimentConfig cfg = dpadamw::LoadConfig(config_path);
  const fs::path dir = out.empty() ? dpadamw::ResolveOutputDir(cfg) : fs::path(out);
  const dpadamw::ExperimentResult result = dpadamw::RunExperiment(cfg, jobs);
  dpadamw::WriteExperiment(cfg, result, dir);
  std::cout << dpadamw::Summary(cfg, result).dump(2) << "\n";
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

struct BoundsArgs {
  std::string config;
  std::string delta0 = "min";
  std::string variant = "adamw";
  int theorem = 2;
  bool force = false;
  double alpha = 0.05;
  std::size_t tau_draws = 10000;
  std::string out;
  int jobs = 1;
};

int RunBoundsCmd(const BoundsArgs& a) {
  dpadamw::ExperimentConfig cfg = dpadamw::LoadConfig(a.config);
  dpadamw::BoundsRequest req;
  if (a.delta0 != "min") {
    try {
      std::size_t used = 0;
      req.delta0 = std::stod(a.delta0, &used);
      if (used != a.delta0.size()) throw std::invalid_argument(a.delta0);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, "--delta0 must be a number or 'min', got '" + a.delta0 + "'");
    }
  }
  const auto variant = dpadamw::ParseBoundVariant(a.variant);
  if (!variant) throw Error(ErrorCode::kConfig, "unknown variant '" + a.variant + "'");
  req.variant = *variant;
  req.theorem = a.theorem;
  req.force = a.force;
  req.alpha = a.alpha;
  req.tau_draws = a.tau_draws;

  const dpadamw::BoundsResult result = dpadamw::RunBounds(cfg, req, a.jobs);
  const fs::path dir = a.out.empty() ? dpadamw::ResolveOutputDir(cfg) /
                                           ("bounds_thm" + std::to_string(a.theorem) + "_" +
                                            a.variant)
                                     : fs::path(a.out);
  dpadamw::WriteBounds(result, dir);
  std::cout << dpadamw::ToJson(result.report).dump(2) << "\n";
  std::printf("mean_lhs = %.6g  rhs = %.6g  satisfied = %.2f%%\n", result.comparison.mean_lhs,
              result.comparison.rhs, 100.0 * result.comparison.satisfied_fraction);
  for (const std::string& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
  if (result.comparison.warning) std::cerr << "warning: satisfied fraction below 1 - alpha\n";
  return 0;
}

int RunVerifyBias(const dpadamw::BiasCheckConfig& c, const std::string& out) {
  if (c.sigma == 0.0) {
    std::cerr << "nothing to verify: sigma = 0 injects no noise, so v_hat carries no bias\n";
    return kExitPrecondition;
  }
  const dpadamw::BiasCheckReport r = dpadamw::StationaryBiasCheck(c);
  const json j = dpadamw::ToJson(r);
  std::cout << j.dump(2) << "\n";
  std::printf("estimated bias = %.6f +/- %.6f (SE), Phi = %.6f\n", r.pooled_bias,
              r.pooled_standard_error, r.phi);
  if (!out.empty()) WriteJson(out, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private AdamW benchmark tool"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the noise multiplier for a budget");
  calibrate->add_option("--eps", cal.eps, "Target epsilon")->required()->check(CLI::PositiveNumber);
  calibrate->add_option("--delta", cal.delta, "Target delta")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--q", cal.q, "Sampling rate B/N")->required()->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--steps", cal.steps, "Number of steps T")->required()->check(CLI::PositiveNumber);
  calibrate->add_option("--mode", cal.mode, "closed_form or rdp")
      ->check(CLI::IsMember({"closed_form", "rdp"}));
  calibrate->add_option("--c2", cal.c2, "Closed-form constant")->check(CLI::PositiveNumber);
  calibrate->add_option("--sigma", cal.sigma, "Account this sigma instead of calibrating");
  calibrate->add_option("--out", cal.out, "Ledger output path");

  std::string train_config;
  std::string train_out;
  int train_jobs = 1;
  auto* train = app.add_subcommand("train", "Run an experiment config over its seeds");
  train->add_option("--config", train_config, "Experiment JSON")->required();
  train->add_option("--out", train_out, "Output directory");
  train->add_option("--jobs", train_jobs, "Concurrent seeds")->check(CLI::PositiveNumber);

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "Evaluate a convergence bound against training runs");
  bounds->add_option("--config", ba.config, "Experiment JSON (quadratic task)")->required();
  bounds->add_option("--delta0", ba.delta0, "delta0 value or 'min'");
  bounds->add_option("--variant", ba.variant, "adamw or adamw_bc")
      ->check(CLI::IsMember({"adamw", "adamw_bc"}));
  bounds->add_option("--theorem", ba.theorem, "2 (beta1 = 0) or 3 (momentum)")
      ->check(CLI::IsMember({2, 3}));
  bounds->add_flag("--force", ba.force, "Evaluate even if delta0 is inadmissible");
  bounds->add_option("--alpha", ba.alpha, "Failure probability")->check(CLI::Range(0.0, 1.0));
  bounds->add_option("--tau-draws", ba.tau_draws, "tau samples per run (theorem 3)");
  bounds->add_option("--out", ba.out, "Output directory");
  bounds->add_option("--jobs", ba.jobs, "Concurrent seeds")->check(CLI::PositiveNumber);

  dpadamw::BiasCheckConfig bias;
  std::string bias_out;
  auto* verify = app.add_subcommand("verify-bias", "Monte-Carlo check of the second-moment bias");
  verify->add_option("--sigma", bias.sigma, "Noise multiplier")->check(CLI::NonNegativeNumber);
  verify->add_option("--clip", bias.clip_norm, "Clip norm C")->check(CLI::PositiveNumber);
  verify->add_option("--batch", bias.batch_size, "Batch size B")->check(CLI::PositiveNumber);
  verify->add_option("--beta2", bias.beta2, "Second-moment decay")->check(CLI::Range(0.0, 1.0));
  verify->add_option("--steps", bias.steps, "Burn-in steps")->check(CLI::PositiveNumber);
  verify->add_option("--seeds", bias.seeds, "Independent seeds")->check(CLI::PositiveNumber);
  verify->add_option("--base-seed", bias.base_seed, "Base seed");
  verify->add_option("--out", bias_out, "Report output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*calibrate) return RunCalibrate(cal);
    if (*train) return RunTrain(train_config, train_out, train_jobs);
    if (*bounds) return RunBoundsCmd(ba);
    if (*verify) return RunVerifyBias(bias, bias_out);
  } catch (const Error& e) {
    std::cerr << "error [" << dpadamw::ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    switch (e.category()) {
      case dpadamw::ErrorCategory::kConfig: return kExitConfig;
      case dpadamw::ErrorCategory::kPrecondition: return kExitPrecondition;
      case dpadamw::ErrorCategory::kRuntime: return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
