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

#ifndef DPADAMW_EXPERIMENT_HPP_
#define DPADAMW_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpadamw/accountant.hpp"
#include "dpadamw/bounds.hpp"
#include "dpadamw/harness.hpp"
#include "json.hpp"

namespace dpadamw {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kOutputSchemaVersion = 1;

// JSON experiment description. Layout (all sections optional except
// schema_version; missing keys take the defaults of the underlying structs):
//
//   {
//     "schema_version": 1,
//     "name": "blobs-dp-adamw",
//     "task": {"kind": "blobs" | "quadratic", "n_train", "n_test", "dim",
//              "separation", "noise_bound", "init_distance", "radius_factor",
//              "data_seed"},
//     "model": {"kind": "logistic" | "mlp1" | "quadratic", "hidden"},
//     "optimizer": "dp-adamw",
//     "hyperparams": {"eta", "schedule", "beta1", "beta2", "weight_decay",
//                     "eps0", "gamma", "clip_norm", "batch_size",
//                     "total_steps", "epochs"},
//     "privacy": {"epsilon", "delta", "mode", "sigma", "c2"},
//     "seeds": [0, 1, 2],
//     "output_dir": "runs/blobs"
//   }
//
// Unknown keys are rejected with a kConfig error naming the key.
struct ExperimentConfig {
  std::string name = "experiment";
  RunConfig run;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig ConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ExperimentConfig& config);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// output_dir if set, else $DPBENCH_OUT/<name>, else runs/<name>.
std::filesystem::path ResolveOutputDir(const ExperimentConfig& config);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// thrown by any task is rethrown after all threads join.
void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct ExperimentResult {
  PreparedRun prepared;
  std::vector<RunMetrics> runs;  // in seed order
};

ExperimentResult RunExperiment(const ExperimentConfig& config, int jobs = 1);

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one seed
};
SummaryStat MeanStd(const std::vector<double>& values);
double Round2(double x);

// Mean and sample std of the final test accuracy (percent, 2 decimals) and,
// for the quadratic task, of the final objective.
nlohmann::json Summary(const ExperimentConfig& config, const ExperimentResult& result);

// config.json, seed_<s>.csv, summary.json, ledger.json.
void WriteExperiment(const ExperimentConfig& config, const ExperimentResult& result,
                     const std::filesystem::path& dir);

struct BoundsRequest {
  std::optional<double> delta0;  // nullopt: minimal admissible value
  BoundVariant variant = BoundVariant::kAdamW;
  int theorem = 2;
  bool force = false;
  double alpha = 0.05;
  std::size_t tau_draws = 10000;
};

struct BoundsResult {
  AssumptionConstants constants;
  BoundReport report;
  BoundComparison comparison;
};

// Constants certified by the quadratic fixture of a prepared run.
AssumptionConstants QuadraticConstants(const PreparedRun& run, double alpha);

BoundsResult RunBounds(const ExperimentConfig& config, const BoundsRequest& request, int jobs = 1);

// bound_report.json and comparison.csv (seed,lhs,rhs,satisfied).
void WriteBounds(const BoundsResult& result, const std::filesystem::path& dir);

nlohmann::json ToJson(const BiasCheckReport& report);

}  // namespace dpadamw

#endif  // DPADAMW_EXPERIMENT_HPP_
