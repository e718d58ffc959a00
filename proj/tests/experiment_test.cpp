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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpadamw/errors.hpp"
#include "dpadamw/experiment.hpp"

namespace dpadamw {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json BlobsConfig() {
  return json::parse(R"({
    "schema_version": 1,
    "name": "unit-blobs",
    "task": {"kind": "blobs", "n_train": 200, "n_test": 100, "dim": 2, "separation": 6},
    "model": {"kind": "logistic"},
    "optimizer": "dp-adamw",
    "hyperparams": {"eta": 0.05, "batch_size": 20, "epochs": 2, "weight_decay": 0.01},
    "privacy": {"epsilon": 3.0},
    "seeds": [0, 1, 2]
  })");
}

ErrorCode CodeOf(const json& j) {
  try {
    ConfigFromJson(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

std::string MessageOf(const json& j) {
  try {
    ConfigFromJson(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(Config, RoundTrip) {
  const ExperimentConfig c = ConfigFromJson(BlobsConfig());
  EXPECT_EQ(c.name, "unit-blobs");
  EXPECT_EQ(c.run.hp.clip.batch_size, 20u);
  EXPECT_EQ(c.run.epochs, 2);
  EXPECT_FALSE(c.run.privacy.sigma.has_value());
  EXPECT_EQ(ConfigFromJson(ToJson(c)), c);
  EXPECT_EQ(ToJson(ConfigFromJson(ToJson(c))), ToJson(c));
  EXPECT_TRUE(ToJson(c)["privacy"]["sigma"].is_null());
}

TEST(Config, UnknownKeyNamed) {
  json j = BlobsConfig();
  j["task"]["n_trian"] = 5;
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  EXPECT_NE(MessageOf(j).find("task.n_trian"), std::string::npos);
  j = BlobsConfig();
  j["colour"] = "red";
  EXPECT_NE(MessageOf(j).find("colour"), std::string::npos);
}

TEST(Config, SchemaVersion) {
  json j = BlobsConfig();
  j.erase("schema_version");
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j["schema_version"] = 2;
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
}

TEST(Config, BadValues) {
  json j = BlobsConfig();
  j["optimizer"] = "dp-lion";
  EXPECT_NE(MessageOf(j).find("dp-lion"), std::string::npos);
  j = BlobsConfig();
  j["hyperparams"]["eta"] = "fast";
  EXPECT_NE(MessageOf(j).find("eta"), std::string::npos);
  j = BlobsConfig();
  j["seeds"] = json::array();
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
  j = BlobsConfig();
  j["hyperparams"]["schedule"] = "cosine";
  EXPECT_EQ(CodeOf(j), ErrorCode::kConfig);
}

TEST(Config, LoadMissingFile) {
  try {
    LoadConfig("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kRuntime);
  }
}

TEST(Config, OutputDirResolution) {
  ExperimentConfig c;
  c.name = "abc";
  ::unsetenv("DPBENCH_OUT");
  EXPECT_EQ(ResolveOutputDir(c), fs::path("runs") / "abc");
  ::setenv("DPBENCH_OUT", "/tmp/outroot", 1);
  EXPECT_EQ(ResolveOutputDir(c), fs::path("/tmp/outroot") / "abc");
  c.output_dir = "/tmp/explicit";
  EXPECT_EQ(ResolveOutputDir(c), fs::path("/tmp/explicit"));
  ::unsetenv("DPBENCH_OUT");
}

TEST(Stats, MeanStdAndRounding) {
  const SummaryStat s = MeanStd({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(MeanStd({7.0}).std, 0.0);
  EXPECT_DOUBLE_EQ(Round2(95.4567), 95.46);
  EXPECT_DOUBLE_EQ(Round2(0.004), 0.0);
}

TEST(Parallel, RunsEveryIndexAndRethrows) {
  std::atomic<int> sum{0};
  ParallelFor(100, 4, [&](std::size_t i) { sum += static_cast<int>(i); });
  EXPECT_EQ(sum.load(), 4950);
  EXPECT_THROW(ParallelFor(10, 3,
                           [](std::size_t i) {
                             if (i == 7) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
}

TEST(Experiment, SummaryAndFiles) {
  const ExperimentConfig c = ConfigFromJson(BlobsConfig());
  const ExperimentResult r = RunExperiment(c, 2);
  ASSERT_EQ(r.runs.size(), 3u);
  const json s = Summary(c, r);
  EXPECT_EQ(s["optimizer"], "dp-adamw");
  EXPECT_EQ(s["total_steps"], 20);
  EXPECT_FALSE(s["non_private"].get<bool>());
  EXPECT_NEAR(s["epsilon"].get<double>(), 3.0, 3e-3);
  EXPECT_EQ(s["final_test_accuracy"]["per_seed"].size(), 3u);
  EXPECT_EQ(s["final_test_accuracy"]["unit"], "percent");

  const fs::path dir = fs::temp_directory_path() / "dpadamw_experiment_test";
  fs::remove_all(dir);
  WriteExperiment(c, r, dir);
  for (const char* f : {"config.json", "summary.json", "ledger.json", "seed_0.csv", "seed_2.csv",
                        "seed_1_epochs.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "ledger.json");
  const json ledger = json::parse(in);
  EXPECT_TRUE(ledger["postprocessing_certified"].get<bool>());
  for (const char* k : {"epsilon", "delta", "sigma", "q", "T", "mode"}) {
    EXPECT_TRUE(ledger.contains(k)) << k;
  }
  std::ifstream cfg_in(dir / "config.json");
  EXPECT_EQ(ConfigFromJson(json::parse(cfg_in)), c);
  fs::remove_all(dir);
}

TEST(Experiment, RerunIsIdentical) {
  const ExperimentConfig c = ConfigFromJson(BlobsConfig());
  const ExperimentResult a = RunExperiment(c, 3);
  const ExperimentResult b = RunExperiment(c, 1);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].final_theta, b.runs[i].final_theta);
    EXPECT_EQ(a.runs[i].loss, b.runs[i].loss);
  }
  EXPECT_EQ(Summary(c, a), Summary(c, b));
}

TEST(Experiment, NonPrivateLedger) {
  json j = BlobsConfig();
  j["optimizer"] = "adamw";
  const ExperimentConfig c = ConfigFromJson(j);
  const ExperimentResult r = RunExperiment(c);
  const json s = Summary(c, r);
  EXPECT_TRUE(s["epsilon"].is_null());
  EXPECT_TRUE(s["non_private"].get<bool>());
  const fs::path dir = fs::temp_directory_path() / "dpadamw_nonprivate_test";
  WriteExperiment(c, r, dir);
  std::ifstream in(dir / "ledger.json");
  const json ledger = json::parse(in);
  EXPECT_FALSE(ledger["postprocessing_certified"].get<bool>());
  EXPECT_TRUE(ledger.contains("certification_note"));
  fs::remove_all(dir);
}

json QuadraticJson() {
  return json::parse(R"({
    "schema_version": 1,
    "name": "unit-quad",
    "task": {"kind": "quadratic", "n_train": 128, "dim": 4, "noise_bound": 0.3,
             "init_distance": 0.05, "radius_factor": 10},
    "model": {"kind": "quadratic"},
    "optimizer": "dp-adamw",
    "hyperparams": {"eta": 0.01, "schedule": "thm2", "beta1": 0.0, "beta2": 0.99,
                    "weight_decay": 0.01, "clip_norm": 1.0, "batch_size": 32,
                    "total_steps": 100},
    "privacy": {"sigma": 1.0},
    "seeds": [0, 1, 2, 3]
  })");
}

TEST(Bounds, EndToEnd) {
  const ExperimentConfig c = ConfigFromJson(QuadraticJson());
  BoundsRequest req;
  const BoundsResult r = RunBounds(c, req, 2);
  EXPECT_TRUE(r.report.delta0_admissible);
  EXPECT_EQ(r.comparison.per_seed.size(), 4u);
  EXPECT_DOUBLE_EQ(r.constants.c1, 0.5 + 0.3);
  EXPECT_EQ(r.comparison.satisfied_fraction, 1.0);

  const fs::path dir = fs::temp_directory_path() / "dpadamw_bounds_test";
  WriteBounds(r, dir);
  std::ifstream in(dir / "comparison.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "seed,lhs,rhs,satisfied");
  EXPECT_TRUE(fs::exists(dir / "bound_report.json"));
  fs::remove_all(dir);
}

TEST(Bounds, Errors) {
  ExperimentConfig c = ConfigFromJson(QuadraticJson());
  BoundsRequest req;
  req.theorem = 3;
  try {
    RunBounds(c, req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWrongTheorem);
  }
  req = {};
  req.variant = BoundVariant::kAdamWBc;
  EXPECT_THROW(RunBounds(c, req), Error);
  req = {};
  req.delta0 = 0.01;
  try {
    RunBounds(c, req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInadmissibleDelta0);
  }
  req.force = true;
  EXPECT_TRUE(RunBounds(c, req).comparison.warning);
  c = ConfigFromJson(BlobsConfig());
  EXPECT_THROW(RunBounds(c, {}), Error);
}

TEST(BiasReport, Json) {
  BiasCheckConfig cfg;
  cfg.seeds = 20;
  cfg.steps = 700;
  const json j = ToJson(StationaryBiasCheck(cfg));
  EXPECT_EQ(j["coordinates"].size(), 4u);
  EXPECT_TRUE(j.contains("pooled_standard_error"));
}

}  // namespace
}  // namespace dpadamw
