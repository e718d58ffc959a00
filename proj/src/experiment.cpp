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

#include "dpadamw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dpadamw/errors.hpp"

namespace dpadamw {
namespace {

using nlohmann::json;

void CheckKeys(const json& obj, const std::string& section,
               std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kConfig, "'" + section + "' must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      const std::string where = section.empty() ? key : section + "." + key;
      throw Error(ErrorCode::kConfig, "unknown key '" + where + "'");
    }
  }
}

template <class T>
void Get(const json& obj, const std::string& section, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig,
                "key '" + section + "." + key + "' has the wrong type: " + it->dump());
  }
}

template <class T>
void GetOptional(const json& obj, const std::string& section, const char* key,
                 std::optional<T>& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T value{};
  Get(obj, section, key, value);
  out = value;
}

template <class Enum, class Parse>
void GetEnum(const json& obj, const std::string& section, const char* key, Enum& out,
             Parse parse) {
  std::string name;
  if (obj.find(key) == obj.end()) return;
  Get(obj, section, key, name);
  const auto parsed = parse(name);
  if (!parsed) {
    throw Error(ErrorCode::kConfig,
                "unknown value '" + name + "' for key '" + section + "." + key + "'");
  }
  out = *parsed;
}

template <class T>
json OptionalJson(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

void MakeDirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
}

MechanismParams MechanismOf(const PreparedRun& run) {
  MechanismParams m;
  m.sigma = run.hp.clip.noise_multiplier;
  m.clip_norm = run.hp.clip.clip_norm;
  m.batch_size = run.hp.clip.batch_size;
  m.sampling_rate = run.sampling_rate;
  m.total_steps = run.hp.total_steps;
  m.delta = run.config.privacy.delta;
  m.mode = run.config.privacy.mode;
  m.c2 = run.config.privacy.c2;
  return m;
}

}  // namespace

ExperimentConfig ConfigFromJson(const json& j) {
  CheckKeys(j, "", {"schema_version", "name", "task", "model", "optimizer", "hyperparams",
                    "privacy", "seeds", "output_dir"});
  if (!j.contains("schema_version")) throw Error(ErrorCode::kConfig, "missing 'schema_version'");
  int version = 0;
  Get(j, "", "schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw Error(ErrorCode::kConfig, "unsupported schema_version " + std::to_string(version));
  }

  ExperimentConfig c;
  Get(j, "", "name", c.name);
  Get(j, "", "output_dir", c.output_dir);

  if (const auto it = j.find("task"); it != j.end()) {
    const json& t = *it;
    CheckKeys(t, "task", {"kind", "n_train", "n_test", "dim", "separation", "noise_bound",
                          "init_distance", "radius_factor", "data_seed"});
    TaskConfig& task = c.run.task;
    GetEnum(t, "task", "kind", task.kind, ParseTaskKind);
    Get(t, "task", "n_train", task.n_train);
    Get(t, "task", "n_test", task.n_test);
    Get(t, "task", "dim", task.dim);
    Get(t, "task", "separation", task.separation);
    Get(t, "task", "noise_bound", task.noise_bound);
    Get(t, "task", "init_distance", task.init_distance);
    Get(t, "task", "radius_factor", task.radius_factor);
    Get(t, "task", "data_seed", task.data_seed);
  }

  if (const auto it = j.find("model"); it != j.end()) {
    CheckKeys(*it, "model", {"kind", "hidden"});
    GetEnum(*it, "model", "kind", c.run.model, ParseModelKind);
    Get(*it, "model", "hidden", c.run.hidden);
  }

  if (const auto it = j.find("optimizer"); it != j.end()) {
    std::string name;
    Get(j, "", "optimizer", name);
    const auto info = FindOptimizer(name);
    if (!info) throw Error(ErrorCode::kConfig, "unknown optimizer '" + name + "' (key 'optimizer')");
    c.run.optimizer = info->kind;
  }

  if (const auto it = j.find("hyperparams"); it != j.end()) {
    const json& h = *it;
    CheckKeys(h, "hyperparams", {"eta", "schedule", "beta1", "beta2", "weight_decay", "eps0",
                                 "gamma", "clip_norm", "batch_size", "total_steps", "epochs"});
    HyperParams& hp = c.run.hp;
    Get(h, "hyperparams", "eta", hp.eta);
    GetEnum(h, "hyperparams", "schedule", hp.schedule, ParseSchedule);
    Get(h, "hyperparams", "beta1", hp.beta1);
    Get(h, "hyperparams", "beta2", hp.beta2);
    Get(h, "hyperparams", "weight_decay", hp.weight_decay);
    Get(h, "hyperparams", "eps0", hp.eps0);
    Get(h, "hyperparams", "gamma", hp.gamma);
    Get(h, "hyperparams", "clip_norm", hp.clip.clip_norm);
    Get(h, "hyperparams", "batch_size", hp.clip.batch_size);
    Get(h, "hyperparams", "total_steps", hp.total_steps);
    GetOptional(h, "hyperparams", "epochs", c.run.epochs);
  }

  if (const auto it = j.find("privacy"); it != j.end()) {
    const json& p = *it;
    CheckKeys(p, "privacy", {"epsilon", "delta", "mode", "sigma", "c2"});
    PrivacyConfig& pc = c.run.privacy;
    Get(p, "privacy", "epsilon", pc.epsilon);
    Get(p, "privacy", "delta", pc.delta);
    GetEnum(p, "privacy", "mode", pc.mode, ParseAccountantMode);
    GetOptional(p, "privacy", "sigma", pc.sigma);
    Get(p, "privacy", "c2", pc.c2);
  }

  if (j.contains("seeds")) {
    Get(j, "", "seeds", c.seeds);
    if (c.seeds.empty()) throw Error(ErrorCode::kConfig, "'seeds' must not be empty");
  }
  return c;
}

json ToJson(const ExperimentConfig& c) {
  const RunConfig& r = c.run;
  const HyperParams& hp = r.hp;
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"name", c.name},
      {"task",
       {{"kind", TaskKindName(r.task.kind)},
        {"n_train", r.task.n_train},
        {"n_test", r.task.n_test},
        {"dim", r.task.dim},
        {"separation", r.task.separation},
        {"noise_bound", r.task.noise_bound},
        {"init_distance", r.task.init_distance},
        {"radius_factor", r.task.radius_factor},
        {"data_seed", r.task.data_seed}}},
      {"model", {{"kind", ModelKindName(r.model)}, {"hidden", r.hidden}}},
      {"optimizer", InfoOf(r.optimizer).name},
      {"hyperparams",
       {{"eta", hp.eta},
        {"schedule", ScheduleName(hp.schedule)},
        {"beta1", hp.beta1},
        {"beta2", hp.beta2},
        {"weight_decay", hp.weight_decay},
        {"eps0", hp.eps0},
        {"gamma", hp.gamma},
        {"clip_norm", hp.clip.clip_norm},
        {"batch_size", hp.clip.batch_size},
        {"total_steps", hp.total_steps},
        {"epochs", OptionalJson(r.epochs)}}},
      {"privacy",
       {{"epsilon", r.privacy.epsilon},
        {"delta", r.privacy.delta},
        {"mode", AccountantModeName(r.privacy.mode)},
        {"sigma", OptionalJson(r.privacy.sigma)},
        {"c2", r.privacy.c2}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
  };
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return ConfigFromJson(j);
}

std::filesystem::path ResolveOutputDir(const ExperimentConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv("DPBENCH_OUT");
  const std::filesystem::path base = (root != nullptr && *root != '\0') ? root : "runs";
  return base / config.name;
}

void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

ExperimentResult RunExperiment(const ExperimentConfig& config, int jobs) {
  ExperimentResult result;
  result.prepared = Prepare(config.run);
  result.runs.resize(config.seeds.size());
  const PreparedRun& prepared = result.prepared;
  ParallelFor(config.seeds.size(), jobs, [&](std::size_t i) {
    result.runs[i] = RunTraining(prepared, config.seeds[i]);
  });
  return result;
}

SummaryStat MeanStd(const std::vector<double>& values) {
  SummaryStat s;
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

double Round2(double x) { return std::round(x * 100.0) / 100.0; }

json Summary(const ExperimentConfig& config, const ExperimentResult& result) {
  const PreparedRun& p = result.prepared;
  json s{
      {"schema_version", kOutputSchemaVersion},
      {"name", config.name},
      {"optimizer", InfoOf(config.run.optimizer).name},
      {"seeds", config.seeds},
      {"total_steps", p.hp.total_steps},
      {"sigma", p.hp.clip.noise_multiplier},
      {"phi", p.phi},
  };
  if (!result.runs.empty()) {
    const PrivacySpec& spec = result.runs.front().privacy;
    s["epsilon"] = spec.non_private ? json(nullptr) : json(spec.epsilon);
    s["non_private"] = spec.non_private;
  }

  std::vector<double> acc;
  std::vector<double> obj;
  std::vector<double> loss;
  for (const RunMetrics& m : result.runs) {
    if (m.final_test_accuracy) acc.push_back(100.0 * *m.final_test_accuracy);
    if (m.final_objective) obj.push_back(*m.final_objective);
    if (!m.loss.empty()) loss.push_back(m.loss.back());
  }
  if (!acc.empty()) {
    const SummaryStat st = MeanStd(acc);
    s["final_test_accuracy"] = {{"mean", Round2(st.mean)},
                                {"std", Round2(st.std)},
                                {"unit", "percent"},
                                {"per_seed", acc}};
  }
  if (!obj.empty()) {
    const SummaryStat st = MeanStd(obj);
    s["final_objective"] = {{"mean", st.mean}, {"std", st.std}, {"per_seed", obj}};
  }
  if (!loss.empty()) {
    const SummaryStat st = MeanStd(loss);
    s["final_train_loss"] = {{"mean", st.mean}, {"std", st.std}};
  }
  return s;
}

void WriteExperiment(const ExperimentConfig& config, const ExperimentResult& result,
                     const std::filesystem::path& dir) {
  MakeDirs(dir);
  WriteText(dir / "config.json", ToJson(config).dump(2) + "\n");
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const RunMetrics& m = result.runs[i];
    const std::string stem = "seed_" + std::to_string(config.seeds[i]);
    std::ostringstream csv;
    WriteMetricsCsv(m, csv);
    WriteText(dir / (stem + ".csv"), csv.str());

    std::ostringstream epochs;
    epochs << "epoch,test_accuracy,clamp_fraction\n";
    for (std::size_t e = 0; e < m.epoch_clamp_fraction.size(); ++e) {
      epochs << (e + 1) << ',';
      if (e < m.epoch_test_accuracy.size()) epochs << json(m.epoch_test_accuracy[e]).dump();
      epochs << ',' << json(m.epoch_clamp_fraction[e]).dump() << '\n';
    }
    WriteText(dir / (stem + "_epochs.csv"), epochs.str());
  }
  WriteText(dir / "summary.json", Summary(config, result).dump(2) + "\n");

  json ledger = result.runs.empty() ? json::object() : LedgerRecord(result.runs.front().privacy);
  ledger["schema_version"] = kOutputSchemaVersion;
  ledger["optimizer"] = InfoOf(config.run.optimizer).name;
  ledger["clip_norm"] = result.prepared.hp.clip.clip_norm;
  ledger["batch_size"] = result.prepared.hp.clip.batch_size;
  try {
    CertifyPostprocessing(InfoOf(config.run.optimizer).name, MechanismOf(result.prepared));
    ledger["postprocessing_certified"] = true;
  } catch (const Error& e) {
    ledger["postprocessing_certified"] = false;
    ledger["certification_note"] = e.what();
  }
  WriteText(dir / "ledger.json", ledger.dump(2) + "\n");
}

AssumptionConstants QuadraticConstants(const PreparedRun& run, double alpha) {
  if (run.model.kind != ModelKind::kQuadratic) {
    throw Error(ErrorCode::kConfig, "bounds require task.kind = quadratic");
  }
  AssumptionConstants c;
  c.c1 = run.model.radius + run.model.noise_bound;
  c.lipschitz = 1.0;
  c.f_star = 0.0;
  c.f_theta0 = QuadraticObjective(run.model, run.theta0);
  c.d = run.model.input_dim;
  c.alpha = alpha;
  c.theta0_norm = L2Norm(run.theta0);
  return c;
}

BoundsResult RunBounds(const ExperimentConfig& config, const BoundsRequest& request, int jobs) {
  if (config.run.task.kind != TaskKind::kQuadratic) {
    throw Error(ErrorCode::kConfig, "bounds require task.kind = quadratic");
  }
  const OptimizerKind opt = config.run.optimizer;
  const bool bc_opt = opt == OptimizerKind::kDpAdamWBc || opt == OptimizerKind::kDpAdamBc;
  const bool plain_opt = opt == OptimizerKind::kDpAdamW || opt == OptimizerKind::kDpAdam;
  if (request.variant == BoundVariant::kAdamW && !plain_opt) {
    throw Error(ErrorCode::kConfig, "variant adamw requires optimizer dp-adamw or dp-adam");
  }
  if (request.variant == BoundVariant::kAdamWBc && !bc_opt) {
    throw Error(ErrorCode::kConfig, "variant adamw_bc requires optimizer dp-adamw-bc or dp-adambc");
  }
  if (request.theorem != 2 && request.theorem != 3) {
    throw Error(ErrorCode::kConfig, "theorem must be 2 or 3");
  }

  BoundsResult out;
  const PreparedRun prepared = Prepare(config.run);
  const HyperParams& hp = prepared.hp;
  out.constants = QuadraticConstants(prepared, request.alpha);

  double delta0 = 0.0;
  if (request.delta0) {
    delta0 = *request.delta0;
  } else {
    const ConcentrationConstants cc =
        ComputeConcentration(hp.beta2, hp.total_steps, prepared.phi, hp.clip.clip_norm);
    delta0 = MinimalAdmissibleDelta0(request.alpha, hp.total_steps, cc);
  }
  out.report = request.theorem == 2
                   ? BoundRhsTheorem2(out.constants, hp, delta0, request.variant, request.force)
                   : BoundRhsTheorem3(out.constants, hp, delta0, request.variant, request.force);

  std::vector<std::vector<double>> norms(config.seeds.size());
  ParallelFor(config.seeds.size(), jobs, [&](std::size_t i) {
    norms[i] = RunTraining(prepared, config.seeds[i]).grad_norm_f;
  });
  RngStream tau_rng(config.seeds.front(), 0x7A0);
  out.comparison = EmpiricalBoundCheck(norms, config.seeds, out.report, hp.beta1, tau_rng,
                                       request.tau_draws);
  return out;
}

void WriteBounds(const BoundsResult& result, const std::filesystem::path& dir) {
  MakeDirs(dir);
  json j = ToJson(result.report);
  const AssumptionConstants& c = result.constants;
  j["constants"] = {{"C1", c.c1},         {"L", c.lipschitz}, {"F_star", c.f_star},
                    {"F_theta0", c.f_theta0}, {"d", c.d},     {"alpha", c.alpha},
                    {"theta0_norm", c.theta0_norm}};
  j["comparison"] = {{"mean_lhs", result.comparison.mean_lhs},
                     {"satisfied_fraction", result.comparison.satisfied_fraction},
                     {"warning", result.comparison.warning}};
  WriteText(dir / "bound_report.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "seed,lhs,rhs,satisfied\n";
  for (const SeedComparison& s : result.comparison.per_seed) {
    csv << s.seed << ',' << json(s.lhs).dump() << ',' << json(s.rhs).dump() << ','
        << (s.satisfied ? 1 : 0) << '\n';
  }
  WriteText(dir / "comparison.csv", csv.str());
}

json ToJson(const BiasCheckReport& r) {
  json coords = json::array();
  for (const BiasCoordinate& c : r.coordinates) {
    coords.push_back({{"g2", c.second_moment},
                      {"mean_v_hat", c.mean_v_hat},
                      {"bias", c.bias},
                      {"corrected_error", c.corrected_error},
                      {"standard_error", c.standard_error}});
  }
  return {{"schema_version", kOutputSchemaVersion},
          {"phi", r.phi},
          {"pooled_bias", r.pooled_bias},
          {"pooled_standard_error", r.pooled_standard_error},
          {"bias_matches_phi", r.bias_matches_phi},
          {"corrected_recovers_g2", r.corrected_recovers_g2},
          {"coordinates", coords}};
}

}  // namespace dpadamw
