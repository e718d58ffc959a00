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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "dpadamw/accountant.hpp"
#include "dpadamw/bounds.hpp"
#include "dpadamw/errors.hpp"
#include "dpadamw/experiment.hpp"
#include "dpadamw/harness.hpp"
#include "dpadamw/numerics.hpp"
#include "dpadamw/optimizers.hpp"
#include "dpadamw/privatizer.hpp"

namespace py = pybind11;
using namespace dpadamw;

namespace {

py::object ToPython(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json FromPython(const py::object& o) {
  if (py::isinstance<py::str>(o)) return nlohmann::json::parse(o.cast<std::string>());
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

GradMatrix ToGradMatrix(const std::vector<std::vector<double>>& rows) {
  return GradMatrix::FromRows(rows);
}

template <class T>
T Require(const std::optional<T>& v, const std::string& what) {
  if (!v) throw Error(ErrorCode::kConfig, "unknown " + what);
  return *v;
}

}  // namespace

PYBIND11_MODULE(_dpadamw, m) {
  m.doc() = "Differentially private AdamW: mechanism, optimizers, accountant and bounds";

  static py::exception<Error> error(m, "DpAdamWError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg =
          std::string(ErrorCodeName(e.code())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  // Privatizer.
  py::class_<PrivatizedGradient>(m, "PrivatizedGradient")
      .def_property_readonly("g_tilde", [](const PrivatizedGradient& g) { return g.g_tilde.values(); })
      .def_readonly("clip_fraction", &PrivatizedGradient::clip_fraction);

  m.def(
      "privatize",
      [](const std::vector<std::vector<double>>& grads, double clip_norm, double sigma,
         std::uint64_t seed, std::uint64_t stream) {
        ClipConfig cfg{clip_norm, grads.size(), sigma};
        RngStream rng(seed, stream);
        return Privatize(ToGradMatrix(grads), cfg, rng);
      },
      py::arg("grads"), py::arg("clip_norm"), py::arg("sigma"), py::arg("seed") = 0,
      py::arg("stream") = 0,
      "Clip each row to clip_norm, sum, add N(0, (sigma C)^2 I), divide by the row count.");
  m.def("phi", &Phi, py::arg("sigma"), py::arg("clip_norm"), py::arg("batch_size"));

  // Optimizers.
  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("eta", &HyperParams::eta)
      .def_property(
          "schedule", [](const HyperParams& h) { return std::string(ScheduleName(h.schedule)); },
          [](HyperParams& h, const std::string& s) { h.schedule = Require(ParseSchedule(s), "schedule '" + s + "'"); })
      .def_readwrite("beta1", &HyperParams::beta1)
      .def_readwrite("beta2", &HyperParams::beta2)
      .def_readwrite("weight_decay", &HyperParams::weight_decay)
      .def_readwrite("eps0", &HyperParams::eps0)
      .def_readwrite("gamma", &HyperParams::gamma)
      .def_property(
          "clip_norm", [](const HyperParams& h) { return h.clip.clip_norm; },
          [](HyperParams& h, double c) { h.clip.clip_norm = c; })
      .def_property(
          "batch_size", [](const HyperParams& h) { return h.clip.batch_size; },
          [](HyperParams& h, std::size_t b) { h.clip.batch_size = b; })
      .def_property(
          "sigma", [](const HyperParams& h) { return h.clip.noise_multiplier; },
          [](HyperParams& h, double s) { h.clip.noise_multiplier = s; })
      .def_readwrite("total_steps", &HyperParams::total_steps)
      .def("validate", &HyperParams::Validate);

  m.def("learning_rate_schedule", &LearningRateSchedule, py::arg("hp"));

  py::class_<OptimizerState>(m, "OptimizerState")
      .def(py::init([](const std::vector<double>& theta0) {
             return OptimizerState::Initial(ParamVector(theta0));
           }),
           py::arg("theta0"))
      .def_property_readonly("theta", [](const OptimizerState& s) { return s.theta.values(); })
      .def_property_readonly("m", [](const OptimizerState& s) { return s.m.values(); })
      .def_property_readonly("v", [](const OptimizerState& s) { return s.v.values(); })
      .def_readonly("t", &OptimizerState::t);

  m.def(
      "step",
      [](const std::string& name, const OptimizerState& state, const PrivatizedGradient& g,
         const HyperParams& hp, double phi) {
        const OptimizerInfo info = Require(FindOptimizer(name), "optimizer '" + name + "'");
        StepResult r;
        switch (info.kind) {
          case OptimizerKind::kDpSgd: r = StepDpSgd(state, g, hp); break;
          case OptimizerKind::kDpAdam: r = StepDpAdam(state, g, hp); break;
          case OptimizerKind::kDpAdamBc: r = StepDpAdamBc(state, g, hp, phi); break;
          case OptimizerKind::kDpAdamW: r = StepDpAdamW(state, g, hp); break;
          case OptimizerKind::kDpAdamWBc: r = StepDpAdamWBc(state, g, hp, phi); break;
          default:
            throw Error(ErrorCode::kCertificationRefused,
                        "'" + name + "' consumes raw gradients; use a dp-* optimizer");
        }
        py::dict diag;
        diag["clamp_fraction"] = r.diagnostics.clamp_fraction;
        diag["update_norm"] = r.diagnostics.update_norm;
        diag["m_hat"] = r.diagnostics.m_hat.values();
        diag["v_hat"] = r.diagnostics.v_hat.values();
        return py::make_tuple(r.state, diag);
      },
      py::arg("optimizer"), py::arg("state"), py::arg("g"), py::arg("hp"), py::arg("phi") = 0.0,
      "One step of a private optimizer. Only privatized gradients are accepted.");

  m.def("optimizers", [] {
    std::vector<std::string> names;
    for (const OptimizerInfo& i : OptimizerRegistry()) names.emplace_back(i.name);
    return names;
  });

  // Accountant.
  m.def("calibrate_sigma_closed_form", &CalibrateSigmaClosedForm, py::arg("epsilon"),
        py::arg("delta"), py::arg("q"), py::arg("steps"), py::arg("c2") = 1.0);
  m.def(
      "calibrate_sigma_rdp",
      [](double eps, double delta, double q, std::int64_t steps) {
        return CalibrateSigmaRdp(eps, delta, q, steps);
      },
      py::arg("epsilon"), py::arg("delta"), py::arg("q"), py::arg("steps"));
  m.def(
      "epsilon_rdp",
      [](double sigma, double q, std::int64_t steps, double delta) {
        const DpConversion c = EpsilonRdp(sigma, q, steps, delta);
        return py::make_tuple(c.epsilon, c.order);
      },
      py::arg("sigma"), py::arg("q"), py::arg("steps"), py::arg("delta"),
      "Returns (epsilon, argmin order). epsilon is inf for sigma = 0.");
  m.def("rdp_subsampled_gaussian", &RdpSubsampledGaussian, py::arg("sigma"), py::arg("q"),
        py::arg("order"));

  // Bounds.
  m.def(
      "bound_rhs",
      [](int theorem, const HyperParams& hp, double delta0, const std::string& variant,
         double c1, double lipschitz, double f_gap, std::size_t d, double alpha,
         double theta0_norm, bool force) {
        AssumptionConstants c;
        c.c1 = c1;
        c.lipschitz = lipschitz;
        c.f_star = 0.0;
        c.f_theta0 = f_gap;
        c.d = d;
        c.alpha = alpha;
        c.theta0_norm = theta0_norm;
        const BoundVariant v = Require(ParseBoundVariant(variant), "variant '" + variant + "'");
        if (theorem != 2 && theorem != 3) throw Error(ErrorCode::kConfig, "theorem must be 2 or 3");
        const BoundReport r = theorem == 2 ? BoundRhsTheorem2(c, hp, delta0, v, force)
                                           : BoundRhsTheorem3(c, hp, delta0, v, force);
        return ToPython(ToJson(r));
      },
      py::arg("theorem"), py::arg("hp"), py::arg("delta0"), py::arg("variant") = "adamw",
      py::arg("c1") = 1.0, py::arg("lipschitz") = 1.0, py::arg("f_gap") = 1.0, py::arg("d") = 1,
      py::arg("alpha") = 0.05, py::arg("theta0_norm") = 0.0, py::arg("force") = false,
      "Evaluate a convergence bound; f_gap is F(theta0) - F*.");
  m.def(
      "minimal_delta0",
      [](double alpha, std::int64_t steps, double beta2, double phi, double clip_norm) {
        return MinimalAdmissibleDelta0(alpha, steps,
                                       ComputeConcentration(beta2, steps, phi, clip_norm));
      },
      py::arg("alpha"), py::arg("steps"), py::arg("beta2"), py::arg("phi"), py::arg("clip_norm"));

  // Harness and experiments.
  m.def(
      "gen_blobs",
      [](std::size_t n, std::size_t p, double separation, std::uint64_t seed) {
        const Dataset ds = GenBlobs(n, p, separation, seed);
        std::vector<std::vector<double>> x(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) {
          const auto r = ds.row(i);
          x[i].assign(r.begin(), r.end());
        }
        return py::make_tuple(x, ds.labels);
      },
      py::arg("n"), py::arg("p"), py::arg("separation"), py::arg("seed") = 0);

  m.def(
      "normalize_config",
      [](const py::object& cfg) { return ToPython(ToJson(ConfigFromJson(FromPython(cfg)))); },
      py::arg("config"), "Validate a config and return it with every default filled in.");
  m.def(
      "run_experiment",
      [](const py::object& cfg, int jobs) {
        const ExperimentConfig c = ConfigFromJson(FromPython(cfg));
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = RunExperiment(c, jobs);
        }
        py::dict out;
        out["summary"] = ToPython(Summary(c, r));
        py::list runs;
        for (const RunMetrics& rm : r.runs) {
          py::dict d;
          d["seed"] = rm.seed;
          d["loss"] = rm.loss;
          d["clip_fraction"] = rm.clip_fraction;
          d["clamp_fraction"] = rm.clamp_fraction;
          d["update_norm"] = rm.update_norm;
          d["final_theta"] = rm.final_theta.values();
          runs.append(d);
        }
        out["runs"] = runs;
        return out;
      },
      py::arg("config"), py::arg("jobs") = 1);
  m.def(
      "stationary_bias_check",
      [](double sigma, double clip_norm, std::size_t batch_size, double beta2, std::int64_t steps,
         std::size_t seeds) {
        BiasCheckConfig c;
        c.sigma = sigma;
        c.clip_norm = clip_norm;
        c.batch_size = batch_size;
        c.beta2 = beta2;
        c.steps = steps;
        c.seeds = seeds;
        return ToPython(ToJson(StationaryBiasCheck(c)));
      },
      py::arg("sigma") = 1.0, py::arg("clip_norm") = 1.0, py::arg("batch_size") = 4,
      py::arg("beta2") = 0.99, py::arg("steps") = 1000, py::arg("seeds") = 1000);
}
