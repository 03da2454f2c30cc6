// Copyright 2026 The underflow Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <memory>

#include "underflow/bounds.hpp"
#include "underflow/cli.hpp"
#include "underflow/horizon.hpp"
#include "underflow/sim.hpp"
#include "underflow/spec_io.hpp"
#include "underflow/threshold.hpp"
#include "underflow/two_rx.hpp"

namespace py = pybind11;
using namespace underflow;

namespace {

GridOptions grid_options(double step, double x_max, unsigned workers) {
  GridOptions g;
  g.step = step;
  g.x_max = x_max;
  g.workers = workers;
  return g;
}

double ext(const ExtReal& v) {
  return v.is_inf() ? std::numeric_limits<double>::infinity() : v.value();
}

py::array_t<double> values_1d(const ValueGrid1D& vg) {
  const auto N = static_cast<py::ssize_t>(vg.horizon + 1);
  const auto S = static_cast<py::ssize_t>(vg.states());
  const auto I = static_cast<py::ssize_t>(vg.nodes());
  py::array_t<double> out({N, S, I});
  std::copy(vg.V.begin(), vg.V.end(), out.mutable_data());
  return out;
}

py::array_t<double> nodes(const Grid1D& g) {
  py::array_t<double> out(static_cast<py::ssize_t>(g.count));
  for (std::size_t i = 0; i < g.count; ++i) out.mutable_data()[i] = g.x(i);
  return out;
}

py::dict stats_dict(const CostStats& st) {
  py::dict d;
  d["episodes"] = st.episodes;
  d["aborted"] = st.aborted;
  d["mean"] = st.mean;
  d["stderr"] = st.std_error;
  d["min"] = st.min;
  d["max"] = st.max;
  d["average_per_slot"] = st.average;
  return d;
}

/// A solved two-receiver grid with its region policy.
struct TwoRx {
  std::shared_ptr<const ValueGrid2D> grid;
  RegionPolicy policy;

  std::size_t joint(std::size_t s1, std::size_t s2) const { return grid->model.joint(s1, s2); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Transmission scheduling solvers";
  py::register_exception<Error>(m, "UnderflowError", PyExc_RuntimeError);

  py::class_<ValidatedSpec>(m, "Spec")
      .def_static("load", [](const std::string& path) { return validate(load_spec(path)); })
      .def_static("parse", [](const std::string& text) { return validate(parse_spec(text)); })
      .def_property_readonly("receivers", &ValidatedSpec::receiver_count)
      .def_property_readonly("alpha", &ValidatedSpec::alpha)
      .def_property_readonly("peak_power", &ValidatedSpec::peak_power)
      .def_property_readonly("horizon",
                             [](const ValidatedSpec& s) { return s.spec().horizon; })
      .def_property_readonly("hash", [](const ValidatedSpec& s) { return spec_hash(s.spec()); })
      .def("to_json", [](const ValidatedSpec& s) { return dump_spec(s.spec()); })
      .def("single", &ValidatedSpec::single, py::arg("m"));

  py::class_<ValueGrid1D>(m, "ValueGrid1D")
      .def_readonly("horizon", &ValueGrid1D::horizon)
      .def_property_readonly("states", &ValueGrid1D::states)
      .def_property_readonly("x", [](const ValueGrid1D& vg) { return nodes(vg.model.grid); })
      .def_property_readonly("values", &values_1d)
      .def("value_at", &ValueGrid1D::value_at, py::arg("n"), py::arg("s"), py::arg("x"))
      .def("decide",
           [](const ValueGrid1D& vg, int n, std::size_t s, double x) {
             const auto d = vg.decide(n, s, x);
             return py::make_tuple(d.y, d.z);
           },
           py::arg("n"), py::arg("s"), py::arg("x"))
      .def("criticals", [](const ValueGrid1D& vg) { return criticals_from_values(vg).b; });

  m.def("solve_1rx",
        [](const ValidatedSpec& spec, double step, double x_max, unsigned workers) {
          py::gil_scoped_release release;
          return solve_1rx(spec, grid_options(step, x_max, workers));
        },
        py::arg("spec"), py::arg("step") = 0.0, py::arg("x_max") = 0.0, py::arg("workers") = 1);

  m.def("thresholds",
        [](const ValidatedSpec& spec) {
          const auto table = compute_gamma(spec);
          std::vector<std::vector<double>> gamma;
          for (const auto& row : table.rows) {
            gamma.emplace_back();
            for (const auto& v : row) gamma.back().push_back(ext(v));
          }
          py::dict d;
          d["gamma"] = gamma;
          d["criticals"] = criticals_from_gamma(table, spec).b;
          return d;
        },
        py::arg("spec"));

  py::class_<TwoRx>(m, "TwoRx")
      .def_property_readonly("horizon", [](const TwoRx& t) { return t.grid->horizon; })
      .def("value_at",
           [](const TwoRx& t, int n, std::size_t s1, std::size_t s2, double x1, double x2) {
             return t.grid->value_at(n, t.joint(s1, s2), x1, x2);
           })
      .def("target",
           [](const TwoRx& t, int n, std::size_t s1, std::size_t s2) {
             return t.policy.target(n, t.joint(s1, s2));
           })
      .def("decide", [](const TwoRx& t, int n, std::size_t s1, std::size_t s2, double x1,
                        double x2) {
        const auto d = t.policy.decide(n, t.joint(s1, s2), x1, x2);
        return py::make_tuple(std::string(to_string(d.region)), d.y[0], d.y[1]);
      });

  m.def("two_rx",
        [](const ValidatedSpec& spec, double step, unsigned workers) {
          py::gil_scoped_release release;
          auto vg = std::make_shared<const ValueGrid2D>(
              solve_2rx(spec, grid_options(step, 0.0, workers)));
          return TwoRx{vg, RegionPolicy(vg)};
        },
        py::arg("spec"), py::arg("step") = 0.0, py::arg("workers") = 1);

  m.def("value_iterate",
        [](const ValidatedSpec& spec, double step, double x_max, double tol) {
          ViOptions opt;
          opt.grid = grid_options(step, x_max, 1);
          opt.tol = tol;
          opt.keep_trace = false;
          InfiniteSolution1D sol;
          {
            py::gil_scoped_release release;
            sol = value_iterate(spec, opt);
          }
          py::dict d;
          d["x"] = nodes(sol.grid.model.grid);
          std::vector<std::vector<double>> v(sol.grid.states());
          for (std::size_t s = 0; s < v.size(); ++s)
            for (std::size_t i = 0; i < sol.grid.nodes(); ++i) v[s].push_back(sol.value(s, i));
          d["values"] = v;
          d["b_inf"] = sol.b_inf;
          d["iterations"] = sol.status.iterations;
          d["residual"] = sol.status.residual;
          d["converged"] = sol.status.converged;
          return d;
        },
        py::arg("spec"), py::arg("step") = 0.0, py::arg("x_max") = 0.0, py::arg("tol") = 1e-10);

  m.def("estimate_rho",
        [](const ValidatedSpec& spec, std::vector<double> alphas, std::size_t sim_slots,
           std::uint64_t seed) {
          RhoOptions opt;
          opt.alphas = std::move(alphas);
          opt.sim_slots = sim_slots;
          opt.seed = seed;
          opt.vi.keep_trace = false;
          AverageCostEstimate est;
          {
            py::gil_scoped_release release;
            est = estimate_rho(spec, opt);
          }
          py::dict d;
          d["alphas"] = est.alphas;
          d["rho_points"] = est.rho_points;
          d["rho_star"] = est.rho_star;
          d["slope"] = est.slope;
          d["simulated_average"] = est.simulated_average;
          return d;
        },
        py::arg("spec"), py::arg("alphas") = std::vector<double>{0.9, 0.95, 0.99, 0.995},
        py::arg("sim_slots") = 0, py::arg("seed") = 1);

  m.def("bounds",
        [](const ValidatedSpec& spec, double step) {
          BoundOptions opt;
          opt.grid.step = step;
          BoundReport sep, lag;
          {
            py::gil_scoped_release release;
            sep = separable_bound(spec, opt);
            lag = lagrangian_bound(spec, opt);
          }
          py::dict d;
          d["separable"] = sep.value;
          d["lagrangian"] = lag.value;
          d["lambda"] = lag.lambda;
          return d;
        },
        py::arg("spec"), py::arg("step") = 0.0);

  m.def("simulate",
        [](const ValidatedSpec& spec, const std::string& policy, std::size_t episodes,
           std::uint64_t seed, double step) {
          std::unique_ptr<Policy> p;
          const auto g = grid_options(step, 0.0, 1);
          if (policy == "just-in-time") {
            p = std::make_unique<JustInTimePolicy>(spec);
          } else if (policy == "opportunistic-greedy") {
            p = std::make_unique<OpportunisticGreedyPolicy>(spec);
          } else if (policy == "threshold") {
            p = std::make_unique<BaseStockSimPolicy>(BaseStockPolicy::from_spec(spec));
          } else if (policy == "dp" && spec.receiver_count() == 1) {
            p = std::make_unique<GridPolicy1D>(
                std::make_shared<const ValueGrid1D>(solve_1rx(spec, g)));
          } else if (policy == "dp") {
            p = std::make_unique<GridPolicy2D>(
                std::make_shared<const ValueGrid2D>(solve_2rx(spec, g)));
          } else if (policy == "greedy-feasible") {
            BoundOptions bo;
            bo.grid = g;
            p = std::make_unique<GreedyFeasiblePolicy>(
                greedy_feasible(spec, lagrangian_bound(spec, bo)));
          } else {
            throw Error(ErrorCode::ConfigError, "unknown policy " + policy);
          }
          SimOptions opt;
          opt.episodes = episodes;
          opt.seed = seed;
          SimResult res;
          {
            py::gil_scoped_release release;
            res = simulate(*p, spec, opt);
          }
          return stats_dict(res.stats);
        },
        py::arg("spec"), py::arg("policy") = "dp", py::arg("episodes") = 1000,
        py::arg("seed") = 1, py::arg("step") = 0.0);

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "underflow");
          std::vector<char*> argv;
          for (auto& a : args) argv.push_back(a.data());
          return cli::main(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"));
}
