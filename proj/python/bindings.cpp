#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "cemporo/cli.hpp"
#include "cemporo/experiment.hpp"
#include "cemporo/parallel.hpp"

namespace py = pybind11;
using namespace cem;

namespace {

ExperimentConfig config_from(const py::object& obj) {
  if (py::isinstance<py::str>(obj)) {
    const std::string s = obj.cast<std::string>();
    if (!s.empty() && s.front() == '{') return config_from_json(nlohmann::json::parse(s));
    return preset(s);
  }
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return config_from_json(nlohmann::json::parse(text));
}

py::dict row_dict(const HistoryRow& r) {
  py::dict d;
  d["n"] = r.n;
  d["k"] = r.k;
  d["dof_u"] = r.dof_u;
  d["dof_p"] = r.dof_p;
  d["e_u"] = r.e_u;
  d["e_p"] = r.e_p;
  d["eta"] = r.eta;
  d["strategy"] = r.strategy;
  d["theta"] = r.theta;
  d["gamma"] = r.gamma;
  d["ell"] = r.ell;
  return d;
}

py::list history_list(const EnrichmentHistory& h) {
  py::list out;
  for (const HistoryRow& r : h.rows) out.append(row_dict(r));
  return out;
}

} // namespace

PYBIND11_MODULE(cemporo, m) {
  m.doc() = "CEM-GMsFEM multiscale solver with online enrichment for heterogeneous poroelasticity";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("set_threads", &parallel::set_threads, py::arg("n"));

  m.def(
      "lame_from_E",
      [](double E, double nu_p) {
        const LameParameters l = lame_from_E(E, nu_p);
        return py::make_tuple(l.lambda, l.mu);
      },
      py::arg("E"), py::arg("nu_p"), "(lambda, mu) from Young's modulus and Poisson ratio");

  m.def("select_regions", &select_regions, py::arg("eta"), py::arg("theta"),
        "Indices of the smallest leading set holding all but theta of sum eta^2");

  m.def("preset_config", [](const std::string& name) { return config_to_json(preset(name)).dump(); },
        py::arg("name"), "JSON text of a built-in configuration");

  m.def(
      "synth_field",
      [](int ncx, int ncy, int refinement, double contrast, std::uint64_t seed) {
        const GridPair g(ncx, ncy, refinement);
        ChannelSpec spec;
        spec.contrast = contrast;
        spec.seed = seed;
        const MaterialField f = synth_channels(g, spec, {});
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> E(
            f.E().data(), f.ny(), f.nx());
        return Matrix(E);
      },
      py::arg("ncx"), py::arg("ncy"), py::arg("refinement"), py::arg("contrast") = 1e4,
      py::arg("seed") = 1, "Synthetic coefficient field as a (rows = y, cols = x) array");

  m.def(
      "assemble",
      [](int ncx, int ncy, int refinement, double E) {
        const GridPair g(ncx, ncy, refinement);
        const MaterialField f = homogeneous_field(g, E, {});
        const OperatorSet ops = assemble_operators(g, f, PartitionOfUnity(g));
        py::dict d;
        d["A"] = ops.A;
        d["B"] = ops.B;
        d["C"] = ops.C;
        d["D"] = ops.D;
        return d;
      },
      py::arg("ncx"), py::arg("ncy"), py::arg("refinement"), py::arg("E") = 1.0,
      "Fine operators of a homogeneous field as scipy sparse matrices");

  m.def(
      "local_eigenvalues",
      [](int ncx, int ncy, int refinement, double contrast, std::uint64_t seed, int element) {
        const GridPair g(ncx, ncy, refinement);
        ChannelSpec spec;
        spec.contrast = contrast;
        spec.seed = seed;
        const MaterialField f = synth_channels(g, spec, {});
        const ElementAux a = solve_local_spectral(g, f, element, 1, 1);
        return py::make_tuple(a.disp_values, a.pres_values);
      },
      py::arg("ncx"), py::arg("ncy"), py::arg("refinement"), py::arg("contrast"), py::arg("seed"),
      py::arg("element"), "All eigenvalues of an element's displacement and pressure problems");

  m.def(
      "run",
      [](const py::object& config, std::optional<std::filesystem::path> out) {
        const ExperimentConfig c = config_from(config);
        VariantResult r;
        {
          py::gil_scoped_release release;
          const auto prep = prepare(c);
          r = run_variant(*prep, c.online, c.schedule, "run");
          if (out) write_artifacts(*prep, r, *out);
        }
        py::dict d;
        d["history"] = history_list(r.history);
        py::list errs;
        for (const StepError& e : r.errors)
          errs.append(py::dict(py::arg("n") = e.n, py::arg("dof_u") = e.dof_u,
                               py::arg("dof_p") = e.dof_p, py::arg("e_u") = e.e_u,
                               py::arg("e_p") = e.e_p));
        d["errors"] = errs;
        d["u"] = r.trajectory.u.back();
        d["p"] = r.trajectory.p.back();
        d["dof_u"] = r.space.dof_u();
        d["dof_p"] = r.space.dof_p();
        return d;
      },
      py::arg("config"), py::arg("out") = py::none(),
      "Fine reference + multiscale run. `config` is a preset name, JSON text or a dict.");

  m.def("history_csv",
        [](const py::list& rows) {
          EnrichmentHistory h;
          for (const auto& item : rows) {
            const py::dict d = item.cast<py::dict>();
            HistoryRow r;
            r.n = d["n"].cast<int>();
            r.k = d["k"].cast<int>();
            r.dof_u = d["dof_u"].cast<int>();
            r.dof_p = d["dof_p"].cast<int>();
            r.e_u = d["e_u"].cast<double>();
            r.e_p = d["e_p"].cast<double>();
            r.eta = d["eta"].cast<double>();
            r.strategy = d["strategy"].cast<std::string>();
            r.theta = d["theta"].cast<double>();
            r.gamma = d["gamma"].cast<double>();
            r.ell = d["ell"].cast<int>();
            h.rows.push_back(r);
          }
          return history_csv(h);
        },
        py::arg("rows"));

  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "cemporo");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool; returns its exit code");
}
