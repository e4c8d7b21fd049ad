#include <pendyn/app.hpp>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace pendyn;

namespace {

// nlohmann -> python through the json module; keeps key order
py::object to_py(const nlohmann::ordered_json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

py::array_t<double> to_array(const Vec& v) {
  py::array_t<double> a(v.size());
  auto m = a.mutable_unchecked<1>();
  for (Index i = 0; i < v.size(); ++i) m(i) = v[i];
  return a;
}

// accepts a JSON string, a dict, or a path-like
ExperimentConfig config_from(const py::object& cfg) {
  if (py::isinstance<py::dict>(cfg)) {
    py::object dumps = py::module_::import("json").attr("dumps");
    return parse_config(dumps(cfg).cast<std::string>());
  }
  if (py::isinstance<py::str>(cfg)) {
    const auto text = cfg.cast<std::string>();
    if (!text.empty() && text.find('{') != std::string::npos) return parse_config(text);
    return load_config(text);
  }
  return load_config(py::str(cfg).cast<std::string>());
}

py::dict trajectory(const TrajectoryRecord& rec) {
  const auto n = static_cast<py::ssize_t>(rec.samples.size());
  const auto d = static_cast<py::ssize_t>(rec.dim);
  py::array_t<double> t(n), x({n, d}), v({n, d});
  auto tm = t.mutable_unchecked<1>();
  auto xm = x.mutable_unchecked<2>();
  auto vm = v.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& s = rec.samples[i];
    tm(i) = s.t;
    for (py::ssize_t k = 0; k < d; ++k) {
      xm(i, k) = s.x[k];
      vm(i, k) = s.v[k];
    }
  }
  py::dict out;
  out["t"] = t;
  out["x"] = x;
  out["v"] = v;
  out["accepted"] = rec.stats.accepted;
  out["rejected"] = rec.stats.rejected;
  out["rhs_evaluations"] = rec.stats.rhs_evaluations;
  out["warnings"] = rec.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_pendyn, m) {
  m.doc() = "Penalty-regularized second-order dynamics";

  py::register_exception<Error>(m, "PendynError", PyExc_RuntimeError);

  m.def("gallery", [] {
    py::list out;
    for (const auto& inst : gallery()) {
      py::dict d;
      d["name"] = inst.name;
      d["description"] = inst.description;
      d["dim"] = inst.spec.dim();
      d["oracle"] = to_string(inst.oracle);
      d["strongly_monotone"] = inst.strongly_monotone;
      out.append(d);
    }
    return out;
  }, "Built-in problem instances.");

  m.def("oracle", [](const std::string& name) {
    const auto inst = find_instance(name);
    const auto r = kkt_oracle(inst);
    py::dict d;
    d["x_star"] = to_array(r.anchor.x_star);
    d["v"] = to_array(r.anchor.v);
    d["p"] = to_array(r.anchor.p);
    d["unique"] = r.unique;
    d["method"] = to_string(r.method);
    d["certificate_pass"] = verify_anchor(inst.spec, r.anchor).pass();
    return d;
  }, py::arg("name"), "Reference zero of A + D + N_C for a gallery instance.");

  m.def("lemma_constants", [](double lipschitz_b) { return to_py(to_json(lemma_constants(lipschitz_b))); },
        py::arg("lipschitz_b"));

  m.def("load_config", [](const py::object& cfg) { return to_py(to_json(config_from(cfg))); }, py::arg("config"),
        "Parse and normalize a config (JSON text, dict or path).");

  m.def("validate", [](const py::object& cfg) {
    const auto v = validate_experiment(config_from(cfg));
    py::dict d = to_py(to_json(v));
    d["pass"] = v.pass();
    return d;
  }, py::arg("config"), "Hypotheses, oracle certificate and operator property checks.");

  m.def("run", [](const py::object& cfg, const std::optional<std::string>& out_dir, bool force) {
    const auto c = config_from(cfg);
    if (!force) {
      const auto v = validate_experiment(c);
      if (!v.hypotheses.all_pass()) {
        throw Error(ErrorCode::kInvalidArgument, "hypotheses fail; pass force=True to run anyway\n" + to_text(v));
      }
    }
    std::optional<RunResult> r;
    {
      py::gil_scoped_release release;
      r = run_experiment(c);
      if (out_dir) write_artifacts(c, *r, *out_dir);
    }
    py::dict d;
    d["trajectory"] = trajectory(r->record);
    d["diagnostics"] = to_py(diagnostics_json(c, *r));
    return d;
  }, py::arg("config"), py::arg("out_dir") = py::none(), py::arg("force") = false,
     "Integrate and diagnose; returns the sampled trajectory and the diagnostics report.");
}
