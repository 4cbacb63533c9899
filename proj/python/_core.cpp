#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "weakpred/engine.hpp"
#include "weakpred/harness.hpp"

namespace py = pybind11;
using namespace weakpred;

namespace {

template <typename T>
py::array_t<T> to_array(std::span<const T> v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw InvalidInput("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

NormOrder norm_from(const std::string& r) {
  if (r == "2" || r == "L2") return NormOrder::L2;
  if (r == "inf" || r == "Linf") return NormOrder::Linf;
  throw InvalidInput("norm order must be '2' or 'inf'");
}

py::dict report_dict(const ErrorReport& e) {
  py::dict d;
  d["r"] = e.r == NormOrder::L2 ? "2" : "inf";
  d["abs_error"] = e.abs_error;
  d["rel_error"] = e.rel_error;
  d["gamma"] = e.gamma;
  d["mode"] = to_string(e.mode);
  d["memory"] = e.memory ? py::cast(*e.memory) : py::none();
  d["overflow"] = e.overflow;
  return d;
}

py::dict table_dict(const StudyTable& t) {
  py::list rows;
  for (const auto& row : t.rows) {
    py::dict d = report_dict(row.report);
    d["swept"] = row.swept;
    d["label"] = row.label;
    rows.append(d);
  }
  py::dict out;
  out["swept_name"] = t.swept_name;
  out["rows"] = rows;
  out["metadata"] = t.metadata;
  std::ostringstream csv;
  write_study_csv(csv, t);
  out["csv"] = csv.str();
  return out;
}

py::dict membership_dict(const MembershipReport& r) {
  py::dict d;
  d["class"] = to_string(r.class_tag);
  d["q"] = r.q;
  d["T"] = r.T;
  d["C"] = r.C;
  d["verdict"] = to_string(r.verdict);
  d["reason"] = r.reason;
  d["derivative_norms"] = r.derivative_norms;
  d["M_hat"] = r.M_hat;
  py::list tail;
  for (const auto& p : r.tail_curve) tail.append(py::make_tuple(p.omega, p.value, p.log_value));
  d["tail_curve"] = tail;
  return d;
}

GaussianMixtureParams mixture_from(const std::vector<std::tuple<double, double, double>>& terms) {
  GaussianMixtureParams p;
  for (const auto& [c, a, v] : terms) p.terms.push_back({c, a, v});
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal predictors for anticausal convolution functionals";

  static py::exception<NumericalRejection> numerical(m, "NumericalRejection", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NumericalRejection& e) {
      py::set_error(numerical, e.what());
    } catch (const InvalidInput& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<TimeGrid>(m, "TimeGrid")
      .def(py::init<double, double, std::size_t>(), py::arg("t_start"), py::arg("dt"), py::arg("n"))
      .def_property_readonly("t_start", &TimeGrid::t_start)
      .def_property_readonly("dt", &TimeGrid::dt)
      .def_property_readonly("n", &TimeGrid::n)
      .def_property_readonly("nyquist", &TimeGrid::nyquist)
      .def("times",
           [](const TimeGrid& g) {
             py::array_t<double> out(static_cast<py::ssize_t>(g.n()));
             for (std::size_t j = 0; j < g.n(); ++j) out.mutable_data()[j] = g.t(j);
             return out;
           })
      .def("__repr__", [](const TimeGrid& g) {
        std::ostringstream s;
        s << "TimeGrid(t_start=" << g.t_start() << ", dt=" << g.dt() << ", n=" << g.n() << ")";
        return s.str();
      });

  m.def("eval_h", &eval_h, py::arg("gamma"), py::arg("T"), py::arg("omega"));
  m.def(
      "eval_V",
      [](double gamma, double T, double omega) {
        const TransferValue v = eval_V(gamma, T, omega);
        return py::make_tuple(v.value, v.log_magnitude, v.phase);
      },
      py::arg("gamma"), py::arg("T"), py::arg("omega"),
      "Returns (V, log|V|, arg V).");
  m.def("gamma_for_band", &gamma_for_band, py::arg("epsilon"), py::arg("Omega"), py::arg("T"));

  py::class_<HorizonKernel>(m, "HorizonKernel")
      .def(py::init([](double T, double dt, py::array_t<double> samples) {
             return HorizonKernel(T, dt, from_array(samples));
           }),
           py::arg("T"), py::arg("dt"), py::arg("samples"))
      .def_static("boxcar", &HorizonKernel::boxcar, py::arg("T"), py::arg("dt"), py::arg("height") = 1.0)
      .def_static("triangular", &HorizonKernel::triangular, py::arg("T"), py::arg("dt"))
      .def_property_readonly("T", &HorizonKernel::T)
      .def_property_readonly("dt", &HorizonKernel::dt)
      .def_property_readonly("samples", [](const HorizonKernel& k) { return to_array(k.samples()); });

  py::class_<Process>(m, "Process")
      .def_readonly("id", &Process::id)
      .def_property_readonly("grid", [](const Process& p) { return p.signal.grid(); })
      .def_property_readonly("values", [](const Process& p) { return to_array(p.signal.values()); })
      .def_property_readonly("has_exact_spectrum", [](const Process& p) { return p.exact_spectrum.has_value(); })
      .def("spectrum", [](const Process& p) {
        const Spectrum X = p.spectrum();
        py::array_t<double> omega(static_cast<py::ssize_t>(X.size()));
        for (std::size_t i = 0; i < X.size(); ++i) omega.mutable_data()[i] = X.omega(i);
        return py::make_tuple(omega, to_array(X.values()));
      });

  m.def(
      "gaussian_mixture",
      [](const std::vector<std::tuple<double, double, double>>& terms, const TimeGrid& g) {
        return gaussian_mixture(mixture_from(terms), g);
      },
      py::arg("terms"), py::arg("grid"), "terms: list of (c, a, v) for c*exp(-(t-a)^2/v).");
  m.def("band_limited_process", &band_limited_process, py::arg("Omega"), py::arg("seed"), py::arg("grid"),
        py::arg("amplitude") = 1.0, py::arg("components") = 6);
  m.def("counterexample_te", &counterexample_te, py::arg("sign_index"), py::arg("grid"));
  m.def(
      "from_samples",
      [](const TimeGrid& g, py::array_t<double> values) {
        return Process{"samples", SampledSignal(g, from_array(values)), std::nullopt};
      },
      py::arg("grid"), py::arg("values"));

  py::class_<PredictorSpec>(m, "PredictorSpec")
      .def_property_readonly("gamma", &PredictorSpec::gamma)
      .def_property_readonly("T", &PredictorSpec::T)
      .def_property_readonly("negative_time_energy_fraction", &PredictorSpec::negative_time_energy_fraction)
      .def_property_readonly("kernel_edge_magnitude", &PredictorSpec::kernel_edge_magnitude)
      .def_property_readonly("zeroing_applied", &PredictorSpec::zeroing_applied)
      .def_property_readonly("k_hat", [](const PredictorSpec& s) { return to_array(s.k_hat().values()); });

  m.def(
      "synthesize",
      [](const HorizonKernel& k, double gamma, const TimeGrid& g, bool zero_negative_time, bool enforce_decay,
         double nyquist_taper) {
        SynthesisOptions o;
        o.zero_negative_time = zero_negative_time;
        o.enforce_decay = enforce_decay;
        o.nyquist_taper = nyquist_taper;
        return synthesize(k, gamma, g, o);
      },
      py::arg("kernel"), py::arg("gamma"), py::arg("grid"), py::arg("zero_negative_time") = true,
      py::arg("enforce_decay") = true, py::arg("nyquist_taper") = 0.1);

  m.def(
      "target_output",
      [](const Process& x, const HorizonKernel& k) { return to_array(target_output(x.signal, k).values()); },
      py::arg("process"), py::arg("kernel"), "y_j for j = 0 .. n - 1 - T/dt.");
  m.def(
      "predict_spectral",
      [](const Process& x, const PredictorSpec& s) {
        return to_array(predicted_output_spectral(x.spectrum(), s, x.signal.grid()).values());
      },
      py::arg("process"), py::arg("spec"));
  m.def(
      "predict_time",
      [](const Process& x, const PredictorSpec& s, std::optional<double> memory) {
        return to_array(predicted_output_time(x.signal, s, memory).values());
      },
      py::arg("process"), py::arg("spec"), py::arg("memory") = py::none());

  m.def(
      "convergence_study",
      [](const Process& x, const HorizonKernel& k, const std::vector<double>& gammas, const std::string& r,
         unsigned jobs) { return table_dict(convergence_study(x, k, gammas, norm_from(r), {jobs})); },
      py::arg("process"), py::arg("kernel"), py::arg("gammas"), py::arg("r") = "2", py::arg("jobs") = 1);
  m.def(
      "uniformity_study",
      [](const std::vector<Process>& family, const HorizonKernel& k, int q, const std::vector<double>& eps,
         unsigned jobs) { return table_dict(uniformity_study(family, k, q, eps, {jobs})); },
      py::arg("family"), py::arg("kernel"), py::arg("q"), py::arg("epsilons"), py::arg("jobs") = 1);
  m.def(
      "snapshot_estimate",
      [](const Process& x, const HorizonKernel& k, double gamma) {
        const SnapshotResult r = snapshot_estimate(x, k, gamma);
        py::dict d;
        d["true_integral"] = r.true_integral;
        d["predicted_integral"] = r.predicted_integral;
        d["rel_error"] = r.rel_error;
        d["gamma"] = r.gamma;
        return d;
      },
      py::arg("process"), py::arg("kernel"), py::arg("gamma"));

  m.def(
      "membership_x",
      [](const Process& x, int q, double T) {
        const Spectrum X = x.spectrum();
        return membership_dict(membership_x(X, q, T, default_omega_list(q, T, X.grid())));
      },
      py::arg("process"), py::arg("q"), py::arg("T"));
  m.def(
      "membership_mc", [](const Process& x, double C, int k_max) { return membership_dict(membership_mc(x.spectrum(), C, k_max)); },
      py::arg("process"), py::arg("C"), py::arg("k_max") = 10);
  m.def(
      "membership_nc", [](const Process& x, double C, int k_max) { return membership_dict(membership_nc(x.spectrum(), C, k_max)); },
      py::arg("process"), py::arg("C"), py::arg("k_max") = 10);

  m.def(
      "run",
      [](const std::string& command, std::optional<std::filesystem::path> config,
         std::optional<std::filesystem::path> output_dir, unsigned jobs) {
        std::ostringstream out, err;
        const int code = run_main(parse_command(command), config, {output_dir, jobs}, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("command"), py::arg("config") = py::none(), py::arg("output_dir") = py::none(), py::arg("jobs") = 1,
      "Runs a harness subcommand; returns (exit_code, stdout, stderr).");
  m.def("sha256_hex", &sha256_hex, py::arg("data"));
}
