#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mixlr/calibrate.hpp"
#include "mixlr/casework.hpp"
#include "mixlr/error.hpp"
#include "mixlr/metrics.hpp"
#include "mixlr/pipeline.hpp"
#include "mixlr/serialization.hpp"

namespace py = pybind11;
using namespace mixlr;

namespace {

std::vector<LRValue> to_lrs(const std::vector<double>& v) {
  std::vector<LRValue> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(LRValue::from_lr(x));
  return out;
}

HypothesisPair hypotheses(const std::string& interest, const std::string& present, const std::string& absent) {
  HypothesisPair hp{LabelSet::parse(interest), LabelSet::parse(present), LabelSet::parse(absent)};
  hp.validate();
  return hp;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Likelihood ratios for body-fluid mixtures from mRNA profiles";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const DataError& e) {
      data_error(e.what());
    } catch (const NumericError& e) {
      numeric_error(e.what());
    }
  });

  m.def("panel_markers", [] { return MarkerPanel::standard().markers; });
  m.def("fluids", [] {
    std::vector<std::string> out;
    for (auto f : kAllFluids) out.emplace_back(to_string(f));
    return out;
  });

  m.def(
      "synthesize",
      [](std::size_t n_per_fluid, std::uint64_t seed, std::size_t replicates) {
        SynthesisOptions opts;
        opts.n_per_fluid = n_per_fluid;
        opts.seed = seed;
        opts.reps_per_sample = replicates;
        return write_profile_table(synthesize_dataset(reference_detection_rates(), MarkerPanel::standard(), opts));
      },
      py::arg("n_per_fluid") = 30, py::arg("seed") = 0, py::arg("replicates") = 4,
      "Profile CSV drawn from the reference detection rates.");

  m.def("cllr", [](const std::vector<double>& h1, const std::vector<double>& h2) {
    return cllr(to_lrs(h1), to_lrs(h2));
  });
  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<bool>& h1, double threshold) {
        const auto r = roc_auc(scores, h1, threshold);
        return py::make_tuple(r.auc, r.fp_rate, r.fn_rate);
      },
      py::arg("scores"), py::arg("h1"), py::arg("threshold") = 1.0);
  m.def(
      "fit_calibrator",
      [](const std::vector<double>& log10_scores, const std::vector<bool>& h1, bool correct_prior,
         double slope_penalty) {
        CalibrationOptions o;
        o.correct_prior = correct_prior;
        o.slope_penalty = slope_penalty;
        const auto c = fit_calibrator(log10_scores, h1, o);
        return py::make_tuple(c.a0, c.a1, c.prior_log_odds);
      },
      py::arg("log10_scores"), py::arg("h1"), py::arg("correct_prior") = true, py::arg("slope_penalty") = 0.0,
      "Returns (a0, a1, prior_log_odds).");
  m.def("verbal_scale", [](double lr) { return verbal_scale(LRValue::from_lr(lr)).describe(); });
  m.def(
      "cap_lr", [](double lr, double cap) { return cap_lr(LRValue::from_lr(lr), cap).lr(); }, py::arg("lr"),
      py::arg("cap") = kDefaultLrCap);

  m.def(
      "n_over_2",
      [](const std::string& case_json, const std::string& fluids) {
        const auto obs = io::case_from_json(io::parse(case_json), MarkerPanel::standard());
        const auto r = n_over_2(obs, LabelSet::parse(fluids), MarkerFluidMap::defaults());
        return py::make_tuple(std::string(to_string(r.verdict)), r.x, r.n);
      },
      py::arg("case_json"), py::arg("fluids"));

  py::class_<LrSystem>(m, "Model")
      .def_static("load", &io::load_model_file, py::arg("path"))
      .def_static("from_json", [](const std::string& text) { return io::system_from_json(io::parse(text)); })
      .def_property_readonly("variant_id", &LrSystem::variant_id)
      .def("to_json", &io::dump_model)
      .def(
          "evaluate",
          [](const LrSystem& s, const std::string& case_json, const std::string& interest, const std::string& present,
             const std::string& absent, double cap) {
            CaseOptions opts;
            opts.cap = cap;
            const auto obs = io::case_from_json(io::parse(case_json), s.panel);
            return io::to_json(evaluate_case(s, obs, hypotheses(interest, present, absent), opts)).dump();
          },
          py::arg("case_json"), py::arg("interest"), py::arg("fixed_present") = "", py::arg("fixed_absent") = "",
          py::arg("cap") = kDefaultLrCap, "CaseReport as a JSON string.");

  m.def(
      "run_experiment",
      [](const std::string& toml, unsigned threads) {
        auto cfg = parse_experiment_config(toml);
        cfg.threads = threads;
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return report_json(r).dump();
      },
      py::arg("toml"), py::arg("threads") = 0, "Report bundle as a JSON string.");
}
