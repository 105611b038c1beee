#include "mixlr/serialization.hpp"

#include <fstream>
#include <sstream>

#include "mixlr/error.hpp"

namespace mixlr::io {

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("field '") + key + "': " + e.what());
  }
}

Json scaling_json(const FeatureScaling& s) {
  Json j;
  j["mean"] = s.mean;
  j["scale"] = s.scale;
  return j;
}

FeatureScaling scaling_from_json(const Json& j) {
  return {get<std::vector<double>>(j, "mean"), get<std::vector<double>>(j, "scale")};
}

Json binary_json(const BinaryLogReg& m, const MarkerPanel& panel) {
  Json j;
  j["intercept"] = m.intercept;
  Json coef = Json::object();
  for (std::size_t i = 0; i < panel.size(); ++i) coef[panel.markers[i]] = m.coefficients[i];
  j["coefficients"] = coef;
  j["scaling"] = scaling_json(m.scaling);
  return j;
}

BinaryLogReg binary_from_json(const Json& j, const MarkerPanel& panel) {
  BinaryLogReg m;
  m.intercept = get<double>(j, "intercept");
  const auto& coef = j.at("coefficients");
  m.coefficients.resize(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) m.coefficients[i] = get<double>(coef, panel.markers[i].c_str());
  m.scaling = scaling_from_json(j.at("scaling"));
  return m;
}

Json powerset_json(const PowersetLogReg& m, const MarkerPanel& panel) {
  Json j;
  Json classes = Json::array();
  for (auto c : m.classes) classes.push_back(c.to_string());
  j["classes"] = classes;
  std::vector<double> intercepts(static_cast<std::size_t>(m.coefficients.cols()));
  for (Eigen::Index c = 0; c < m.coefficients.cols(); ++c) intercepts[static_cast<std::size_t>(c)] = m.coefficients(0, c);
  j["intercepts"] = intercepts;
  Json coef = Json::object();
  for (std::size_t i = 0; i < panel.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.coefficients.cols()));
    for (Eigen::Index c = 0; c < m.coefficients.cols(); ++c)
      row[static_cast<std::size_t>(c)] = m.coefficients(static_cast<Eigen::Index>(i + 1), c);
    coef[panel.markers[i]] = row;
  }
  j["coefficients"] = coef;
  j["scaling"] = scaling_json(m.scaling);
  return j;
}

PowersetLogReg powerset_from_json(const Json& j, const MarkerPanel& panel) {
  PowersetLogReg m;
  for (const auto& c : j.at("classes")) m.classes.push_back(LabelSet::parse(c.get<std::string>()));
  const auto intercepts = get<std::vector<double>>(j, "intercepts");
  if (m.classes.size() < 2 || intercepts.size() + 1 != m.classes.size())
    throw DataError("power-set model: class list and intercepts disagree");
  const auto k = static_cast<Eigen::Index>(intercepts.size());
  m.coefficients.resize(static_cast<Eigen::Index>(panel.size() + 1), k);
  for (Eigen::Index c = 0; c < k; ++c) m.coefficients(0, c) = intercepts[static_cast<std::size_t>(c)];
  const auto& coef = j.at("coefficients");
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto row = get<std::vector<double>>(coef, panel.markers[i].c_str());
    if (static_cast<Eigen::Index>(row.size()) != k) throw DataError("power-set model: wrong row length");
    for (Eigen::Index c = 0; c < k; ++c)
      m.coefficients(static_cast<Eigen::Index>(i + 1), c) = row[static_cast<std::size_t>(c)];
  }
  m.scaling = scaling_from_json(j.at("scaling"));
  return m;
}

Json n_over_2_json(const NOverTwoResult& r) {
  Json j;
  j["verdict"] = std::string(to_string(r.verdict));
  j["x"] = r.x;
  j["n"] = r.n;
  return j;
}

}  // namespace

Json to_json(const MarkerPanel& panel) {
  Json j;
  j["markers"] = panel.markers;
  j["housekeeping"] = panel.housekeeping;
  j["threshold_rfu"] = panel.threshold_rfu;
  return j;
}

MarkerPanel panel_from_json(const Json& j) {
  MarkerPanel p{get<std::vector<std::string>>(j, "markers"), get<std::vector<std::string>>(j, "housekeeping"),
                get<double>(j, "threshold_rfu")};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return p;
}

Json to_json(const BackgroundLevels& bg) {
  Json j = Json::object();
  for (auto f : kAllFluids) j[std::string(to_string(f))] = bg[f];
  return j;
}

BackgroundLevels background_from_json(const Json& j, BackgroundLevels base) {
  if (!j.is_object()) throw DataError("background must be an object of fluid: level");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw DataError("background level for '" + key + "' must be a number");
    const double v = value.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("background level for '" + key + "' outside [0, 1]");
    base.set(parse_fluid(key), v);
  }
  return base;
}

Json to_json(const HypothesisPair& hp) {
  Json j;
  j["interest"] = hp.interest.to_string();
  j["fixed_present"] = hp.fixed_present.to_string();
  j["fixed_absent"] = hp.fixed_absent.to_string();
  return j;
}

Json to_json(const Calibrator& c) {
  Json j;
  j["a0"] = c.a0;
  j["a1"] = c.a1;
  j["prior_log_odds"] = c.prior_log_odds;
  return j;
}

Json to_json(const MetricReport& m) {
  Json j;
  j["cllr"] = m.cllr;
  j["auc"] = m.auc;
  j["fp_rate"] = m.fp_rate;
  j["fn_rate"] = m.fn_rate;
  j["n_h1"] = m.n_h1;
  j["n_h2"] = m.n_h2;
  return j;
}

Json to_json(const VerbalConclusion& v) {
  Json j;
  j["label"] = std::string(v.label());
  j["favours"] = v.favours == Favours::h1 ? "H1" : v.favours == Favours::h2 ? "H2" : "neither";
  j["text"] = v.describe();
  return j;
}

Json to_json(const TippettCurve& curve) {
  Json thresholds = Json::array(), f1 = Json::array(), f2 = Json::array();
  for (const auto& p : curve.points) {
    thresholds.push_back(p.threshold);
    f1.push_back(p.fraction_h1);
    f2.push_back(p.fraction_h2);
  }
  Json j;
  j["threshold"] = thresholds;
  j["fraction_h1"] = f1;
  j["fraction_h2"] = f2;
  return j;
}

Json to_json(const LrSystem& system) {
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["variant_id"] = system.variant_id();
  j["strategy"] = std::string(to_string(system.spec.strategy));
  j["dichotomization"] = std::string(to_string(system.spec.mode));
  j["panel"] = to_json(system.panel);
  Json fluids = Json::array();
  for (auto f : kAllFluids) fluids.push_back(std::string(to_string(f)));
  j["fluids"] = fluids;
  j["background"] = to_json(system.spec.background);
  Json sets = Json::array();
  for (auto s : system.spec.interest_sets) sets.push_back(s.to_string());
  j["interest_sets"] = sets;

  Json training;
  training["lambda"] = system.spec.training.lambda;
  training["tolerance"] = system.spec.training.tolerance;
  training["max_iterations"] = system.spec.training.max_iterations;
  training["seed"] = system.spec.training.seed;
  training["standardize"] = system.spec.training.standardize;
  j["training"] = training;
  j["calibration"] = Json{{"correct_prior", system.spec.calibration.correct_prior},
                          {"slope_penalty", system.spec.calibration.slope_penalty}};

  if (system.spec.strategy == Strategy::one_vs_rest) {
    Json models = Json::object();
    for (const auto& [s, m] : system.binary) models[s.to_string()] = binary_json(m, system.panel);
    j["classifiers"] = models;
  } else if (system.powerset) {
    j["powerset"] = powerset_json(*system.powerset, system.panel);
  }
  Json cals = Json::object();
  for (const auto& [s, c] : system.calibrators) cals[s.to_string()] = to_json(c);
  j["calibrators"] = cals;
  return j;
}

LrSystem system_from_json(const Json& j) {
  if (get<std::string>(j, "format") != kModelFormat) throw DataError("not a mixlr model document");
  if (get<int>(j, "version") != kModelFormatVersion) throw DataError("unsupported model document version");
  try {
    LrSystem s;
    s.panel = panel_from_json(j.at("panel"));
    const auto fluids = get<std::vector<std::string>>(j, "fluids");
    if (fluids.size() != kFluidCount) throw DataError("model fluid list does not match this build");
    for (std::size_t i = 0; i < kFluidCount; ++i)
      if (fluids[i] != to_string(kAllFluids[i])) throw DataError("model fluid order does not match this build");

    s.spec.strategy = parse_strategy(get<std::string>(j, "strategy"));
    s.spec.mode = parse_dichotomization(get<std::string>(j, "dichotomization"));
    s.spec.background = background_from_json(j.at("background"));
    for (const auto& t : get<std::vector<std::string>>(j, "interest_sets"))
      s.spec.interest_sets.push_back(LabelSet::parse(t));
    const auto& training = j.at("training");
    s.spec.training.lambda = get<double>(training, "lambda");
    s.spec.training.tolerance = get<double>(training, "tolerance");
    s.spec.training.max_iterations = get<int>(training, "max_iterations");
    s.spec.training.seed = get<std::uint64_t>(training, "seed");
    s.spec.training.standardize = get<bool>(training, "standardize");
    s.spec.calibration.correct_prior = get<bool>(j.at("calibration"), "correct_prior");
    s.spec.calibration.slope_penalty = get<double>(j.at("calibration"), "slope_penalty");

    if (s.spec.strategy == Strategy::one_vs_rest) {
      for (const auto& [key, value] : j.at("classifiers").items()) {
        auto m = binary_from_json(value, s.panel);
        m.lambda = s.spec.training.lambda;
        m.seed = s.spec.training.seed;
        s.binary.emplace(LabelSet::parse(key), std::move(m));
      }
    } else {
      s.powerset = powerset_from_json(j.at("powerset"), s.panel);
      s.powerset->lambda = s.spec.training.lambda;
      s.powerset->seed = s.spec.training.seed;
    }
    for (const auto& [key, value] : j.at("calibrators").items()) {
      Calibrator c{get<double>(value, "a0"), get<double>(value, "a1"), get<double>(value, "prior_log_odds")};
      s.calibrators.emplace(LabelSet::parse(key), c);
    }
    for (auto interest : s.spec.interest_sets) {
      if (!s.calibrators.contains(interest)) throw DataError("no calibrator for " + interest.to_string());
      if (s.spec.strategy == Strategy::one_vs_rest && !s.binary.contains(interest))
        throw DataError("no classifier for " + interest.to_string());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

std::string dump_model(const LrSystem& system) { return to_json(system).dump(2) + "\n"; }

LrSystem load_model_file(const std::string& path) {
  try {
    return system_from_json(parse(read_file(path)));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_model_file(const LrSystem& system, const std::string& path) { write_file(path, dump_model(system)); }

CaseObservation case_from_json(const Json& j, const MarkerPanel& panel) {
  if (!j.is_object() || !j.contains("markers") || !j.at("markers").is_object())
    throw DataError("case must contain a 'markers' object");
  const auto& markers = j.at("markers");
  for (const auto& [key, value] : markers.items())
    if (!panel.index_of(key)) throw DataError("unknown marker '" + key + "'");
  std::vector<MarkerCount> counts(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& name = panel.markers[i];
    if (!markers.contains(name)) throw DataError("marker '" + name + "' missing from case");
    const auto& v = markers.at(name);
    if (!v.is_object() || !v.contains("detected") || !v.contains("total") || !v.at("detected").is_number_integer() ||
        !v.at("total").is_number_integer())
      throw DataError("marker '" + name + "' needs integer 'detected' and 'total'");
    counts[i] = {v.at("detected").get<int>(), v.at("total").get<int>()};
  }
  return CaseObservation(panel, std::move(counts));
}

Json to_json(const CaseObservation& obs) {
  Json markers = Json::object();
  for (std::size_t i = 0; i < obs.panel().size(); ++i)
    markers[obs.panel().markers[i]] = Json{{"detected", obs.counts()[i].detected}, {"total", obs.counts()[i].total}};
  return Json{{"markers", markers}};
}

Json to_json(const CaseReport& r) {
  Json j;
  j["variant_id"] = r.variant_id;
  j["hypotheses"] = to_json(r.hypotheses);
  j["background"] = to_json(r.background);
  j["log10_lr"] = r.log10_lr;
  j["capped_lr"] = r.capped_lr;
  j["cap"] = r.cap;
  j["verbal"] = to_json(r.verbal);
  j["intercept"] = r.intercept;
  Json contributions = Json::array();
  for (const auto& c : r.contributions) {
    Json e;
    e["marker"] = c.marker;
    e["coefficient"] = c.coefficient;
    e["detected"] = c.count.detected;
    e["total"] = c.count.total;
    e["value"] = c.value;
    e["contribution"] = c.contribution;
    contributions.push_back(e);
  }
  j["contributions"] = contributions;
  j["n_over_2"] = r.n_over_2_combined ? n_over_2_json(*r.n_over_2_combined) : Json(nullptr);
  Json per_fluid = Json::object();
  for (const auto& v : r.n_over_2_per_fluid)
    per_fluid[std::string(to_string(v.fluid))] = v.result ? n_over_2_json(*v.result) : Json(nullptr);
  j["n_over_2_per_fluid"] = per_fluid;
  return j;
}

Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("error writing '" + path + "'");
}

}  // namespace mixlr::io
