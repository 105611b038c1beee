#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mixlr/casework.hpp"
#include "mixlr/system.hpp"

namespace mixlr::testing {

inline const LabelSet kVaginalMenstrual{BodyFluid::vaginal_mucosa, BodyFluid::menstrual_secretion};

// One-vs-rest model with the reference marker coefficients for
// vaginal_mucosa+menstrual_secretion and an identity calibrator. Markers
// not used in the worked cases have coefficient 0.
inline LrSystem reference_system(bool penile_background) {
  LrSystem s;
  s.panel = MarkerPanel::standard();
  s.spec.strategy = Strategy::one_vs_rest;
  s.spec.mode = Dichotomization::per_replicate;
  if (penile_background) s.spec.background.set(BodyFluid::skin_penile, 1.0);
  s.spec.interest_sets = {kVaginalMenstrual};

  const std::map<std::string, double> coef =
      penile_background
          ? std::map<std::string, double>{{"HBB", 0.51}, {"ALAS2", -0.43}, {"CD93", 0.0}, {"MUC4", 0.81},
                                          {"MMP10", 0.82}, {"MMP7", 1.1}, {"MMP11", 2.4}}
          : std::map<std::string, double>{{"HBB", 0.79},      {"ALAS2", -0.57}, {"CD93", -0.10},
                                          {"MUC4", 1.45},     {"MYOZ1", 1.33},  {"CYP2B7P1", 2.75},
                                          {"MMP10", 0.56},    {"MMP7", 1.35},   {"MMP11", 2.32}};
  BinaryLogReg m;
  m.intercept = penile_background ? -1.65 : -1.34;
  for (const auto& name : s.panel.markers) {
    const auto it = coef.find(name);
    m.coefficients.push_back(it == coef.end() ? 0.0 : it->second);
  }
  m.scaling = FeatureScaling::identity(s.panel.size());
  s.binary.emplace(kVaginalMenstrual, m);
  s.calibrators.emplace(kVaginalMenstrual, Calibrator::identity());
  return s;
}

// Detected counts (out of 4) in panel order for the three example traces.
inline CaseObservation worked_case(int n) {
  static const int kCounts[3][15] = {
      {3, 4, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
      {4, 4, 4, 0, 0, 0, 4, 4, 4, 4, 4, 4, 0, 0, 0},
      {4, 4, 4, 0, 0, 0, 2, 0, 0, 1, 2, 2, 0, 0, 0},
  };
  std::vector<MarkerCount> counts;
  for (int v : kCounts[n - 1]) counts.push_back({v, 4});
  return CaseObservation(MarkerPanel::standard(), counts);
}

inline CaseObservation uniform_case(int detected, int total = 4) {
  return CaseObservation(MarkerPanel::standard(), std::vector<MarkerCount>(15, MarkerCount{detected, total}));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mixlr_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string source_dir() { return MIXLR_SOURCE_DIR; }

}  // namespace mixlr::testing
