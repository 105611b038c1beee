// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mixlr/calibrate.hpp"
#include "mixlr/casework.hpp"
#include "mixlr/error.hpp"
#include "mixlr/metrics.hpp"
#include "mixlr/pipeline.hpp"
#include "mixlr/serialization.hpp"
#include "oracles.hpp"

using namespace mixlr;
using namespace mixlr::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const HypothesisPair kHp{kVaginalMenstrual, {}, {}};

Outcome worked_cases() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto base = reference_system(false);
  const auto penile = reference_system(true);
  const HypothesisPair penile_hp{kVaginalMenstrual, LabelSet{BodyFluid::skin_penile}, {}};
  const double got[4] = {evaluate_case(base, worked_case(1), kHp).log10_lr,
                         evaluate_case(base, worked_case(2), kHp).log10_lr,
                         evaluate_case(base, worked_case(3), kHp).log10_lr,
                         evaluate_case(penile, worked_case(3), penile_hp).log10_lr};
  const double want[4] = {-1.4, 8.5, 1.5, 0.8};
  Outcome o;
  for (int i = 0; i < 4; ++i) {
    o.pass = o.pass && std::abs(got[i] - want[i]) <= 0.05;
    o.detail += fmt(got[i]) + " (want " + fmt(want[i]) + "), ";
  }
  const double s = seconds_since(t0);
  o.pass = o.pass && s < 1.0;
  o.detail += "tol 0.05, " + fmt(s, 3) + " s < 1 s";
  return o;
}

Outcome n_over_2_baseline() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto v = n_over_2(worked_case(3), kVaginalMenstrual, MarkerFluidMap::defaults());
  const double s = seconds_since(t0);
  return {v.verdict == NOverTwoVerdict::no_reliable_statement && v.x == 7 && v.n == 24 && s < 1.0,
          std::string(to_string(v.verdict)) + " x=" + std::to_string(v.x) + " n=" + std::to_string(v.n) + ", " +
              fmt(s, 3) + " s"};
}

// The shipped experiment config restricted to one-vs-rest, dichotomized.
ExperimentConfig desk_config() {
  auto cfg = load_experiment_config(std::string(MIXLR_SOURCE_DIR) + "/configs/exp.toml");
  cfg.strategies = {Strategy::one_vs_rest};
  cfg.dichotomization = {Dichotomization::per_replicate};
  cfg.interest_sets = {kVaginalMenstrual, LabelSet{BodyFluid::skin}};
  return cfg;
}

struct DeskRun {
  ExperimentReport report;
  double seconds = 0;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    DeskRun r{run_experiment(desk_config()), 0};
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

std::vector<const CellResult*> cells_for(LabelSet interest) {
  std::vector<const CellResult*> out;
  for (const auto& c : desk_run().report.cells)
    if (c.interest == interest) out.push_back(&c);
  return out;
}

Outcome desk_scale() {
  const auto cells = cells_for(kVaginalMenstrual);
  Outcome o;
  int soft = 0;
  double lo = 1e9, hi = -1e9;
  for (const auto* c : cells) {
    const double v = c->metrics.cllr;
    o.pass = o.pass && v > 0.0 && v < 1.0;
    soft += v >= 0.05 && v <= 0.8;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  o.pass = o.pass && cells.size() == 10 && desk_run().seconds < 300.0;
  o.detail = std::to_string(cells.size()) + " runs, Cllr in [" + fmt(lo) + ", " + fmt(hi) + "] within (0, 1); soft band [0.05, 0.8]: " +
             std::to_string(soft) + "/" + std::to_string(cells.size()) + (soft == int(cells.size()) ? " met" : " NOT met") +
             "; " + fmt(desk_run().seconds, 3) + " s < 300 s";
  return o;
}

Outcome null_control() {
  const auto cells = cells_for(LabelSet{BodyFluid::skin});
  Outcome o;
  double min_cllr = 1e9, max_auc = 0;
  int auc_ok = 0;
  for (const auto* c : cells) {
    o.pass = o.pass && c->metrics.cllr >= 0.9 && c->metrics.auc <= 0.6;
    min_cllr = std::min(min_cllr, c->metrics.cllr);
    max_auc = std::max(max_auc, c->metrics.auc);
    auc_ok += c->metrics.auc <= 0.6;
  }
  o.pass = o.pass && !cells.empty();
  o.detail = "every run: min Cllr " + fmt(min_cllr) + " (>= 0.9), max AUC " + fmt(max_auc) + " (<= 0.6), AUC ok in " +
             std::to_string(auc_ok) + "/" + std::to_string(cells.size()) + " runs";
  return o;
}

Outcome powerset_oracle() {
  Rng rng(20240601);
  const LabelSet interest{BodyFluid::saliva, BodyFluid::vaginal_mucosa};
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = random_powerset(rng, 15);
    std::vector<double> r(15);
    for (auto& v : r) v = rng.uniform(0, 1);
    const double want = brute_force_score(m, r, interest);
    worst = std::max(worst, std::abs(score_powerset(m, r, interest) - want) / std::max(1.0, std::abs(want)));
  }
  return {worst <= 1e-9, "100 inputs, k=3, max rel. deviation " + fmt(worst, 3) + " (<= 1e-9)"};
}

Outcome gradient_check() {
  SynthesisOptions opts;
  opts.n_per_fluid = 10;
  opts.seed = 3;
  const auto ds = synthesize_dataset(reference_detection_rates(), MarkerPanel::standard(), opts);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.samples.size()), 15);
  std::vector<bool> y;
  std::vector<int> cls;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto f = replicate_fractions(ds.samples[i].replicates, 150.0);
    for (std::size_t m = 0; m < 15; ++m) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = f[m];
    const auto fluid = ds.samples[i].labels.fluids().front();
    y.push_back(fluid == BodyFluid::vaginal_mucosa);
    cls.push_back(static_cast<int>(index_of(fluid)));
  }
  const BinaryLogisticLoss bin(x, y, 1e-3);
  const MultinomialLogisticLoss multi(x, cls, int(kFluidCount), 1e-3);
  Rng rng(9);
  double worst_bin = 0, worst_multi = 0;
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd w(bin.dimension());
    for (auto& v : w) v = rng.normal();
    Eigen::VectorXd g(w.size());
    bin(w, &g, nullptr);
    worst_bin = std::max(worst_bin, relative_error(g, numeric_gradient([&](const Eigen::VectorXd& v) {
                                                       return bin(v, nullptr, nullptr);
                                                     },
                                                                       w)));
    Eigen::VectorXd u(multi.dimension());
    for (auto& v : u) v = rng.normal() * 0.5;
    Eigen::VectorXd h(u.size());
    multi(u, &h);
    worst_multi = std::max(
        worst_multi, relative_error(h, numeric_gradient([&](const Eigen::VectorXd& v) { return multi(v, nullptr); }, u)));
  }
  return {worst_bin <= 1e-5 && worst_multi <= 1e-5,
          "10 points each, max rel. error binary " + fmt(worst_bin, 3) + ", multinomial " + fmt(worst_multi, 3) +
              " (<= 1e-5)"};
}

Outcome calibration_suite() {
  Outcome o;
  const std::vector<LRValue> ones(5, LRValue::from_lr(1.0));
  const bool unit = cllr(ones, ones) == 1.0;

  Rng rng(11);
  double fusion = 0;
  for (int t = 0; t < 100; ++t) {
    BinaryLogReg m;
    m.intercept = rng.normal();
    for (int i = 0; i < 15; ++i) m.coefficients.push_back(rng.normal());
    m.scaling = FeatureScaling::identity(15);
    const Calibrator c{rng.normal(), rng.uniform(0.1, 2.0), rng.normal() * 0.3};
    std::vector<double> r(15);
    for (auto& v : r) v = rng.uniform(0, 1);
    const double composed = apply_calibrator_log10(c, m.log10_score(r)).log10_lr();
    fusion = std::max(fusion, std::abs(fuse_coefficients(c, m).log10_score(r) - composed) /
                                  std::max(1.0, std::abs(composed)));
  }

  // Held-out data: overconfident binormal scores.
  auto draw = [&](std::size_t n, std::uint64_t seed, std::vector<double>& s, std::vector<bool>& f) {
    Rng g(seed);
    const double sd = 1.2, mu = sd * sd * std::log(10.0) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(mu + sd * g.normal() + 0.8);
      f.push_back(true);
      s.push_back(-mu + sd * g.normal() + 0.8);
      f.push_back(false);
    }
  };
  std::vector<double> fit_s, held_s;
  std::vector<bool> fit_f, held_f;
  draw(5000, 1, fit_s, fit_f);
  draw(20000, 2, held_s, held_f);
  const auto cal = fit_calibrator(fit_s, fit_f);
  std::map<long, std::pair<int, int>> bins;
  std::vector<double> calibrated;
  for (std::size_t i = 0; i < held_s.size(); ++i) {
    calibrated.push_back(cal.log10_lr(held_s[i]));
    auto& b = bins[std::lround(calibrated.back())];
    (held_f[i] ? b.first : b.second)++;
  }
  double worst_bin = 0;
  int used = 0;
  for (const auto& [center, n] : bins) {
    if (n.first < 30 || n.second < 30) continue;
    ++used;
    worst_bin = std::max(worst_bin, std::abs(std::log10(double(n.first) / n.second) - double(center)));
  }
  const double auc_shift = std::abs(roc_auc(held_s, held_f, 0.0).auc - roc_auc(calibrated, held_f, 0.0).auc);

  o.pass = unit && fusion <= 1e-12 && used > 0 && worst_bin <= 0.5 && auc_shift <= 1e-12;
  o.detail = std::string("Cllr(LR=1) ") + (unit ? "= 1" : "!= 1") + ", fusion " + fmt(fusion, 3) + " (<= 1e-12), " +
             std::to_string(used) + " decade bins max dev " + fmt(worst_bin, 3) + " (<= 0.5), AUC shift " +
             fmt(auc_shift, 3) + " (<= 1e-12)";
  return o;
}

Outcome sensitivity() {
  const auto cfg = desk_config();
  const auto r = sensitivity_analysis(cfg, BodyFluid::blood, 0.9);
  bool finite = true;
  for (const auto& row : r.rows) finite = finite && std::isfinite(row.log10_lr_uniform) && std::isfinite(row.log10_lr_shifted);
  const std::size_t test_size = per_combination_size(cfg.backgrounds, cfg.augmentation.test);
  return {finite && r.rows.size() == test_size && r.median_abs_delta < 1.0,
          std::to_string(r.rows.size()) + " paired rows (test set " + std::to_string(test_size) + "), " +
              (finite ? "all finite" : "non-finite values") + ", median |d log10 LR| " + fmt(r.median_abs_delta) +
              " (< 1.0)"};
}

// Every regular file under `dir`, relative path -> contents.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_file(e.path().string());
  return out;
}

Outcome cli_determinism() {
  const std::string cli = MIXLR_CLI;
  const std::string src = MIXLR_SOURCE_DIR;
  const fs::path root = temp_dir("acceptance_cli");
  const auto config = root / "exp.toml";
  io::write_file(config.string(),
                 "seed = 11\nruns = 2\nstrategies = [\"one_vs_rest\", \"power_set\"]\n"
                 "dichotomization = [\"on\", \"off\"]\ninterest_sets = [\"vaginal_mucosa+menstrual_secretion\"]\n"
                 "[data]\nn_per_fluid = 10\n[augmentation]\ntrain = 2\ncalibration = 2\ntest = 1\n");

  std::vector<std::string> steps;
  for (const char* tag : {"a", "b"}) {
    const auto d = root / tag;
    fs::create_directories(d);
    const std::string p = d.string();
    steps.push_back(cli + " synth --rates table1 --seed 5 --n-per-fluid 10 --out " + p + "/singles.csv");
    steps.push_back(cli + " train --data " + p + "/singles.csv --interest vaginal_mucosa,menstrual_secretion" +
                    " --strategy one-vs-rest --dichotomize --background penile=0 --seed 5 --out " + p + "/model.json");
    steps.push_back(cli + " evaluate --model " + p + "/model.json --case " + src + "/data/cases/case3.json" +
                    " --format json > " + p + "/case3.json");
    steps.push_back(cli + " compare --model " + p + "/model.json --case " + src + "/data/cases/case1.json " + src +
                    "/data/cases/case2.json " + src + "/data/cases/case3.json > " + p + "/crosstab.csv");
    steps.push_back(cli + " experiment --config " + config.string() + " --threads " + (tag[0] == 'a' ? "1" : "2") +
                    " --out " + p + "/report");
    steps.push_back(cli + " sensitivity --config " + config.string() + " --fluid blood --level 0.9 --out " + p +
                    "/sensitivity");
  }
  for (const auto& s : steps) {
    const std::string cmd = (s.find('>') == std::string::npos ? s + " >/dev/null" : s) + " 2>/dev/null";
    if (const int rc = std::system(cmd.c_str()); rc != 0)
      return {false, "command failed (" + std::to_string(rc) + "): " + s};
  }

  const auto a = snapshot(root / "a"), b = snapshot(root / "b");
  std::size_t same = 0;
  std::string differing;
  for (const auto& [name, body] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == body) ++same;
    else differing += " " + name;
  }
  const bool ok = same == a.size() && a.size() == b.size() && a.size() >= 10;
  return {ok, std::to_string(same) + "/" + std::to_string(a.size()) +
                  " output files byte-identical across two invocations of synth, train, evaluate, compare, experiment "
                  "(1 vs 2 threads) and sensitivity" +
                  (differing.empty() ? "" : "; differ:" + differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"worked-cases", worked_cases},
      {"n-over-2-baseline", n_over_2_baseline},
      {"desk-scale-experiment", desk_scale},
      {"null-information-control", null_control},
      {"powerset-oracle", powerset_oracle},
      {"gradient-check", gradient_check},
      {"calibration-suite", calibration_suite},
      {"sensitivity-analysis", sensitivity},
      {"cli-determinism", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
