#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixlr/casework.hpp"
#include "mixlr/system.hpp"

namespace mixlr {

struct DataSource {
  enum class Kind : std::uint8_t { synthesize, csv };
  Kind kind = Kind::synthesize;
  std::string path;               // csv: profile table
  std::string rates = "table1";   // synthesize: "table1" or a rate CSV path
  std::size_t n_per_fluid = 30;
  std::size_t replicates = 4;
  std::optional<std::uint64_t> seed;  // defaults to a stream of the master seed
};

struct ExperimentConfig {
  DataSource data;
  int runs = 10;
  SplitSpec split;
  AugmentationCounts augmentation;
  BackgroundLevels backgrounds;
  std::vector<Strategy> strategies{Strategy::one_vs_rest};
  std::vector<Dichotomization> dichotomization{Dichotomization::per_replicate};
  std::vector<LabelSet> interest_sets;
  double cap = kDefaultLrCap;
  std::uint64_t seed = 0;
  TrainingConfig training;
  CalibrationOptions calibration;
  // Execution only; not part of the config hash.
  unsigned threads = 0;

  // Throws ConfigError.
  void validate() const;
};

// TOML with the field names above. Relative data paths resolve against
// `base_dir`. Throws ConfigError on syntax errors, unknown keys and bad values.
ExperimentConfig parse_experiment_config(std::string_view toml_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical JSON of everything that affects results.
nlohmann::ordered_json canonical_config(const ExperimentConfig& cfg);
// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const ExperimentConfig& cfg);

// Seed streams of the master seed.
std::uint64_t run_seed(std::uint64_t master, int run);
std::uint64_t data_seed(const ExperimentConfig& cfg);

// Synthesizes or loads the single-source samples, dropping housekeeping
// failures and mixtures.
Dataset load_singles(const ExperimentConfig& cfg, LoadReport* report = nullptr);

struct CellResult {
  int run = 0;
  std::uint64_t run_seed = 0;
  Strategy strategy = Strategy::one_vs_rest;
  Dichotomization mode = Dichotomization::per_replicate;
  LabelSet interest;
  MetricReport metrics;  // of the calibrated LRs
  double score_auc = 0.5;  // of the uncalibrated scores
  TippettCurve tippett;
};

struct CllrSummary {
  Strategy strategy;
  Dichotomization mode;
  LabelSet interest;
  std::size_t runs = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

struct ExperimentReport {
  std::string config_hash;
  nlohmann::ordered_json config;
  std::uint64_t master_seed = 0;
  std::uint64_t data_seed = 0;
  std::vector<std::uint64_t> run_seeds;
  LoadReport data;
  // Ordered by run, then mode, strategy and interest set in config order.
  std::vector<CellResult> cells;

  std::vector<CllrSummary> cllr_summary() const;
};

// Each run: split, augment the three parts, train, calibrate and evaluate on
// the augmented test part, for every (mode, strategy, interest set).
// Cells run in parallel; the report does not depend on the thread count.
ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& singles);

// metrics.csv, tippett.csv, cllr_summary.csv and report.json.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);
std::string metrics_csv(const ExperimentReport& report);
std::string tippett_csv(const ExperimentReport& report);
std::string cllr_summary_csv(const ExperimentReport& report);
nlohmann::ordered_json report_json(const ExperimentReport& report);

struct SensitivityRow {
  double log10_lr_uniform;
  double log10_lr_shifted;
  bool h1;
};

struct SensitivityResult {
  BodyFluid fluid;
  double level;
  Strategy strategy;
  Dichotomization mode;
  LabelSet interest;
  std::vector<SensitivityRow> rows;
  double median_abs_delta = 0.0;
};

// Trains the first (strategy, mode, interest set) of `cfg` twice on run 0's
// split: once under the configured background and once with `fluid` at
// `level`, then scores the same test set drawn under the configured
// background. Throws ConfigError when `fluid` is in the interest set.
SensitivityResult sensitivity_analysis(const ExperimentConfig& cfg, BodyFluid fluid, double level);
SensitivityResult sensitivity_analysis(const ExperimentConfig& cfg, const Dataset& singles, BodyFluid fluid,
                                       double level);
std::string sensitivity_csv(const SensitivityResult& r);
nlohmann::ordered_json sensitivity_json(const SensitivityResult& r, const std::string& config_hash);

// Verbal buckets from strongest support for H2 to strongest support for H1.
inline constexpr std::size_t kVerbalBuckets = 11;
std::size_t verbal_bucket(const VerbalConclusion& v) noexcept;
std::string verbal_bucket_label(std::size_t bucket);

// Rows: n/2 verdict (indication, no reliable statement, no indication).
struct CrossTab {
  std::array<std::array<std::size_t, kVerbalBuckets>, 3> counts{};

  std::size_t total() const noexcept;
  std::string to_csv() const;
};

// Throws std::invalid_argument on an empty case list.
CrossTab compare_with_n_over_2(const LrSystem& system, std::span<const CaseObservation> cases,
                               const HypothesisPair& hp, const CaseOptions& options = {});

}  // namespace mixlr
