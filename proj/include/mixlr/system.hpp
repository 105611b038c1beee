#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixlr/augmentation.hpp"
#include "mixlr/calibrate.hpp"
#include "mixlr/classify.hpp"
#include "mixlr/metrics.hpp"

namespace mixlr {

enum class Strategy : std::uint8_t { one_vs_rest, power_set };

std::string_view to_string(Strategy s) noexcept;
// Accepts one_vs_rest / one-vs-rest / ovr and power_set / power-set / powerset.
Strategy parse_strategy(std::string_view text);

struct SystemSpec {
  Strategy strategy = Strategy::one_vs_rest;
  Dichotomization mode = Dichotomization::per_replicate;
  BackgroundLevels background;
  std::vector<LabelSet> interest_sets;
  TrainingConfig training;
  CalibrationOptions calibration;
};

// A score model plus one calibrator per set of fluids of interest.
struct LrSystem {
  MarkerPanel panel;
  SystemSpec spec;
  std::map<LabelSet, BinaryLogReg> binary;  // one_vs_rest, keyed by interest set
  std::optional<PowersetLogReg> powerset;
  std::map<LabelSet, Calibrator> calibrators;

  // "<strategy>:<interest sets>:<mode>:<background>", unique per
  // (strategy, interest sets, mode, background).
  std::string variant_id() const;

  bool supports(LabelSet interest) const noexcept { return calibrators.contains(interest); }
  // Raw score, clipped to [1e-10, 1e10], as log10.
  double log10_score(LabelSet interest, std::span<const double> features) const;
  LRValue lr(LabelSet interest, std::span<const double> features) const;
  // one_vs_rest only: classifier with the calibrator folded in.
  BinaryLogReg fused(LabelSet interest) const;
};

std::string make_variant_id(Strategy strategy, std::span<const LabelSet> interest_sets, Dichotomization mode,
                            const BackgroundLevels& background);

// Trains on `train` and calibrates on `calibration`. Power-set systems share
// one classifier across interest sets.
LrSystem fit_system(const MarkerPanel& panel, const AugmentedDataset& train, const AugmentedDataset& calibration,
                    const SystemSpec& spec);

std::vector<LRValue> evaluate_system(const LrSystem& system, LabelSet interest, const AugmentedDataset& data);

// Augmentation sizes for the training, calibration and test sets.
struct AugmentationCounts {
  std::size_t train = 10;
  std::size_t calibration = 10;
  std::size_t test = 5;
};

struct TrainingRecipe {
  SplitSpec split;
  AugmentationCounts counts;
  std::uint64_t seed = 0;
};

struct TrainedSystem {
  LrSystem system;
  std::map<LabelSet, MetricReport> test_metrics;
};

// Split the single-source samples, augment each part under the system's
// background, then fit and evaluate. Balanced backgrounds enumerate every
// combination; others draw label sets of the same total size. The split
// uses derive_seed(recipe.seed, {1}) and part k derive_seed(recipe.seed, {2, k}).
TrainedSystem train_system(const Dataset& singles, const SystemSpec& spec, const TrainingRecipe& recipe);

// Augments one part of the data the way train_system does.
AugmentedDataset augment_part(const DonorPool& pool, const BackgroundLevels& bg, std::size_t count,
                              Dichotomization mode, std::uint64_t seed);

}  // namespace mixlr
