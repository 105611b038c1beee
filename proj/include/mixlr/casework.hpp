#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixlr/augmentation.hpp"
#include "mixlr/metrics.hpp"
#include "mixlr/system.hpp"

namespace mixlr {

struct MarkerCount {
  int detected = 0;
  int total = 0;

  friend bool operator==(const MarkerCount&, const MarkerCount&) = default;
};

// Replicate detection counts for one trace, in panel order, with one
// replicate total shared by every marker.
class CaseObservation {
 public:
  // Throws DataError on a count/panel size mismatch, detected > total,
  // totals outside 1..4 or totals that differ between markers.
  CaseObservation(MarkerPanel panel, std::vector<MarkerCount> counts);
  static CaseObservation from_replicates(const MarkerPanel& panel, std::span<const Replicate> reps);

  const MarkerPanel& panel() const noexcept { return panel_; }
  const std::vector<MarkerCount>& counts() const noexcept { return counts_; }
  int replicate_total() const noexcept { return counts_.empty() ? 0 : counts_.front().total; }
  // detected / total per marker.
  std::vector<double> fractions() const;

 private:
  MarkerPanel panel_;
  std::vector<MarkerCount> counts_;
};

// Markers regarded as indicative of each fluid for the n/2 rule.
struct MarkerFluidMap {
  std::map<BodyFluid, std::vector<std::string>> markers;

  static MarkerFluidMap defaults();
  std::span<const std::string> for_fluid(BodyFluid f) const noexcept;
};

enum class NOverTwoVerdict { indication, no_reliable_statement, no_indication };

std::string_view to_string(NOverTwoVerdict v) noexcept;

struct NOverTwoResult {
  NOverTwoVerdict verdict;
  int x;  // detections over the indicative markers
  int n;  // indicative markers * replicates
};

// Indication if x >= n/2, no indication if x == 0, otherwise no reliable
// statement. Throws DataError if a fluid has no indicative markers.
NOverTwoResult n_over_2(const CaseObservation& obs, LabelSet fluids, const MarkerFluidMap& map);

struct Contribution {
  std::string marker;
  double coefficient = 0.0;
  MarkerCount count;
  double value = 0.0;         // detected / total
  double contribution = 0.0;  // coefficient * value
};

struct FluidVerdict {
  BodyFluid fluid;
  std::optional<NOverTwoResult> result;  // empty when the fluid has no indicative markers
};

struct CaseReport {
  std::string variant_id;
  HypothesisPair hypotheses;
  BackgroundLevels background;
  double intercept = 0.0;
  std::vector<Contribution> contributions;
  double log10_lr = 0.0;  // intercept + sum of contributions
  double capped_lr = 1.0;
  double cap = kDefaultLrCap;
  VerbalConclusion verbal;  // of the capped LR
  std::optional<NOverTwoResult> n_over_2_combined;
  std::vector<FluidVerdict> n_over_2_per_fluid;

  // Worked-equation layout: "log10 LR = -1.34 + 0.79 * 3/4 + ... = -1.42".
  std::string to_text() const;
};

struct CaseOptions {
  double cap = kDefaultLrCap;
  MarkerFluidMap marker_map = MarkerFluidMap::defaults();
};

// Evaluates a trace with the fused one-vs-rest model for hp.interest.
// Throws DataError when the panel differs from the model's, and
// std::invalid_argument when the model does not cover the hypotheses.
CaseReport evaluate_case(const LrSystem& system, const CaseObservation& obs, const HypothesisPair& hp,
                         const CaseOptions& options = {});

// No stored variant matches and on-demand training is disabled.
class VariantNotFound : public std::runtime_error {
 public:
  VariantNotFound(const std::string& what, std::vector<std::string> available)
      : std::runtime_error(what), available_(std::move(available)) {}
  const std::vector<std::string>& available() const noexcept { return available_; }

 private:
  std::vector<std::string> available_;
};

// Single-source data and recipe for training missing variants.
struct TrainingSource {
  Dataset singles;
  TrainingRecipe recipe;
  TrainingConfig training;
};

// Trained LR systems keyed by variant id. Lookups take a shared lock;
// inserting a new variant is serialised.
class ModelStore {
 public:
  ModelStore() = default;

  // Loads every *.json model document in `dir`, in file-name order.
  static std::unique_ptr<ModelStore> load_directory(const std::string& dir);

  void insert(LrSystem system);
  std::shared_ptr<const LrSystem> find(const std::string& variant_id) const;
  // A one-vs-rest system covering `interest` under exactly `background`.
  std::shared_ptr<const LrSystem> find(LabelSet interest, const BackgroundLevels& background,
                                       Dichotomization mode) const;
  // Ordered by variant id.
  std::vector<std::shared_ptr<const LrSystem>> list() const;
  std::vector<std::string> variant_ids() const;

  void enable_training(TrainingSource source);
  bool training_enabled() const;

  // find(), falling back to training when enabled; throws VariantNotFound.
  std::shared_ptr<const LrSystem> obtain(LabelSet interest, const BackgroundLevels& background,
                                         Dichotomization mode = Dichotomization::per_replicate);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const LrSystem>> variants_;
  std::optional<TrainingSource> training_;
  std::mutex train_mutex_;
};

// evaluate_case with the variant trained under `background` (the default
// background with the caller's overrides applied).
CaseReport what_if(ModelStore& store, const CaseObservation& obs, const HypothesisPair& hp,
                   const BackgroundLevels& background, const CaseOptions& options = {});

}  // namespace mixlr
