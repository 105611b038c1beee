#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixlr/profiles.hpp"
#include "mixlr/random.hpp"

namespace mixlr {

// Marginal probability that each fluid is present in a generated sample,
// independently of the others.
class BackgroundLevels {
 public:
  // 0.5 for every fluid except penile skin at 0.
  BackgroundLevels();
  static BackgroundLevels uniform(double p);

  double operator[](BodyFluid f) const noexcept { return levels_[index_of(f)]; }
  // Throws std::invalid_argument outside [0, 1].
  void set(BodyFluid f, double p);

  LabelSet always_present() const noexcept;
  LabelSet never_present() const noexcept;
  // Fluids with 0 < p < 1.
  LabelSet free_fluids() const noexcept;
  // True when every free fluid sits at exactly 0.5, i.e. all combinations of
  // free fluids are equally likely.
  bool is_balanced() const noexcept;

  // Entries differing from the defaults, e.g. "skin_penile=1"; "default" if none.
  std::string describe() const;

  friend bool operator==(const BackgroundLevels&, const BackgroundLevels&) = default;

 private:
  std::array<double, kFluidCount> levels_{};
};

struct SplitSpec {
  double train = 0.4;
  double calibration = 0.4;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplit {
  Dataset train;
  Dataset calibration;
  Dataset test;
};

// Stratified by label set. Throws DataError naming the fluid when a stratum
// has fewer than 3 samples.
DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec);

// How augmented replicates become a feature vector.
enum class Dichotomization : std::uint8_t {
  off,            // mean rfu over augmented replicates
  per_replicate,  // binarize each augmented replicate, then average (detection fraction)
  after_mean,     // average rfu, then binarize the mean
};

std::string_view to_string(Dichotomization d) noexcept;
Dichotomization parse_dichotomization(std::string_view text);

// H1: the stain contains at least one fluid of interest.
// H2: it contains none of them. Fluids in fixed_present / fixed_absent are
// agreed on by both sides.
struct HypothesisPair {
  LabelSet interest;
  LabelSet fixed_present;
  LabelSet fixed_absent;

  // Throws std::invalid_argument on an empty interest set or overlapping sets.
  void validate() const;
  bool is_h1(LabelSet labels) const noexcept { return labels.intersects(interest); }
  // Background levels with fixed_present forced to 1 and fixed_absent to 0.
  BackgroundLevels apply(BackgroundLevels bg) const;
};

enum class Branch : std::uint8_t { none, h1, h2 };

// Draws each fluid independently at its background level. Conditioning on a
// branch restricts the draw to label sets consistent with that hypothesis.
// Throws DataError when the branch cannot be satisfied under `bg`.
LabelSet mix_labels(const BackgroundLevels& bg, Rng& rng, const HypothesisPair* hp = nullptr,
                    Branch branch = Branch::none);

struct AugmentedSample {
  LabelSet labels;
  std::vector<double> features;
  std::vector<std::string> donors;
  std::size_t replicate_count = 0;
};

// Combines donors whose replicates are already in pairing order: augmented
// replicate j takes the per-marker maximum over every donor's j-th replicate.
// Only the first min(replicate counts) replicates are used.
AugmentedSample combine_donors(std::span<const std::vector<Replicate>> donors, std::size_t markers,
                               Dichotomization mode, double threshold_rfu);

// Single-source samples indexed by fluid.
class DonorPool {
 public:
  explicit DonorPool(const Dataset& singles);

  const MarkerPanel& panel() const noexcept { return panel_; }
  std::span<const Sample> donors(BodyFluid f) const noexcept { return by_fluid_[index_of(f)]; }

 private:
  MarkerPanel panel_;
  std::array<std::vector<Sample>, kFluidCount> by_fluid_;
};

// One donor per fluid in `labels`, drawn with replacement; each donor's
// replicates are shuffled independently before pairing.
// Throws DataError when a fluid has no donor. The empty set yields zeros.
AugmentedSample augment_mixture(const DonorPool& pool, LabelSet labels, Dichotomization mode, Rng& rng);

struct AugmentedDataset {
  std::vector<AugmentedSample> samples;
  BackgroundLevels background;
  Dichotomization mode = Dichotomization::per_replicate;
  std::uint64_t seed = 0;

  Eigen::MatrixXd feature_matrix() const;
  std::vector<LabelSet> labels() const;
  std::vector<bool> h1_flags(LabelSet interest) const;
};

struct AugmentationPlan {
  enum class Kind : std::uint8_t {
    per_combination,  // every combination of free fluids, `count` times each
    sampled,          // `count` label sets drawn via mix_labels
  };
  Kind kind = Kind::per_combination;
  std::size_t count = 10;
};

// Sample i draws from its own stream derive_seed(seed, {i}), so the output is
// independent of generation order.
AugmentedDataset build_augmented_dataset(const DonorPool& pool, const BackgroundLevels& bg,
                                         const AugmentationPlan& plan, Dichotomization mode,
                                         std::uint64_t seed);

// Size of a per-combination dataset with the same background: 2^free * count.
std::size_t per_combination_size(const BackgroundLevels& bg, std::size_t count);

// CSV with one row per augmented sample (replicate_id "agg", features in the
// marker columns) and a JSON sidecar with seed, background and mode.
std::string write_augmented_csv(const AugmentedDataset& ds, const MarkerPanel& panel);
std::string augmented_metadata_json(const AugmentedDataset& ds);

}  // namespace mixlr
