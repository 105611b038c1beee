#include "mixlr/system.hpp"

#include <stdexcept>

#include "mixlr/error.hpp"

namespace mixlr {

std::string_view to_string(Strategy s) noexcept {
  return s == Strategy::one_vs_rest ? "one_vs_rest" : "power_set";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "one_vs_rest" || text == "one-vs-rest" || text == "ovr") return Strategy::one_vs_rest;
  if (text == "power_set" || text == "power-set" || text == "powerset") return Strategy::power_set;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

std::string make_variant_id(Strategy strategy, std::span<const LabelSet> interest_sets, Dichotomization mode,
                            const BackgroundLevels& background) {
  std::string sets;
  for (auto s : interest_sets) {
    if (!sets.empty()) sets += ';';
    sets += s.to_string();
  }
  return std::string(to_string(strategy)) + ":" + sets + ":" + std::string(to_string(mode)) + ":" +
         background.describe();
}

std::string LrSystem::variant_id() const {
  std::vector<LabelSet> sets;
  for (const auto& [s, c] : calibrators) sets.push_back(s);
  return make_variant_id(spec.strategy, sets, spec.mode, spec.background);
}

double LrSystem::log10_score(LabelSet interest, std::span<const double> features) const {
  if (spec.strategy == Strategy::one_vs_rest) {
    const auto it = binary.find(interest);
    if (it == binary.end()) throw std::invalid_argument("no model for interest set " + interest.to_string());
    return clip_log10_score(it->second.log10_score(features));
  }
  if (!powerset) throw std::logic_error("power-set system without a classifier");
  const double s = score_powerset(*powerset, features, interest);
  return s > 0.0 ? clip_log10_score(std::log10(s)) : kMinLog10Score;
}

LRValue LrSystem::lr(LabelSet interest, std::span<const double> features) const {
  const auto it = calibrators.find(interest);
  if (it == calibrators.end()) throw std::invalid_argument("no calibrator for interest set " + interest.to_string());
  return apply_calibrator_log10(it->second, log10_score(interest, features));
}

BinaryLogReg LrSystem::fused(LabelSet interest) const {
  if (spec.strategy != Strategy::one_vs_rest)
    throw std::invalid_argument("fused coefficients exist only for one-vs-rest systems");
  const auto m = binary.find(interest);
  const auto c = calibrators.find(interest);
  if (m == binary.end() || c == calibrators.end())
    throw std::invalid_argument("no model for interest set " + interest.to_string());
  return fuse_coefficients(c->second, m->second);
}

LrSystem fit_system(const MarkerPanel& panel, const AugmentedDataset& train, const AugmentedDataset& calibration,
                    const SystemSpec& spec) {
  if (spec.interest_sets.empty()) throw std::invalid_argument("no interest sets");
  LrSystem system;
  system.panel = panel;
  system.spec = spec;
  system.spec.training.standardize = spec.mode == Dichotomization::off;

  const Eigen::MatrixXd x_train = train.feature_matrix();
  if (spec.strategy == Strategy::power_set)
    system.powerset = train_powerset_logreg(x_train, train.labels(), system.spec.training);

  for (auto interest : spec.interest_sets) {
    if (interest.empty()) throw std::invalid_argument("empty interest set");
    if (spec.strategy == Strategy::one_vs_rest)
      system.binary.emplace(interest, train_binary_logreg(x_train, train.h1_flags(interest), system.spec.training));
    std::vector<double> scores;
    scores.reserve(calibration.samples.size());
    for (const auto& s : calibration.samples) scores.push_back(system.log10_score(interest, s.features));
    system.calibrators.emplace(interest, fit_calibrator(scores, calibration.h1_flags(interest), spec.calibration));
  }
  return system;
}

std::vector<LRValue> evaluate_system(const LrSystem& system, LabelSet interest, const AugmentedDataset& data) {
  std::vector<LRValue> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) out.push_back(system.lr(interest, s.features));
  return out;
}

AugmentedDataset augment_part(const DonorPool& pool, const BackgroundLevels& bg, std::size_t count,
                              Dichotomization mode, std::uint64_t seed) {
  if (bg.is_balanced())
    return build_augmented_dataset(pool, bg, {AugmentationPlan::Kind::per_combination, count}, mode, seed);
  return build_augmented_dataset(pool, bg, {AugmentationPlan::Kind::sampled, per_combination_size(bg, count)}, mode,
                                 seed);
}

TrainedSystem train_system(const Dataset& singles, const SystemSpec& spec, const TrainingRecipe& recipe) {
  SplitSpec split = recipe.split;
  split.seed = derive_seed(recipe.seed, {1});
  const auto parts = split_dataset(singles, split);
  const DonorPool train_pool(parts.train), calib_pool(parts.calibration), test_pool(parts.test);

  const auto train = augment_part(train_pool, spec.background, recipe.counts.train, spec.mode,
                                  derive_seed(recipe.seed, {2, 0}));
  const auto calib = augment_part(calib_pool, spec.background, recipe.counts.calibration, spec.mode,
                                  derive_seed(recipe.seed, {2, 1}));
  const auto test = augment_part(test_pool, spec.background, recipe.counts.test, spec.mode,
                                 derive_seed(recipe.seed, {2, 2}));

  TrainedSystem out{fit_system(singles.panel, train, calib, spec), {}};
  for (auto interest : spec.interest_sets)
    out.test_metrics.emplace(interest, evaluate_lrs(evaluate_system(out.system, interest, test), test.h1_flags(interest)));
  return out;
}

}  // namespace mixlr
