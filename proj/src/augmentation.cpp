#include "mixlr/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include "json.hpp"
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mixlr/error.hpp"
#include "text_util.hpp"

namespace mixlr {

BackgroundLevels::BackgroundLevels() {
  levels_.fill(0.5);
  levels_[index_of(BodyFluid::skin_penile)] = 0.0;
}

BackgroundLevels BackgroundLevels::uniform(double p) {
  BackgroundLevels bg;
  for (auto f : kAllFluids) bg.set(f, p);
  return bg;
}

void BackgroundLevels::set(BodyFluid f, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("background level for " + std::string(to_string(f)) + " outside [0, 1]");
  levels_[index_of(f)] = p;
}

LabelSet BackgroundLevels::always_present() const noexcept {
  LabelSet s;
  for (auto f : kAllFluids)
    if ((*this)[f] == 1.0) s.insert(f);
  return s;
}

LabelSet BackgroundLevels::never_present() const noexcept {
  LabelSet s;
  for (auto f : kAllFluids)
    if ((*this)[f] == 0.0) s.insert(f);
  return s;
}

LabelSet BackgroundLevels::free_fluids() const noexcept {
  return LabelSet::all() - always_present() - never_present();
}

bool BackgroundLevels::is_balanced() const noexcept {
  for (auto f : free_fluids().fluids())
    if ((*this)[f] != 0.5) return false;
  return true;
}

std::string BackgroundLevels::describe() const {
  const BackgroundLevels defaults;
  std::string out;
  for (auto f : kAllFluids) {
    if ((*this)[f] == defaults[f]) continue;
    if (!out.empty()) out += ',';
    out += std::string(to_string(f)) + "=" + detail::format_double((*this)[f]);
  }
  return out.empty() ? "default" : out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && calibration > 0.0 && test > 0.0))
    throw std::invalid_argument("split fractions must be positive");
  if (std::abs(train + calibration + test - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
}

namespace {

// Largest-remainder allocation of n items over the fractions, with at least
// one item per part (n >= parts).
std::array<std::size_t, 3> allocate(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  for (std::size_t i = 0; i < 3; ++i) {
    if (counts[i] > 0) continue;
    auto largest = std::max_element(counts.begin(), counts.end());
    --*largest;
    counts[i] = 1;
  }
  return counts;
}

}  // namespace

DatasetSplit split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  std::map<LabelSet, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) strata[dataset.samples[i].labels].push_back(i);

  std::vector<int> part(dataset.samples.size(), -1);
  for (auto& [labels, idx] : strata) {
    if (idx.size() < 3)
      throw DataError("cannot split " + labels.to_string() + ": " + std::to_string(idx.size()) +
                      " samples (need at least 3)");
    Rng rng(derive_seed(spec.seed, {labels.bits()}));
    rng.shuffle(std::span<std::size_t>(idx));
    const auto counts = allocate(idx.size(), {spec.train, spec.calibration, spec.test});
    std::size_t k = 0;
    for (int p = 0; p < 3; ++p)
      for (std::size_t c = 0; c < counts[static_cast<std::size_t>(p)]; ++c) part[idx[k++]] = p;
  }

  DatasetSplit out{{dataset.panel, {}}, {dataset.panel, {}}, {dataset.panel, {}}};
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    Dataset* target = part[i] == 0 ? &out.train : part[i] == 1 ? &out.calibration : &out.test;
    target->samples.push_back(dataset.samples[i]);
  }
  return out;
}

std::string_view to_string(Dichotomization d) noexcept {
  switch (d) {
    case Dichotomization::off:
      return "off";
    case Dichotomization::per_replicate:
      return "per_replicate";
    case Dichotomization::after_mean:
      return "after_mean";
  }
  return "off";
}

Dichotomization parse_dichotomization(std::string_view text) {
  if (text == "off" || text == "false" || text == "raw") return Dichotomization::off;
  if (text == "on" || text == "true" || text == "per_replicate") return Dichotomization::per_replicate;
  if (text == "after_mean") return Dichotomization::after_mean;
  throw ConfigError("unknown dichotomization mode '" + std::string(text) + "'");
}

void HypothesisPair::validate() const {
  if (interest.empty()) throw std::invalid_argument("hypothesis pair needs at least one fluid of interest");
  if (interest.intersects(fixed_absent))
    throw std::invalid_argument("fluids of interest cannot be fixed absent");
  if (fixed_present.intersects(fixed_absent))
    throw std::invalid_argument("a fluid cannot be both fixed present and fixed absent");
}

BackgroundLevels HypothesisPair::apply(BackgroundLevels bg) const {
  for (auto f : fixed_present.fluids()) bg.set(f, 1.0);
  for (auto f : fixed_absent.fluids()) bg.set(f, 0.0);
  return bg;
}

LabelSet mix_labels(const BackgroundLevels& bg_in, Rng& rng, const HypothesisPair* hp, Branch branch) {
  const BackgroundLevels bg = hp ? hp->apply(bg_in) : bg_in;
  const LabelSet interest = hp ? hp->interest : LabelSet{};
  if (branch != Branch::none && !hp) throw std::invalid_argument("branch conditioning needs a hypothesis pair");

  if (branch == Branch::h1) {
    bool possible = false;
    for (auto f : interest.fluids()) possible = possible || bg[f] > 0.0;
    if (!possible) throw DataError("cannot condition on H1: every fluid of interest has background 0");
  } else if (branch == Branch::h2) {
    for (auto f : interest.fluids())
      if (bg[f] == 1.0) throw DataError("cannot condition on H2: " + std::string(to_string(f)) + " is always present");
  }

  // Under H1 the interest fluids are drawn sequentially from their joint
  // distribution given that at least one is present; this is the same law
  // as redrawing until the condition holds.
  double none_after = 1.0;
  std::array<double, kFluidCount> none_from{};
  for (std::size_t i = kFluidCount; i-- > 0;) {
    const auto f = kAllFluids[i];
    if (interest.contains(f)) none_after *= 1.0 - bg[f];
    none_from[i] = none_after;
  }

  LabelSet out;
  bool have_interest = false;
  for (std::size_t i = 0; i < kFluidCount; ++i) {
    const auto f = kAllFluids[i];
    double p = bg[f];
    if (interest.contains(f)) {
      if (branch == Branch::h2) {
        p = 0.0;
      } else if (branch == Branch::h1 && !have_interest) {
        p = p / (1.0 - none_from[i]);
      }
    }
    if (p >= 1.0 || rng.bernoulli(p)) {
      out.insert(f);
      if (interest.contains(f)) have_interest = true;
    }
  }
  return out;
}

AugmentedSample combine_donors(std::span<const std::vector<Replicate>> donors, std::size_t markers,
                               Dichotomization mode, double threshold_rfu) {
  AugmentedSample out;
  out.features.assign(markers, 0.0);
  if (donors.empty()) return out;

  std::size_t m = donors.front().size();
  for (const auto& d : donors) m = std::min(m, d.size());
  if (m == 0) throw DataError("donor without replicates");
  out.replicate_count = m;

  std::vector<double> peak(markers);
  for (std::size_t j = 0; j < m; ++j) {
    std::fill(peak.begin(), peak.end(), 0.0);
    for (const auto& d : donors) {
      const auto& rfu = d[j].rfu;
      if (rfu.size() != markers) throw DataError("donor replicate does not match the panel");
      for (std::size_t i = 0; i < markers; ++i) peak[i] = std::max(peak[i], rfu[i]);
    }
    for (std::size_t i = 0; i < markers; ++i) {
      if (mode == Dichotomization::per_replicate) {
        out.features[i] += peak[i] >= threshold_rfu ? 1.0 : 0.0;
      } else {
        out.features[i] += peak[i];
      }
    }
  }
  for (auto& v : out.features) {
    v /= static_cast<double>(m);
    if (mode == Dichotomization::after_mean) v = v >= threshold_rfu ? 1.0 : 0.0;
  }
  return out;
}

DonorPool::DonorPool(const Dataset& singles) : panel_(singles.panel) {
  for (const auto& s : singles.samples) {
    if (!s.is_single()) continue;
    by_fluid_[index_of(s.labels.fluids().front())].push_back(s);
  }
}

AugmentedSample augment_mixture(const DonorPool& pool, LabelSet labels, Dichotomization mode, Rng& rng) {
  std::vector<std::vector<Replicate>> chosen;
  std::vector<std::string> ids;
  for (auto f : labels.fluids()) {
    const auto donors = pool.donors(f);
    if (donors.empty()) throw DataError("no single-source donor for " + std::string(to_string(f)));
    const auto& donor = donors[static_cast<std::size_t>(rng.below(donors.size()))];
    auto reps = donor.replicates;
    rng.shuffle(std::span<Replicate>(reps));
    chosen.push_back(std::move(reps));
    ids.push_back(donor.id);
  }
  auto out = combine_donors(chosen, pool.panel().size(), mode, pool.panel().threshold_rfu);
  out.labels = labels;
  out.donors = std::move(ids);
  return out;
}

Eigen::MatrixXd AugmentedDataset::feature_matrix() const {
  const auto p = samples.empty() ? 0 : samples.front().features.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < p; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].features[j];
  return x;
}

std::vector<LabelSet> AugmentedDataset::labels() const {
  std::vector<LabelSet> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels);
  return out;
}

std::vector<bool> AugmentedDataset::h1_flags(LabelSet interest) const {
  std::vector<bool> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels.intersects(interest));
  return out;
}

std::size_t per_combination_size(const BackgroundLevels& bg, std::size_t count) {
  return (std::size_t{1} << bg.free_fluids().size()) * count;
}

AugmentedDataset build_augmented_dataset(const DonorPool& pool, const BackgroundLevels& bg,
                                         const AugmentationPlan& plan, Dichotomization mode,
                                         std::uint64_t seed) {
  AugmentedDataset out;
  out.background = bg;
  out.mode = mode;
  out.seed = seed;

  if (plan.kind == AugmentationPlan::Kind::per_combination) {
    if (!bg.is_balanced())
      throw std::invalid_argument("per-combination augmentation needs background 0.5 for every free fluid");
    const auto free = bg.free_fluids().fluids();
    const LabelSet forced = bg.always_present();
    const std::size_t combos = std::size_t{1} << free.size();
    out.samples.reserve(combos * plan.count);
    std::size_t index = 0;
    for (std::size_t mask = 0; mask < combos; ++mask) {
      LabelSet labels = forced;
      for (std::size_t b = 0; b < free.size(); ++b)
        if ((mask >> b) & 1U) labels.insert(free[b]);
      for (std::size_t c = 0; c < plan.count; ++c, ++index) {
        Rng rng(derive_seed(seed, {index}));
        out.samples.push_back(augment_mixture(pool, labels, mode, rng));
      }
    }
  } else {
    out.samples.reserve(plan.count);
    for (std::size_t index = 0; index < plan.count; ++index) {
      Rng rng(derive_seed(seed, {index}));
      const auto labels = mix_labels(bg, rng);
      out.samples.push_back(augment_mixture(pool, labels, mode, rng));
    }
  }
  return out;
}

std::string write_augmented_csv(const AugmentedDataset& ds, const MarkerPanel& panel) {
  std::ostringstream out;
  out << "sample_id,fluid_labels,replicate_id";
  for (const auto& m : panel.markers) out << ',' << m;
  for (const auto& h : panel.housekeeping) out << ',' << h;
  out << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    out << "aug_" << (i + 1) << ',' << s.labels.to_string() << ",agg";
    for (double v : s.features) out << ',' << detail::format_double(v);
    for (std::size_t h = 0; h < panel.housekeeping.size(); ++h) out << ",1";
    out << '\n';
  }
  return out.str();
}

std::string augmented_metadata_json(const AugmentedDataset& ds) {
  nlohmann::ordered_json bg = nlohmann::ordered_json::object();
  for (auto f : kAllFluids) bg[std::string(to_string(f))] = ds.background[f];
  nlohmann::ordered_json j;
  j["seed"] = ds.seed;
  j["dichotomization"] = std::string(to_string(ds.mode));
  j["background"] = bg;
  j["samples"] = ds.samples.size();
  return j.dump(2) + "\n";
}

}  // namespace mixlr
