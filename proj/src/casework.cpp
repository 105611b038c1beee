#include "mixlr/casework.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mixlr/error.hpp"
#include "mixlr/serialization.hpp"

namespace mixlr {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string lr_text(double lr) {
  char buf[32];
  if (lr >= 1.0)
    std::snprintf(buf, sizeof buf, "%.3g", lr);
  else
    std::snprintf(buf, sizeof buf, "1/%.3g", 1.0 / lr);
  return buf;
}

}  // namespace

CaseObservation::CaseObservation(MarkerPanel panel, std::vector<MarkerCount> counts)
    : panel_(std::move(panel)), counts_(std::move(counts)) {
  if (counts_.size() != panel_.size())
    throw DataError("case has " + std::to_string(counts_.size()) + " markers, panel has " +
                    std::to_string(panel_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const auto& c = counts_[i];
    const auto& name = panel_.markers[i];
    if (c.total < 1 || c.total > 4) throw DataError(name + ": replicate total must be between 1 and 4");
    if (c.detected < 0 || c.detected > c.total) throw DataError(name + ": detected count outside 0.." +
                                                                std::to_string(c.total));
    if (c.total != counts_.front().total) throw DataError(name + ": replicate totals differ between markers");
  }
}

CaseObservation CaseObservation::from_replicates(const MarkerPanel& panel, std::span<const Replicate> reps) {
  std::vector<MarkerCount> counts(panel.size(), MarkerCount{0, static_cast<int>(reps.size())});
  for (const auto& r : reps) {
    if (r.rfu.size() != panel.size()) throw DataError("replicate width does not match the panel");
    for (std::size_t i = 0; i < panel.size(); ++i)
      if (r.rfu[i] >= panel.threshold_rfu) ++counts[i].detected;
  }
  return CaseObservation(panel, std::move(counts));
}

std::vector<double> CaseObservation::fractions() const {
  std::vector<double> out;
  out.reserve(counts_.size());
  for (const auto& c : counts_) out.push_back(static_cast<double>(c.detected) / c.total);
  return out;
}

MarkerFluidMap MarkerFluidMap::defaults() {
  MarkerFluidMap m;
  m.markers[BodyFluid::blood] = {"HBB", "ALAS2", "CD93"};
  m.markers[BodyFluid::saliva] = {"HTN3", "STATH"};
  m.markers[BodyFluid::nasal_mucosa] = {"BPIFA1"};
  m.markers[BodyFluid::vaginal_mucosa] = {"MUC4", "MYOZ1", "CYP2B7P1"};
  m.markers[BodyFluid::menstrual_secretion] = {"MMP10", "MMP7", "MMP11"};
  m.markers[BodyFluid::semen_fertile] = {"SEMG1", "KLK3", "PRM1"};
  m.markers[BodyFluid::semen_sterile] = {"SEMG1", "KLK3", "PRM1"};
  return m;
}

std::span<const std::string> MarkerFluidMap::for_fluid(BodyFluid f) const noexcept {
  const auto it = markers.find(f);
  if (it == markers.end()) return {};
  return it->second;
}

std::string_view to_string(NOverTwoVerdict v) noexcept {
  switch (v) {
    case NOverTwoVerdict::indication: return "indication";
    case NOverTwoVerdict::no_reliable_statement: return "no_reliable_statement";
    case NOverTwoVerdict::no_indication: return "no_indication";
  }
  return "?";
}

NOverTwoResult n_over_2(const CaseObservation& obs, LabelSet fluids, const MarkerFluidMap& map) {
  if (fluids.empty()) throw std::invalid_argument("n/2 needs at least one fluid");
  std::vector<std::size_t> idx;
  for (auto f : fluids.fluids()) {
    const auto names = map.for_fluid(f);
    if (names.empty()) throw DataError("n/2 undefined for this fluid: " + std::string(to_string(f)));
    for (const auto& name : names) {
      const auto i = obs.panel().index_of(name);
      if (!i) throw DataError("indicative marker '" + name + "' is not on the panel");
      if (std::find(idx.begin(), idx.end(), *i) == idx.end()) idx.push_back(*i);
    }
  }
  int x = 0;
  for (auto i : idx) x += obs.counts()[i].detected;
  const int n = static_cast<int>(idx.size()) * obs.replicate_total();
  NOverTwoVerdict v = NOverTwoVerdict::no_reliable_statement;
  if (2 * x >= n)
    v = NOverTwoVerdict::indication;
  else if (x == 0)
    v = NOverTwoVerdict::no_indication;
  return {v, x, n};
}

std::string CaseReport::to_text() const {
  std::string out = "variant: " + variant_id + "\n";
  out += "H1: at least one of " + hypotheses.interest.to_string() + " present\n";
  out += "H2: none of " + hypotheses.interest.to_string() + " present\n";
  if (!hypotheses.fixed_present.empty()) out += "agreed present: " + hypotheses.fixed_present.to_string() + "\n";
  if (!hypotheses.fixed_absent.empty()) out += "agreed absent: " + hypotheses.fixed_absent.to_string() + "\n";
  out += "background: " + background.describe() + "\n\n";

  out += "log10 LR = " + fixed2(intercept);
  for (const auto& c : contributions) {
    if (c.coefficient == 0.0) continue;
    out += (c.coefficient < 0 ? " - " : " + ") + fixed2(std::abs(c.coefficient)) + " * " +
           std::to_string(c.count.detected) + "/" + std::to_string(c.count.total);
  }
  out += " = " + fixed2(log10_lr) + "\n";
  out += "LR = " + lr_text(std::pow(10.0, log10_lr)) + ", capped at " + fixed2(cap) + ": " + lr_text(capped_lr) + "\n";
  out += "conclusion: " + verbal.describe() + "\n";

  out += "\nmarker contributions:\n";
  for (const auto& c : contributions) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-9s %+.2f * %d/%d = %+.3f\n", c.marker.c_str(), c.coefficient,
                  c.count.detected, c.count.total, c.contribution);
    out += line;
  }
  out += "\nn/2 rule:\n";
  for (const auto& v : n_over_2_per_fluid) {
    out += "  " + std::string(to_string(v.fluid)) + ": ";
    out += v.result ? std::string(to_string(v.result->verdict)) + " (" + std::to_string(v.result->x) + " of " +
                          std::to_string(v.result->n) + ")"
                    : std::string("undefined");
    out += "\n";
  }
  if (n_over_2_combined)
    out += "  combined: " + std::string(to_string(n_over_2_combined->verdict)) + " (" +
           std::to_string(n_over_2_combined->x) + " of " + std::to_string(n_over_2_combined->n) + ")\n";
  return out;
}

CaseReport evaluate_case(const LrSystem& system, const CaseObservation& obs, const HypothesisPair& hp,
                         const CaseOptions& options) {
  hp.validate();
  if (!(obs.panel() == system.panel)) throw DataError("case panel differs from the model's panel");
  if (system.spec.strategy != Strategy::one_vs_rest)
    throw std::invalid_argument("casework needs a one-vs-rest system");
  if (system.spec.mode != Dichotomization::per_replicate)
    throw std::invalid_argument("casework needs a system trained on per-replicate detection fractions");
  if (!system.supports(hp.interest))
    throw std::invalid_argument("model " + system.variant_id() + " has no calibrator for " + hp.interest.to_string());
  for (auto f : hp.fixed_present.fluids())
    if (system.spec.background[f] != 1.0)
      throw std::invalid_argument(std::string(to_string(f)) + " is agreed present but the model's background is not 1");
  for (auto f : hp.fixed_absent.fluids())
    if (system.spec.background[f] != 0.0)
      throw std::invalid_argument(std::string(to_string(f)) + " is agreed absent but the model's background is not 0");

  const BinaryLogReg model = system.fused(hp.interest);
  CaseReport r;
  r.variant_id = system.variant_id();
  r.hypotheses = hp;
  r.background = system.spec.background;
  r.intercept = model.intercept;
  r.cap = options.cap;

  double total = model.intercept;
  for (std::size_t i = 0; i < obs.panel().size(); ++i) {
    Contribution c;
    c.marker = obs.panel().markers[i];
    c.coefficient = model.coefficients[i];
    c.count = obs.counts()[i];
    c.value = static_cast<double>(c.count.detected) / c.count.total;
    c.contribution = c.coefficient * c.value;
    total += c.contribution;
    r.contributions.push_back(std::move(c));
  }
  if (!std::isfinite(total)) throw NumericError("log10 LR is not finite");
  r.log10_lr = total;
  const LRValue capped = cap_lr(LRValue::from_log10(total), options.cap);
  r.capped_lr = capped.lr();
  r.verbal = verbal_scale(capped);

  bool all_defined = true;
  for (auto f : hp.interest.fluids()) {
    FluidVerdict v{f, std::nullopt};
    if (!options.marker_map.for_fluid(f).empty())
      v.result = n_over_2(obs, LabelSet{f}, options.marker_map);
    else
      all_defined = false;
    r.n_over_2_per_fluid.push_back(v);
  }
  if (all_defined) r.n_over_2_combined = n_over_2(obs, hp.interest, options.marker_map);
  return r;
}

std::unique_ptr<ModelStore> ModelStore::load_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("model directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  auto store = std::make_unique<ModelStore>();
  for (const auto& p : files) store->insert(io::load_model_file(p.string()));
  return store;
}

void ModelStore::insert(LrSystem system) {
  auto id = system.variant_id();
  auto ptr = std::make_shared<const LrSystem>(std::move(system));
  std::unique_lock lock(mutex_);
  variants_.insert_or_assign(std::move(id), std::move(ptr));
}

std::shared_ptr<const LrSystem> ModelStore::find(const std::string& variant_id) const {
  std::shared_lock lock(mutex_);
  const auto it = variants_.find(variant_id);
  return it == variants_.end() ? nullptr : it->second;
}

std::shared_ptr<const LrSystem> ModelStore::find(LabelSet interest, const BackgroundLevels& background,
                                                 Dichotomization mode) const {
  std::shared_lock lock(mutex_);
  for (const auto& [id, s] : variants_)
    if (s->spec.strategy == Strategy::one_vs_rest && s->spec.mode == mode && s->spec.background == background &&
        s->supports(interest))
      return s;
  return nullptr;
}

std::vector<std::shared_ptr<const LrSystem>> ModelStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const LrSystem>> out;
  for (const auto& [id, s] : variants_) out.push_back(s);
  return out;
}

std::vector<std::string> ModelStore::variant_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : variants_) out.push_back(id);
  return out;
}

void ModelStore::enable_training(TrainingSource source) {
  std::unique_lock lock(mutex_);
  training_ = std::move(source);
}

bool ModelStore::training_enabled() const {
  std::shared_lock lock(mutex_);
  return training_.has_value();
}

std::shared_ptr<const LrSystem> ModelStore::obtain(LabelSet interest, const BackgroundLevels& background,
                                                   Dichotomization mode) {
  if (auto s = find(interest, background, mode)) return s;
  if (!training_enabled())
    throw VariantNotFound("no model for " + interest.to_string() + " under background " + background.describe(),
                          variant_ids());
  std::lock_guard train_lock(train_mutex_);
  // Another request may have trained it while we waited.
  if (auto s = find(interest, background, mode)) return s;
  TrainingSource source;
  {
    std::shared_lock lock(mutex_);
    source = *training_;
  }
  SystemSpec spec;
  spec.strategy = Strategy::one_vs_rest;
  spec.mode = mode;
  spec.background = background;
  spec.interest_sets = {interest};
  spec.training = source.training;
  auto trained = train_system(source.singles, spec, source.recipe);
  insert(std::move(trained.system));
  return find(interest, background, mode);
}

CaseReport what_if(ModelStore& store, const CaseObservation& obs, const HypothesisPair& hp,
                   const BackgroundLevels& background, const CaseOptions& options) {
  const auto system = store.obtain(hp.interest, hp.apply(background));
  return evaluate_case(*system, obs, hp, options);
}

}  // namespace mixlr
