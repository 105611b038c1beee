#include "mixlr/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mixlr/error.hpp"
#include "mixlr/random.hpp"
#include "text_util.hpp"

namespace mixlr {

namespace {

constexpr std::array<std::string_view, kFluidCount> kFluidNames = {
    "blood",         "menstrual_secretion", "nasal_mucosa", "saliva",         "semen_fertile",
    "semen_sterile", "skin",                "skin_penile",  "vaginal_mucosa",
};

struct Alias {
  std::string_view name;
  BodyFluid fluid;
};

constexpr std::array<Alias, 5> kAliases = {{
    {"penile", BodyFluid::skin_penile},
    {"vaginal", BodyFluid::vaginal_mucosa},
    {"menstrual", BodyFluid::menstrual_secretion},
    {"nasal", BodyFluid::nasal_mucosa},
    {"skin_non_penile", BodyFluid::skin},
}};

}  // namespace

std::string_view to_string(BodyFluid f) noexcept { return kFluidNames[index_of(f)]; }

std::optional<BodyFluid> try_parse_fluid(std::string_view name) noexcept {
  name = detail::trim(name);
  for (std::size_t i = 0; i < kFluidCount; ++i)
    if (kFluidNames[i] == name) return kAllFluids[i];
  for (const auto& a : kAliases)
    if (a.name == name) return a.fluid;
  return std::nullopt;
}

BodyFluid parse_fluid(std::string_view name) {
  if (auto f = try_parse_fluid(name)) return *f;
  throw DataError("unknown body fluid '" + std::string(name) + "'");
}

std::vector<BodyFluid> LabelSet::fluids() const {
  std::vector<BodyFluid> out;
  for (auto f : kAllFluids)
    if (contains(f)) out.push_back(f);
  return out;
}

std::string LabelSet::to_string() const {
  if (empty()) return "none";
  std::string out;
  for (auto f : fluids()) {
    if (!out.empty()) out += '+';
    out += mixlr::to_string(f);
  }
  return out;
}

LabelSet LabelSet::parse(std::string_view text) {
  text = detail::trim(text);
  LabelSet out;
  if (text.empty() || text == "none") return out;
  const char sep = text.find(',') != std::string_view::npos ? ',' : '+';
  for (auto part : detail::split(text, sep)) {
    if (part.empty()) throw DataError("empty fluid name in '" + std::string(text) + "'");
    out.insert(parse_fluid(part));
  }
  return out;
}

MarkerPanel MarkerPanel::standard() {
  return MarkerPanel{
      {"HBB", "ALAS2", "CD93", "HTN3", "STATH", "BPIFA1", "MUC4", "MYOZ1", "CYP2B7P1", "MMP10", "MMP7",
       "MMP11", "SEMG1", "KLK3", "PRM1"},
      {"HK1", "HK2"},
      150.0,
  };
}

std::optional<std::size_t> MarkerPanel::index_of(std::string_view marker) const noexcept {
  for (std::size_t i = 0; i < markers.size(); ++i)
    if (markers[i] == marker) return i;
  return std::nullopt;
}

void MarkerPanel::validate() const {
  if (!(threshold_rfu > 0.0)) throw std::invalid_argument("panel threshold must be positive");
  std::set<std::string_view> seen;
  for (const auto& m : markers)
    if (!seen.insert(m).second) throw std::invalid_argument("duplicate marker '" + m + "'");
  for (const auto& m : housekeeping)
    if (!seen.insert(m).second) throw std::invalid_argument("duplicate marker '" + m + "'");
}

std::size_t Dataset::replicate_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.replicates.size();
  return n;
}

bool passes_housekeeping_filter(const Sample& sample) noexcept {
  if (sample.replicates.empty()) return false;
  const auto hk = sample.replicates.front().housekeeping_detected.size();
  if (hk == 0) return true;
  std::size_t amplified = 0;
  for (std::size_t j = 0; j < hk; ++j) {
    const bool any = std::any_of(sample.replicates.begin(), sample.replicates.end(),
                                 [j](const Replicate& r) { return j < r.housekeeping_detected.size() &&
                                                                  r.housekeeping_detected[j]; });
    if (any) ++amplified;
  }
  return 2 * amplified >= hk;
}

ParsedProfiles parse_profile_table(std::string_view csv, const MarkerPanel& panel) {
  panel.validate();
  const auto rows = detail::lines(csv);
  if (rows.empty()) throw ParseError(1, "", "empty profile table");

  const auto header = detail::split(rows.front().second, ',');
  const std::size_t header_row = rows.front().first;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t col_id = kNone, col_labels = kNone, col_rep = kNone;
  std::vector<std::size_t> col_marker(panel.markers.size(), kNone);
  std::vector<std::size_t> col_hk(panel.housekeeping.size(), kNone);

  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    if (name == "sample_id") {
      col_id = c;
    } else if (name == "fluid_labels") {
      col_labels = c;
    } else if (name == "replicate_id") {
      col_rep = c;
    } else if (auto m = panel.index_of(name)) {
      col_marker[*m] = c;
    } else {
      auto it = std::find(panel.housekeeping.begin(), panel.housekeeping.end(), name);
      if (it == panel.housekeeping.end())
        throw ParseError(header_row, std::string(name), "unknown marker column");
      col_hk[static_cast<std::size_t>(it - panel.housekeeping.begin())] = c;
    }
  }
  if (col_id == kNone) throw ParseError(header_row, "sample_id", "missing column");
  if (col_labels == kNone) throw ParseError(header_row, "fluid_labels", "missing column");
  if (col_rep == kNone) throw ParseError(header_row, "replicate_id", "missing column");
  for (std::size_t m = 0; m < col_marker.size(); ++m)
    if (col_marker[m] == kNone) throw ParseError(header_row, panel.markers[m], "missing marker column");
  for (std::size_t h = 0; h < col_hk.size(); ++h)
    if (col_hk[h] == kNone) throw ParseError(header_row, panel.housekeeping[h], "missing housekeeping column");

  struct Pending {
    Sample sample;
    std::size_t first_row;
  };
  std::vector<Pending> pending;
  std::unordered_map<std::string, std::size_t> by_id;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto [row_no, line] = rows[r];
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size())
      throw ParseError(row_no, "", "expected " + std::to_string(header.size()) + " fields, got " +
                                       std::to_string(fields.size()));

    const std::string id(fields[col_id]);
    if (id.empty()) throw ParseError(row_no, "sample_id", "empty sample id");
    LabelSet labels;
    try {
      labels = LabelSet::parse(fields[col_labels]);
    } catch (const DataError& e) {
      throw ParseError(row_no, "fluid_labels", e.what());
    }

    Replicate rep;
    rep.rfu.resize(panel.markers.size());
    for (std::size_t m = 0; m < col_marker.size(); ++m) {
      const auto v = detail::parse_double(fields[col_marker[m]]);
      if (!v || !std::isfinite(*v))
        throw ParseError(row_no, panel.markers[m], "non-numeric rfu '" + std::string(fields[col_marker[m]]) + "'");
      if (*v < 0.0) throw ParseError(row_no, panel.markers[m], "negative rfu");
      rep.rfu[m] = *v;
    }
    rep.housekeeping_detected.resize(panel.housekeeping.size());
    for (std::size_t h = 0; h < col_hk.size(); ++h) {
      const auto v = detail::parse_int(fields[col_hk[h]]);
      if (!v || (*v != 0 && *v != 1))
        throw ParseError(row_no, panel.housekeeping[h], "housekeeping flag must be 0 or 1");
      rep.housekeeping_detected[h] = *v == 1;
    }

    auto [it, inserted] = by_id.try_emplace(id, pending.size());
    if (inserted) pending.push_back({Sample{id, labels, {}}, row_no});
    auto& target = pending[it->second];
    if (target.sample.labels != labels)
      throw ParseError(row_no, "fluid_labels", "sample '" + id + "' has inconsistent labels");
    target.sample.replicates.push_back(std::move(rep));
  }

  ParsedProfiles out;
  out.dataset.panel = panel;
  out.report.rows = rows.size() - 1;
  for (auto& p : pending) {
    const auto n = p.sample.replicates.size();
    if (n < 2 || n > 4)
      throw ParseError(p.first_row, "replicate_id",
                       "sample '" + p.sample.id + "' has " + std::to_string(n) + " replicates (expected 2-4)");
    if (passes_housekeeping_filter(p.sample)) {
      out.dataset.samples.push_back(std::move(p.sample));
    } else {
      out.report.excluded_ids.push_back(p.sample.id);
    }
  }
  out.report.samples_loaded = out.dataset.samples.size();
  return out;
}

std::string write_profile_table(const Dataset& dataset) {
  std::ostringstream out;
  out << "sample_id,fluid_labels,replicate_id";
  for (const auto& m : dataset.panel.markers) out << ',' << m;
  for (const auto& h : dataset.panel.housekeeping) out << ',' << h;
  out << '\n';
  for (const auto& s : dataset.samples) {
    for (std::size_t r = 0; r < s.replicates.size(); ++r) {
      const auto& rep = s.replicates[r];
      out << s.id << ',' << s.labels.to_string() << ',' << (r + 1);
      for (double v : rep.rfu) out << ',' << detail::format_double(v);
      for (bool b : rep.housekeeping_detected) out << ',' << (b ? 1 : 0);
      out << '\n';
    }
  }
  return out.str();
}

std::vector<std::uint8_t> dichotomize(const Replicate& rep, double threshold_rfu) {
  std::vector<std::uint8_t> out(rep.rfu.size());
  for (std::size_t i = 0; i < rep.rfu.size(); ++i) out[i] = rep.rfu[i] >= threshold_rfu ? 1 : 0;
  return out;
}

std::vector<double> replicate_fractions(std::span<const Replicate> reps, double threshold_rfu) {
  if (reps.empty()) throw std::invalid_argument("replicate_fractions: no replicates");
  std::vector<double> out(reps.front().rfu.size(), 0.0);
  for (const auto& rep : reps) {
    if (rep.rfu.size() != out.size()) throw std::invalid_argument("replicate_fractions: panel size mismatch");
    for (std::size_t i = 0; i < out.size(); ++i)
      if (rep.rfu[i] >= threshold_rfu) out[i] += 1.0;
  }
  for (auto& v : out) v /= static_cast<double>(reps.size());
  return out;
}

RateTable detection_rates(const Dataset& dataset) {
  if (dataset.samples.empty()) throw DataError("detection_rates: empty dataset");
  std::map<BodyFluid, std::pair<std::vector<double>, std::size_t>> acc;
  const auto p = dataset.panel.size();
  for (const auto& s : dataset.samples) {
    if (!s.is_single()) continue;
    auto& [counts, total] = acc[s.labels.fluids().front()];
    counts.resize(p, 0.0);
    for (const auto& rep : s.replicates) {
      for (std::size_t i = 0; i < p; ++i)
        if (rep.rfu[i] >= dataset.panel.threshold_rfu) counts[i] += 1.0;
      ++total;
    }
  }
  RateTable out;
  for (auto& [fluid, entry] : acc) {
    auto& [counts, total] = entry;
    for (auto& c : counts) c /= static_cast<double>(total);
    out.emplace(fluid, std::move(counts));
  }
  return out;
}

RateTable reference_detection_rates() {
  using F = BodyFluid;
  return {
      {F::blood, {1.000, 0.960, 0.579, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.032, 0.000, 0.000, 0.000}},
      {F::menstrual_secretion,
       {1.000, 0.496, 0.451, 0.000, 0.009, 0.000, 0.566, 0.531, 0.310, 0.319, 0.381, 0.558, 0.000, 0.000, 0.000}},
      {F::nasal_mucosa,
       {0.008, 0.000, 0.440, 0.008, 0.976, 0.504, 0.616, 0.016, 0.016, 0.000, 0.008, 0.024, 0.024, 0.000, 0.000}},
      {F::saliva, {0.165, 0.010, 0.029, 0.913, 0.903, 0.019, 0.010, 0.019, 0.010, 0.000, 0.010, 0.000, 0.000, 0.000, 0.000}},
      {F::semen_fertile,
       {0.011, 0.011, 0.000, 0.000, 0.000, 0.011, 0.011, 0.000, 0.000, 0.000, 0.000, 0.000, 0.832, 0.789, 0.958}},
      {F::semen_sterile,
       {0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.000, 0.036, 0.929, 0.750, 0.000}},
      {F::skin, {0.264, 0.014, 0.111, 0.000, 0.083, 0.028, 0.194, 0.056, 0.000, 0.000, 0.028, 0.000, 0.000, 0.000, 0.000}},
      {F::skin_penile,
       {0.146, 0.000, 0.042, 0.000, 0.000, 0.000, 0.333, 0.021, 0.000, 0.021, 0.021, 0.042, 0.000, 0.000, 0.104}},
      {F::vaginal_mucosa,
       {0.009, 0.000, 0.157, 0.000, 0.000, 0.000, 0.922, 0.722, 0.557, 0.000, 0.043, 0.009, 0.000, 0.000, 0.000}},
  };
}

RateTable parse_rate_table(std::string_view csv, const MarkerPanel& panel) {
  const auto rows = detail::lines(csv);
  if (rows.empty()) throw ParseError(1, "", "empty rate table");
  const auto header = detail::split(rows.front().second, ',');
  if (header.empty() || header.front() != "fluid") throw ParseError(rows.front().first, "fluid", "missing column");
  std::vector<std::size_t> marker_of_col(header.size(), 0);
  std::vector<bool> seen(panel.size(), false);
  for (std::size_t c = 1; c < header.size(); ++c) {
    auto m = panel.index_of(header[c]);
    if (!m) throw ParseError(rows.front().first, std::string(header[c]), "unknown marker column");
    marker_of_col[c] = *m;
    seen[*m] = true;
  }
  for (std::size_t m = 0; m < panel.size(); ++m)
    if (!seen[m]) throw ParseError(rows.front().first, panel.markers[m], "missing marker column");

  RateTable out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto [row_no, line] = rows[r];
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size()) throw ParseError(row_no, "", "wrong field count");
    auto fluid = try_parse_fluid(fields[0]);
    if (!fluid) throw ParseError(row_no, "fluid", "unknown body fluid '" + std::string(fields[0]) + "'");
    std::vector<double> rates(panel.size(), 0.0);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      auto v = detail::parse_double(fields[c]);
      if (!v || *v < 0.0 || *v > 1.0)
        throw ParseError(row_no, std::string(header[c]), "rate must be a number in [0, 1]");
      rates[marker_of_col[c]] = *v;
    }
    if (!out.emplace(*fluid, std::move(rates)).second)
      throw ParseError(row_no, "fluid", "duplicate fluid row");
  }
  return out;
}

std::string write_rate_table(const RateTable& rates, const MarkerPanel& panel) {
  std::ostringstream out;
  out << "fluid";
  for (const auto& m : panel.markers) out << ',' << m;
  out << '\n';
  for (const auto& [fluid, row] : rates) {
    out << to_string(fluid);
    for (double v : row) out << ',' << detail::format_double(v);
    out << '\n';
  }
  return out.str();
}

Dataset synthesize_dataset(const RateTable& rates, const MarkerPanel& panel, const SynthesisOptions& options) {
  panel.validate();
  if (options.max_rfu < panel.threshold_rfu) throw std::invalid_argument("max_rfu below detection threshold");
  for (const auto& [fluid, row] : rates) {
    if (row.size() != panel.size())
      throw DataError("rate row for " + std::string(to_string(fluid)) + " does not match the panel");
    for (double r : row)
      if (!(r >= 0.0 && r <= 1.0))
        throw DataError("rate for " + std::string(to_string(fluid)) + " outside [0, 1]");
  }

  const double log_lo = std::log(panel.threshold_rfu);
  const double log_hi = std::log(options.max_rfu);
  const double below_hi = std::max(0.0, panel.threshold_rfu - 1.0);

  Dataset out;
  out.panel = panel;
  for (const auto& [fluid, row] : rates) {
    for (std::size_t n = 0; n < options.n_per_fluid; ++n) {
      Rng rng(derive_seed(options.seed, {index_of(fluid), n}));
      Sample s;
      s.id = std::string(to_string(fluid)) + "_" + std::to_string(n + 1);
      s.labels.insert(fluid);
      for (std::size_t r = 0; r < options.reps_per_sample; ++r) {
        Replicate rep;
        rep.rfu.resize(panel.size());
        for (std::size_t m = 0; m < panel.size(); ++m) {
          rep.rfu[m] = rng.bernoulli(row[m])
                           ? std::max(panel.threshold_rfu, std::exp(rng.uniform(log_lo, log_hi)))
                           : rng.uniform(0.0, below_hi);
        }
        rep.housekeeping_detected.assign(panel.housekeeping.size(), true);
        s.replicates.push_back(std::move(rep));
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace mixlr
