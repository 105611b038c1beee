#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixlr {

enum class BodyFluid : std::uint8_t {
  blood,
  menstrual_secretion,
  nasal_mucosa,
  saliva,
  semen_fertile,
  semen_sterile,
  skin,
  skin_penile,
  vaginal_mucosa,
};

inline constexpr std::size_t kFluidCount = 9;

inline constexpr std::array<BodyFluid, kFluidCount> kAllFluids = {
    BodyFluid::blood,         BodyFluid::menstrual_secretion, BodyFluid::nasal_mucosa,
    BodyFluid::saliva,        BodyFluid::semen_fertile,       BodyFluid::semen_sterile,
    BodyFluid::skin,          BodyFluid::skin_penile,         BodyFluid::vaginal_mucosa,
};

constexpr std::size_t index_of(BodyFluid f) noexcept { return static_cast<std::size_t>(f); }

std::string_view to_string(BodyFluid f) noexcept;

// Accepts the canonical names plus a few short aliases ("penile", "vaginal",
// "menstrual", "nasal"). Throws DataError on anything else.
BodyFluid parse_fluid(std::string_view name);
std::optional<BodyFluid> try_parse_fluid(std::string_view name) noexcept;

// A set of body fluids, stored as a bitmask in BodyFluid ordinal order.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<BodyFluid> fluids) {
    for (auto f : fluids) insert(f);
  }

  static constexpr LabelSet from_bits(std::uint16_t bits) {
    LabelSet s;
    s.bits_ = static_cast<std::uint16_t>(bits & kAllBits);
    return s;
  }
  static constexpr LabelSet all() { return from_bits(kAllBits); }

  constexpr std::uint16_t bits() const noexcept { return bits_; }
  constexpr bool contains(BodyFluid f) const noexcept { return (bits_ >> index_of(f)) & 1U; }
  constexpr void insert(BodyFluid f) noexcept { bits_ |= static_cast<std::uint16_t>(1U << index_of(f)); }
  constexpr void erase(BodyFluid f) noexcept { bits_ &= static_cast<std::uint16_t>(~(1U << index_of(f))); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::size_t size() const noexcept {
    std::size_t n = 0;
    for (auto b = bits_; b; b &= static_cast<std::uint16_t>(b - 1)) ++n;
    return n;
  }
  constexpr bool intersects(LabelSet o) const noexcept { return (bits_ & o.bits_) != 0; }
  constexpr bool is_subset_of(LabelSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }

  friend constexpr LabelSet operator|(LabelSet a, LabelSet b) { return from_bits(a.bits_ | b.bits_); }
  friend constexpr LabelSet operator&(LabelSet a, LabelSet b) { return from_bits(a.bits_ & b.bits_); }
  friend constexpr LabelSet operator-(LabelSet a, LabelSet b) {
    return from_bits(static_cast<std::uint16_t>(a.bits_ & ~b.bits_));
  }
  friend constexpr bool operator==(LabelSet, LabelSet) = default;
  friend constexpr auto operator<=>(LabelSet a, LabelSet b) { return a.bits_ <=> b.bits_; }

  std::vector<BodyFluid> fluids() const;

  // "blood+saliva" in ordinal order; the empty set renders as "none".
  std::string to_string() const;
  // Inverse of to_string; also accepts "" for the empty set and ',' as separator.
  static LabelSet parse(std::string_view text);

 private:
  static constexpr std::uint16_t kAllBits = (1U << kFluidCount) - 1;
  std::uint16_t bits_ = 0;
};

struct MarkerPanel {
  std::vector<std::string> markers;
  std::vector<std::string> housekeeping;
  double threshold_rfu = 150.0;

  // HBB ... PRM1 plus HK1, HK2 at 150 rfu.
  static MarkerPanel standard();

  std::size_t size() const noexcept { return markers.size(); }
  std::optional<std::size_t> index_of(std::string_view marker) const noexcept;
  // Throws std::invalid_argument on duplicate names or a non-positive threshold.
  void validate() const;

  friend bool operator==(const MarkerPanel&, const MarkerPanel&) = default;
};

struct Replicate {
  std::vector<double> rfu;
  std::vector<bool> housekeeping_detected;
};

// A profiled stain. Single-source samples carry one label; mixture fixtures
// carry several.
struct Sample {
  std::string id;
  LabelSet labels;
  std::vector<Replicate> replicates;

  bool is_single() const noexcept { return labels.size() == 1; }
};

struct Dataset {
  MarkerPanel panel;
  std::vector<Sample> samples;

  std::size_t replicate_count() const noexcept;
};

// A housekeeping marker counts as amplified if detected in any replicate.
// The sample is kept unless fewer than half of them amplified.
bool passes_housekeeping_filter(const Sample& sample) noexcept;

struct LoadReport {
  std::size_t rows = 0;
  std::size_t samples_loaded = 0;
  std::vector<std::string> excluded_ids;
};

struct ParsedProfiles {
  Dataset dataset;
  LoadReport report;
};

// CSV, one row per replicate:
//   sample_id,fluid_labels,replicate_id,<markers...>,<housekeeping...>
ParsedProfiles parse_profile_table(std::string_view csv, const MarkerPanel& panel);
std::string write_profile_table(const Dataset& dataset);

std::vector<std::uint8_t> dichotomize(const Replicate& rep, double threshold_rfu);

// Per-marker fraction of replicates at or above the threshold.
std::vector<double> replicate_fractions(std::span<const Replicate> reps, double threshold_rfu);

// Per-fluid, per-marker detection rate (panel order).
using RateTable = std::map<BodyFluid, std::vector<double>>;

// Pooled over all single-source samples of each fluid.
RateTable detection_rates(const Dataset& dataset);

// Single-source detection rates of the reference lab panel.
RateTable reference_detection_rates();

RateTable parse_rate_table(std::string_view csv, const MarkerPanel& panel);
std::string write_rate_table(const RateTable& rates, const MarkerPanel& panel);

struct SynthesisOptions {
  std::size_t n_per_fluid = 30;
  std::size_t reps_per_sample = 4;
  std::uint64_t seed = 0;
  double max_rfu = 5000.0;
};

// Independent Bernoulli detections per replicate and marker. Detected peaks
// are log-uniform on [threshold, max_rfu]; the rest uniform on [0, threshold - 1].
Dataset synthesize_dataset(const RateTable& rates, const MarkerPanel& panel,
                           const SynthesisOptions& options);

}  // namespace mixlr
