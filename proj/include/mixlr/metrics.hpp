#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixlr/calibrate.hpp"

namespace mixlr {

struct MetricReport {
  double cllr = 0.0;
  double auc = 0.5;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  std::size_t n_h1 = 0;
  std::size_t n_h2 = 0;
};

// Log-likelihood-ratio cost:
//   1/2 [ mean_H1 log2(1 + 1/LR) + mean_H2 log2(1 + LR) ].
// Throws std::invalid_argument if either list is empty.
double cllr(std::span<const LRValue> lrs_h1, std::span<const LRValue> lrs_h2);

struct RocSummary {
  double auc = 0.5;
  double fp_rate = 0.0;  // H2 items with score > threshold
  double fn_rate = 0.0;  // H1 items with score <= threshold
};

// Rank-statistic AUC with ties counted as one half; error rates at the given
// operating point (LR = 1 by default). Throws DataError on a single class.
RocSummary roc_auc(std::span<const double> scores, const std::vector<bool>& h1_flags, double threshold = 1.0);

struct TippettPoint {
  double threshold;    // log10 LR
  double fraction_h1;  // share of H1 LRs strictly above threshold
  double fraction_h2;
};

// Inverse empirical CDFs over the pooled log10 LR values, preceded by a point
// one decade below the minimum so the curves start at 1 and end at 0.
struct TippettCurve {
  std::vector<TippettPoint> points;

  std::string to_csv() const;
};

TippettCurve tippett(std::span<const LRValue> lrs_h1, std::span<const LRValue> lrs_h2);

inline constexpr double kDefaultLrCap = 1000.0;

// Clamps to [1/cap, cap]; cap must exceed 1.
LRValue cap_lr(const LRValue& lr, double cap = kDefaultLrCap);

enum class Strength {
  neutral,            // 0.5 <= LR <= 2
  weak,               // (2, 10]
  moderate,           // (10, 100]
  moderately_strong,  // (100, 1000]
  strong,             // (1e3, 1e4]
  very_strong,        // > 1e4
};

enum class Favours { neither, h1, h2 };

// Verbal equivalent of an LR. LRs below 0.5 use the same ladder on 1/LR and
// favour H2; e.g. LR 1/50 gives moderate support for H2.
struct VerbalConclusion {
  Strength strength = Strength::neutral;
  Favours favours = Favours::neither;

  // "weak support", "do not support one hypothesis over the other", ...
  std::string_view label() const noexcept;
  // label plus direction: "moderate support for H2".
  std::string describe() const;

  friend bool operator==(const VerbalConclusion&, const VerbalConclusion&) = default;
};

VerbalConclusion verbal_scale(const LRValue& lr);

// All metrics of one evaluation run.
MetricReport evaluate_lrs(std::span<const LRValue> lrs, const std::vector<bool>& h1_flags);

}  // namespace mixlr
