#pragma once

#include <span>
#include <vector>

#include "mixlr/classify.hpp"

namespace mixlr {

// Raw scores are clipped to [1e-10, 1e10] before taking logs.
inline constexpr double kMinLog10Score = -10.0;
inline constexpr double kMaxLog10Score = 10.0;

double clip_log10_score(double log10_score) noexcept;

class LRValue {
 public:
  // Throws std::invalid_argument unless lr > 0 and finite.
  static LRValue from_lr(double lr);
  // Throws std::invalid_argument on a non-finite log.
  static LRValue from_log10(double log10_lr);

  double lr() const noexcept { return lr_; }
  double log10_lr() const noexcept { return log10_lr_; }

 private:
  LRValue(double lr, double log10_lr) : lr_(lr), log10_lr_(log10_lr) {}
  double lr_;
  double log10_lr_;
};

// log10 LR = a0 + a1 * log10(clipped score) - prior_log_odds.
struct Calibrator {
  double a0 = 0.0;
  double a1 = 1.0;
  double prior_log_odds = 0.0;  // log10(#H1 / #H2) in the calibration data

  static Calibrator identity() { return {}; }
  double log10_lr(double log10_score) const noexcept;
};

struct CalibrationOptions {
  // Subtract the calibration set's prior log odds so outputs are LRs rather
  // than posterior odds.
  bool correct_prior = true;
  // Optional L2 penalty slope_penalty/2 * b^2 on the natural-log slope,
  // added to the summed log loss. A positive value keeps the fit finite on
  // perfectly separated scores.
  double slope_penalty = 0.0;
  double tolerance = 1e-10;
  int max_iterations = 100;
};

// Logistic regression of the H1 flags on the clipped log10 scores,
// unregularised unless options.slope_penalty > 0. Throws
// DataError on a single class, NumericError when the fitted slope is not
// positive (anti-discriminative scores) or the fit diverges.
Calibrator fit_calibrator(std::span<const double> log10_scores, const std::vector<bool>& h1_flags,
                          const CalibrationOptions& options = {});

// Throws std::invalid_argument for a non-positive score.
LRValue apply_calibrator(const Calibrator& c, double score);
LRValue apply_calibrator_log10(const Calibrator& c, double log10_score);

// Folds the calibrator into the linear model: the result's log10 score is the
// calibrated log10 LR for unclipped inputs.
BinaryLogReg fuse_coefficients(const Calibrator& c, const BinaryLogReg& model);

}  // namespace mixlr
