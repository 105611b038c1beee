#include "mixlr/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixlr/error.hpp"
#include "mixlr/optim.hpp"

namespace mixlr {

namespace {
constexpr double kLn10 = 2.302585092994045684;
}

double clip_log10_score(double log10_score) noexcept {
  if (std::isnan(log10_score)) return log10_score;
  return std::clamp(log10_score, kMinLog10Score, kMaxLog10Score);
}

LRValue LRValue::from_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("LR must be positive and finite");
  return LRValue(lr, std::log10(lr));
}

LRValue LRValue::from_log10(double log10_lr) {
  if (!std::isfinite(log10_lr)) throw std::invalid_argument("log10 LR must be finite");
  return LRValue(std::pow(10.0, log10_lr), log10_lr);
}

double Calibrator::log10_lr(double log10_score) const noexcept {
  return a0 + a1 * clip_log10_score(log10_score) - prior_log_odds;
}

Calibrator fit_calibrator(std::span<const double> log10_scores, const std::vector<bool>& h1_flags,
                          const CalibrationOptions& options) {
  if (log10_scores.size() != h1_flags.size()) throw std::invalid_argument("scores and flags differ in length");
  const auto n1 = std::count(h1_flags.begin(), h1_flags.end(), true);
  const auto n2 = static_cast<std::ptrdiff_t>(h1_flags.size()) - n1;
  if (n1 == 0 || n2 == 0) throw DataError("calibration needs both H1 and H2 scores");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(log10_scores.size()), 1);
  for (std::size_t i = 0; i < log10_scores.size(); ++i) {
    if (std::isnan(log10_scores[i])) throw DataError("NaN score in calibration data");
    x(static_cast<Eigen::Index>(i), 0) = clip_log10_score(log10_scores[i]);
  }
  if (!(options.slope_penalty >= 0.0)) throw std::invalid_argument("slope penalty must be non-negative");
  const double penalty = options.slope_penalty;
  // Summed log loss over (intercept, slope) plus the slope penalty.
  auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    double f = 0.5 * penalty * w(1) * w(1);
    if (g) *g << 0.0, penalty * w(1);
    if (h) *h << 0.0, 0.0, 0.0, penalty;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double s = x(i, 0);
      const double z = w(0) + w(1) * s;
      const double y = h1_flags[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      // log(1 + e^z) - y z, evaluated stably
      f += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y * z;
      const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      if (g) {
        (*g)(0) += p - y;
        (*g)(1) += (p - y) * s;
      }
      if (h) {
        const double v = p * (1.0 - p);
        (*h)(0, 0) += v;
        (*h)(0, 1) += v * s;
        (*h)(1, 1) += v * s * s;
      }
    }
    if (h) (*h)(1, 0) = (*h)(0, 1);
    return f;
  };
  const double scale = static_cast<double>(x.rows());
  const auto result = optim::newton(objective, Eigen::VectorXd::Zero(2),
                                    {options.tolerance * scale, options.max_iterations});
  if (!result.converged || !result.x.allFinite())
    throw ConvergenceError("calibration fit did not converge (scores perfectly separated? see slope_penalty)",
                           result.gradient_norm, result.iterations);

  Calibrator c;
  c.a0 = result.x(0) / kLn10;
  c.a1 = result.x(1) / kLn10;
  if (!(c.a1 > 0.0)) throw NumericError("anti-discriminative scores: calibration slope is not positive");
  if (options.correct_prior) c.prior_log_odds = std::log10(static_cast<double>(n1) / static_cast<double>(n2));
  return c;
}

LRValue apply_calibrator(const Calibrator& c, double score) {
  if (!(score > 0.0)) throw std::invalid_argument("score must be positive");
  return apply_calibrator_log10(c, std::log10(score));
}

LRValue apply_calibrator_log10(const Calibrator& c, double log10_score) {
  return LRValue::from_log10(c.log10_lr(log10_score));
}

BinaryLogReg fuse_coefficients(const Calibrator& c, const BinaryLogReg& model) {
  BinaryLogReg fused = model;
  fused.intercept = c.a0 + c.a1 * model.intercept - c.prior_log_odds;
  for (auto& b : fused.coefficients) b *= c.a1;
  return fused;
}

}  // namespace mixlr
