#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mixlr/profiles.hpp"

namespace mixlr {

struct TrainingConfig {
  double lambda = 1e-4;        // L2 strength per sample
  double tolerance = 1e-8;     // gradient-norm stopping criterion
  int max_iterations = 0;      // 0 selects a default per optimizer
  std::uint64_t seed = 0;      // 0 starts from zero, otherwise from a seeded random point
  bool standardize = false;    // z-score features with training statistics

  void validate() const;
};

// Per-feature affine normalisation z = (r - mean) / scale.
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaling identity(std::size_t p);
  static FeatureScaling fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// log10 posterior odds = intercept + sum_i coefficients[i] * r_i, with r on
// the raw feature scale. `scaling` records the statistics used while fitting.
struct BinaryLogReg {
  double intercept = 0.0;
  std::vector<double> coefficients;
  FeatureScaling scaling;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  double log10_score(std::span<const double> r) const;
};

// Rows of `x` are feature vectors; `y[i]` is true for H1 rows.
// Throws DataError when only one class is present and ConvergenceError when
// the gradient norm stays above the tolerance.
BinaryLogReg train_binary_logreg(const Eigen::MatrixXd& x, const std::vector<bool>& y,
                                 const TrainingConfig& cfg);

// 10^(log10 score). May overflow to inf for extreme inputs; use
// BinaryLogReg::log10_score where that matters.
double score_binary(const BinaryLogReg& model, std::span<const double> r);

// Multinomial logistic regression over label sets. classes[0] is the
// reference class whose parameters are pinned at zero; column j-1 of
// `coefficients` holds class j, row 0 being the intercept. log10 units.
struct PowersetLogReg {
  std::vector<LabelSet> classes;
  Eigen::MatrixXd coefficients;
  FeatureScaling scaling;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  LabelSet fluids() const;
  std::vector<double> posteriors(std::span<const double> r) const;
};

// The class space is every combination of the fluids that vary across
// `labels`, joined with the fluids present in every row. Classes never seen in
// training are held finite by the L2 term alone.
PowersetLogReg train_powerset_logreg(const Eigen::MatrixXd& x, const std::vector<LabelSet>& labels,
                                     const TrainingConfig& cfg);

inline constexpr double kPowersetDenominatorFloor = 1e-12;

// Posterior mass on classes meeting `interest` over the mass on classes that
// avoid it; the denominator is floored at 1e-12.
double score_powerset(const PowersetLogReg& model, std::span<const double> r, LabelSet interest);

// Objectives in natural-log parametrisation: mean negative log-likelihood
// plus lambda/2 * ||w||^2 over every parameter, intercepts included.
class BinaryLogisticLoss {
 public:
  // `x` without the intercept column.
  BinaryLogisticLoss(Eigen::MatrixXd x, const std::vector<bool>& y, double lambda);

  Eigen::Index dimension() const noexcept { return design_.cols(); }
  double operator()(const Eigen::VectorXd& w, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const;

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd y_;
  double lambda_;
};

// Parameters are the column-major (p+1) x (K-1) matrix of non-reference
// classes, flattened.
class MultinomialLogisticLoss {
 public:
  MultinomialLogisticLoss(Eigen::MatrixXd x, std::vector<int> class_of_row, int class_count, double lambda);

  Eigen::Index dimension() const noexcept { return design_.cols() * (classes_ - 1); }
  double operator()(const Eigen::VectorXd& w, Eigen::VectorXd* grad) const;

 private:
  Eigen::MatrixXd design_;
  std::vector<int> class_of_row_;
  int classes_;
  double lambda_;
};

}  // namespace mixlr
