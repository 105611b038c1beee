#include "mixlr/classify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixlr/error.hpp"
#include "mixlr/optim.hpp"
#include "mixlr/random.hpp"

namespace mixlr {

namespace {

constexpr double kLn10 = 2.302585092994045684;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

Eigen::VectorXd initial_point(Eigen::Index n, std::uint64_t seed) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (seed == 0) return w;
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.normal();
  return w;
}

void check_features(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw DataError("no training rows");
  if (!x.allFinite()) throw DataError("non-finite feature values");
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be at least 1");
}

FeatureScaling FeatureScaling::identity(std::size_t p) {
  return {std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)};
}

FeatureScaling FeatureScaling::fit(const Eigen::MatrixXd& x) {
  const auto p = static_cast<std::size_t>(x.cols());
  FeatureScaling s = identity(p);
  const double n = static_cast<double>(x.rows());
  for (std::size_t j = 0; j < p; ++j) {
    const auto col = x.col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / n;
    s.mean[j] = mean;
    s.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Eigen::MatrixXd FeatureScaling::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    z.col(j) = (z.col(j).array() - mean[k]) / scale[k];
  }
  return z;
}

BinaryLogisticLoss::BinaryLogisticLoss(Eigen::MatrixXd x, const std::vector<bool>& y, double lambda)
    : design_(with_intercept(x)), y_(static_cast<Eigen::Index>(y.size())), lambda_(lambda) {
  if (static_cast<std::size_t>(design_.rows()) != y.size())
    throw std::invalid_argument("feature rows and labels differ in length");
  for (std::size_t i = 0; i < y.size(); ++i) y_(static_cast<Eigen::Index>(i)) = y[i] ? 1.0 : 0.0;
}

double BinaryLogisticLoss::operator()(const Eigen::VectorXd& w, Eigen::VectorXd* grad,
                                      Eigen::MatrixXd* hess) const {
  const double n = static_cast<double>(design_.rows());
  const Eigen::VectorXd eta = design_ * w;
  double loss = 0.0;
  Eigen::VectorXd resid(eta.size());
  Eigen::VectorXd weight(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    loss += softplus(eta(i)) - y_(i) * eta(i);
    const double p = sigmoid(eta(i));
    resid(i) = p - y_(i);
    weight(i) = p * (1.0 - p);
  }
  loss = loss / n + 0.5 * lambda_ * w.squaredNorm();
  if (grad) *grad = design_.transpose() * resid / n + lambda_ * w;
  if (hess) {
    *hess = design_.transpose() * weight.asDiagonal() * design_ / n;
    hess->diagonal().array() += lambda_;
  }
  return loss;
}

MultinomialLogisticLoss::MultinomialLogisticLoss(Eigen::MatrixXd x, std::vector<int> class_of_row,
                                                 int class_count, double lambda)
    : design_(with_intercept(x)), class_of_row_(std::move(class_of_row)), classes_(class_count), lambda_(lambda) {
  if (static_cast<std::size_t>(design_.rows()) != class_of_row_.size())
    throw std::invalid_argument("feature rows and labels differ in length");
  if (classes_ < 2) throw std::invalid_argument("need at least two classes");
  for (int c : class_of_row_)
    if (c < 0 || c >= classes_) throw std::invalid_argument("class index out of range");
}

double MultinomialLogisticLoss::operator()(const Eigen::VectorXd& w, Eigen::VectorXd* grad) const {
  const auto rows = design_.rows();
  const auto params = design_.cols();
  const auto free_classes = classes_ - 1;
  const Eigen::Map<const Eigen::MatrixXd> coef(w.data(), params, free_classes);
  Eigen::MatrixXd z = design_ * coef;  // rows x (K-1)

  double loss = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto row = z.row(i);
    const double m = std::max(0.0, row.maxCoeff());
    const double lse = m + std::log(std::exp(-m) + (row.array() - m).exp().sum());
    const int c = class_of_row_[static_cast<std::size_t>(i)];
    loss += lse - (c > 0 ? row(c - 1) : 0.0);
    if (grad) {
      row = (row.array() - lse).exp();  // posterior of each non-reference class
      if (c > 0) row(c - 1) -= 1.0;
    }
  }
  const double n = static_cast<double>(rows);
  loss = loss / n + 0.5 * lambda_ * w.squaredNorm();
  if (grad) {
    grad->resize(w.size());
    Eigen::Map<Eigen::MatrixXd> g(grad->data(), params, free_classes);
    g.noalias() = design_.transpose() * z / n;
    *grad += lambda_ * w;
  }
  return loss;
}

double BinaryLogReg::log10_score(std::span<const double> r) const {
  if (r.size() != coefficients.size()) throw std::invalid_argument("feature vector does not match the model");
  double s = intercept;
  for (std::size_t i = 0; i < r.size(); ++i) s += coefficients[i] * r[i];
  return s;
}

double score_binary(const BinaryLogReg& model, std::span<const double> r) {
  return std::pow(10.0, model.log10_score(r));
}

BinaryLogReg train_binary_logreg(const Eigen::MatrixXd& x, const std::vector<bool>& y, const TrainingConfig& cfg) {
  cfg.validate();
  check_features(x);
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("feature rows and labels differ");
  const auto positives = std::count(y.begin(), y.end(), true);
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size())
    throw DataError("binary training needs both H1 and H2 rows");

  const auto p = static_cast<std::size_t>(x.cols());
  const FeatureScaling scaling = cfg.standardize ? FeatureScaling::fit(x) : FeatureScaling::identity(p);
  const BinaryLogisticLoss loss(cfg.standardize ? scaling.apply(x) : x, y, cfg.lambda);

  optim::Options opts{cfg.tolerance, cfg.max_iterations > 0 ? cfg.max_iterations : 200};
  const auto result = optim::newton(
      [&loss](const Eigen::VectorXd& w, Eigen::VectorXd* g, Eigen::MatrixXd* h) { return loss(w, g, h); },
      initial_point(loss.dimension(), cfg.seed), opts);
  if (!result.converged)
    throw ConvergenceError("binary logistic regression did not converge", result.gradient_norm, result.iterations);

  BinaryLogReg model;
  model.scaling = scaling;
  model.lambda = cfg.lambda;
  model.seed = cfg.seed;
  model.coefficients.resize(p);
  double intercept = result.x(0);
  for (std::size_t j = 0; j < p; ++j) {
    const double b = result.x(static_cast<Eigen::Index>(j + 1)) / scaling.scale[j];
    model.coefficients[j] = b / kLn10;
    intercept -= b * scaling.mean[j];
  }
  model.intercept = intercept / kLn10;
  return model;
}

LabelSet PowersetLogReg::fluids() const {
  LabelSet all;
  for (auto c : classes) all = all | c;
  return all;
}

std::vector<double> PowersetLogReg::posteriors(std::span<const double> r) const {
  const auto p = static_cast<std::size_t>(coefficients.rows()) - 1;
  if (r.size() != p) throw std::invalid_argument("feature vector does not match the model");
  std::vector<double> logit(classes.size(), 0.0);
  for (std::size_t c = 1; c < classes.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c - 1);
    double s = coefficients(0, col);
    for (std::size_t i = 0; i < p; ++i) s += coefficients(static_cast<Eigen::Index>(i + 1), col) * r[i];
    logit[c] = s * kLn10;
  }
  const double m = *std::max_element(logit.begin(), logit.end());
  double total = 0.0;
  for (auto& v : logit) total += (v = std::exp(v - m));
  for (auto& v : logit) v /= total;
  return logit;
}

PowersetLogReg train_powerset_logreg(const Eigen::MatrixXd& x, const std::vector<LabelSet>& labels,
                                     const TrainingConfig& cfg) {
  cfg.validate();
  check_features(x);
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw std::invalid_argument("feature rows and labels differ");

  LabelSet seen_any, seen_all = LabelSet::all();
  for (auto l : labels) {
    seen_any = seen_any | l;
    seen_all = seen_all & l;
  }
  const auto free = (seen_any - seen_all).fluids();
  if (free.empty()) throw DataError("power-set training needs at least two distinct label sets");

  PowersetLogReg model;
  const std::size_t k = std::size_t{1} << free.size();
  model.classes.reserve(k);
  for (std::size_t mask = 0; mask < k; ++mask) {
    LabelSet c = seen_all;
    for (std::size_t b = 0; b < free.size(); ++b)
      if ((mask >> b) & 1U) c.insert(free[b]);
    model.classes.push_back(c);
  }
  std::vector<int> class_of_row(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int idx = 0;
    for (std::size_t b = 0; b < free.size(); ++b)
      if (labels[i].contains(free[b])) idx |= 1 << b;
    class_of_row[i] = idx;
  }

  const auto p = static_cast<std::size_t>(x.cols());
  model.scaling = cfg.standardize ? FeatureScaling::fit(x) : FeatureScaling::identity(p);
  model.lambda = cfg.lambda;
  model.seed = cfg.seed;
  const MultinomialLogisticLoss loss(cfg.standardize ? model.scaling.apply(x) : x, std::move(class_of_row),
                                     static_cast<int>(k), cfg.lambda);

  optim::Options opts{cfg.tolerance, cfg.max_iterations > 0 ? cfg.max_iterations : 20000};
  const auto result = optim::lbfgs([&loss](const Eigen::VectorXd& w, Eigen::VectorXd* g) { return loss(w, g); },
                                   initial_point(loss.dimension(), cfg.seed), opts);
  if (!result.converged)
    throw ConvergenceError("power-set logistic regression did not converge", result.gradient_norm,
                           result.iterations);

  const auto rows = static_cast<Eigen::Index>(p + 1);
  const Eigen::Map<const Eigen::MatrixXd> w(result.x.data(), rows, static_cast<Eigen::Index>(k - 1));
  model.coefficients.resize(rows, static_cast<Eigen::Index>(k - 1));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    double intercept = w(0, c);
    for (std::size_t j = 0; j < p; ++j) {
      const auto row = static_cast<Eigen::Index>(j + 1);
      const double b = w(row, c) / model.scaling.scale[j];
      model.coefficients(row, c) = b / kLn10;
      intercept -= b * model.scaling.mean[j];
    }
    model.coefficients(0, c) = intercept / kLn10;
  }
  return model;
}

double score_powerset(const PowersetLogReg& model, std::span<const double> r, LabelSet interest) {
  if (interest.empty()) throw std::invalid_argument("score_powerset: empty interest set");
  if (!interest.is_subset_of(model.fluids()))
    throw std::invalid_argument("score_powerset: interest set " + interest.to_string() + " is not modelled");
  const auto post = model.posteriors(r);
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < post.size(); ++c) (model.classes[c].intersects(interest) ? num : den) += post[c];
  return num / std::max(den, kPowersetDenominatorFloor);
}

}  // namespace mixlr
