#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mixlr::optim {

struct Options {
  double gradient_tolerance = 1e-8;  // on the Euclidean gradient norm
  int max_iterations = 200;
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// f(x), writing the gradient (and Hessian, when non-null) in place.
using SecondOrderObjective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad, Eigen::MatrixXd* hess)>;
using FirstOrderObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

// Damped Newton with Armijo backtracking. For small, smooth convex problems.
Result newton(const SecondOrderObjective& f, Eigen::VectorXd x0, const Options& options);

// Limited-memory BFGS with Armijo backtracking; curvature pairs failing
// s'y > 0 are skipped.
Result lbfgs(const FirstOrderObjective& f, Eigen::VectorXd x0, const Options& options, int memory = 12);

}  // namespace mixlr::optim
