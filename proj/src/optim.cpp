#include "mixlr/optim.hpp"

#include <cmath>
#include <deque>

namespace mixlr::optim {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kRoundoff = 1e-12;

}  // namespace

Result newton(const SecondOrderObjective& f, Eigen::VectorXd x0, const Options& options) {
  const auto n = x0.size();
  Result r;
  r.x = std::move(x0);
  Eigen::VectorXd g(n), g_trial(n);
  Eigen::MatrixXd h(n, n);
  r.value = f(r.x, &g, &h);

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    r.gradient_norm = g.norm();
    if (r.gradient_norm <= options.gradient_tolerance) {
      r.converged = true;
      return r;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step = ldlt.solve(-g);
    double damping = 1e-10 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    while (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(g) >= 0.0) {
      ldlt.compute(h + damping * Eigen::MatrixXd::Identity(n, n));
      step = ldlt.solve(-g);
      damping *= 10.0;
      if (damping > 1e12) {
        step = -g;
        break;
      }
    }

    const double slope = step.dot(g);
    if (-slope <= kRoundoff * (1.0 + std::abs(r.value))) {
      // The predicted decrease is below what the objective can resolve, so
      // judge the full step by the gradient instead.
      Eigen::VectorXd x_full = r.x + step;
      Eigen::MatrixXd h_full(n, n);
      const double v = f(x_full, &g_trial, &h_full);
      if (!std::isfinite(v) || g_trial.norm() >= r.gradient_norm) break;
      r.x = std::move(x_full);
      r.value = v;
      g = g_trial;
      h = std::move(h_full);
      continue;
    }
    double t = 1.0;
    double trial = 0.0;
    Eigen::VectorXd x_trial;
    bool accepted = false;
    for (int k = 0; k < kMaxBacktracks; ++k, t *= 0.5) {
      x_trial = r.x + t * step;
      trial = f(x_trial, nullptr, nullptr);
      if (std::isfinite(trial) && trial <= r.value + kArmijo * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable decrease left; accept a full step only if it does
      // not increase the objective and improves the gradient.
      x_trial = r.x + step;
      trial = f(x_trial, &g_trial, nullptr);
      if (!(trial <= r.value) || g_trial.norm() >= r.gradient_norm) break;
    }
    r.x = std::move(x_trial);
    r.value = f(r.x, &g, &h);
  }
  r.gradient_norm = g.norm();
  r.converged = r.gradient_norm <= options.gradient_tolerance;
  return r;
}

Result lbfgs(const FirstOrderObjective& f, Eigen::VectorXd x0, const Options& options, int memory) {
  const auto n = x0.size();
  Result r;
  r.x = std::move(x0);
  Eigen::VectorXd g(n), g_new(n);
  r.value = f(r.x, &g);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha(static_cast<std::size_t>(memory));

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    r.gradient_norm = g.norm();
    if (r.gradient_norm <= options.gradient_tolerance) {
      r.converged = true;
      return r;
    }

    // Two-loop recursion for d = -H g.
    Eigen::VectorXd d = -g;
    const auto m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (m > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    else d /= std::max(1.0, r.gradient_norm);
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }
    double slope = d.dot(g);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, r.gradient_norm);
      slope = d.dot(g);
    }

    double t = 1.0;
    double trial = 0.0;
    Eigen::VectorXd x_trial;
    bool accepted = false;
    if (-slope <= kRoundoff * (1.0 + std::abs(r.value))) {
      x_trial = r.x + d;
      trial = f(x_trial, &g_new);
      // Accept it unless it raises the objective by more than round-off.
      accepted = std::isfinite(trial) && trial <= r.value + kRoundoff * (1.0 + std::abs(r.value));
    }
    for (int k = 0; !accepted && k < kMaxBacktracks; ++k, t *= 0.5) {
      x_trial = r.x + t * d;
      trial = f(x_trial, &g_new);
      if (std::isfinite(trial) && trial <= r.value + kArmijo * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (s_hist.empty()) break;
      // Stale curvature information; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    Eigen::VectorXd s = x_trial - r.x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    r.x = std::move(x_trial);
    r.value = trial;
    g = g_new;
  }
  r.gradient_norm = g.norm();
  r.converged = r.gradient_norm <= options.gradient_tolerance;
  return r;
}

}  // namespace mixlr::optim
