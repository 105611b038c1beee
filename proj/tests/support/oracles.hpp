#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mixlr/classify.hpp"
#include "mixlr/random.hpp"

namespace mixlr::testing {

// Central differences, step scaled to the coordinate.
template <typename F>
Eigen::VectorXd numeric_gradient(F&& f, const Eigen::VectorXd& w) {
  Eigen::VectorXd g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(w(i)));
    Eigen::VectorXd a = w, b = w;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Power-set score by enumerating every class in long double.
inline double brute_force_score(const PowersetLogReg& m, const std::vector<double>& r, LabelSet interest) {
  const auto k = m.classes.size();
  std::vector<long double> weight(k);
  for (std::size_t c = 0; c < k; ++c) {
    long double z = 0.0L;
    if (c > 0) {
      const auto col = static_cast<Eigen::Index>(c - 1);
      z = m.coefficients(0, col);
      for (std::size_t i = 0; i < r.size(); ++i)
        z += static_cast<long double>(m.coefficients(static_cast<Eigen::Index>(i + 1), col)) * r[i];
    }
    weight[c] = std::pow(10.0L, z);
  }
  long double total = 0.0L, num = 0.0L, den = 0.0L;
  for (auto w : weight) total += w;
  for (std::size_t c = 0; c < k; ++c) {
    bool hit = false;
    for (auto f : m.classes[c].fluids()) hit = hit || interest.contains(f);
    (hit ? num : den) += weight[c] / total;
  }
  return static_cast<double>(num / std::max(den, 1e-12L));
}

// Eight classes over blood, saliva and vaginal mucosa, class 0 empty.
inline PowersetLogReg random_powerset(Rng& rng, std::size_t p) {
  PowersetLogReg m;
  const std::array<BodyFluid, 3> fluids{BodyFluid::blood, BodyFluid::saliva, BodyFluid::vaginal_mucosa};
  for (unsigned bits = 0; bits < 8; ++bits) {
    LabelSet s;
    for (unsigned f = 0; f < 3; ++f)
      if (bits & (1U << f)) s.insert(fluids[f]);
    m.classes.push_back(s);
  }
  m.coefficients.resize(static_cast<Eigen::Index>(p + 1), 7);
  for (Eigen::Index i = 0; i < m.coefficients.size(); ++i) m.coefficients.data()[i] = rng.normal() * 0.8;
  m.scaling = FeatureScaling::identity(p);
  return m;
}

}  // namespace mixlr::testing
