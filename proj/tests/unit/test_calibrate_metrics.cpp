#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mixlr/calibrate.hpp"
#include "mixlr/error.hpp"
#include "mixlr/metrics.hpp"
#include "mixlr/random.hpp"

using namespace mixlr;

namespace {

std::vector<LRValue> lrs(std::initializer_list<double> v) {
  std::vector<LRValue> out;
  for (double x : v) out.push_back(LRValue::from_lr(x));
  return out;
}

// Honest binormal LR system in log10 units: under H1 log10 LR ~ N(mu, s^2),
// under H2 N(-mu, s^2), with mu = s^2 ln(10) / 2. `shift` is added to every
// value, mimicking an overconfident score.
struct Binormal {
  std::vector<double> log10_scores;
  std::vector<bool> h1;
};

Binormal binormal(std::size_t n_per_class, double s, double shift, std::uint64_t seed) {
  const double mu = s * s * std::numbers::ln10 / 2.0;
  Rng rng(seed);
  Binormal b;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    b.log10_scores.push_back(mu + s * rng.normal() + shift);
    b.h1.push_back(true);
    b.log10_scores.push_back(-mu + s * rng.normal() + shift);
    b.h1.push_back(false);
  }
  return b;
}

}  // namespace

TEST_CASE("cllr") {
  const auto one = lrs({1.0, 1.0, 1.0});
  CHECK(cllr(one, one) == 1.0);
  CHECK(cllr(lrs({10.0}), lrs({0.1})) == doctest::Approx(std::log2(1.1)).epsilon(1e-12));
  CHECK_THROWS_AS(cllr({}, one), std::invalid_argument);

  // Stronger correct evidence lowers the cost, never below zero.
  double prev = 1.0;
  for (double k : {2.0, 10.0, 1e3, 1e6, 1e10}) {
    const double c = cllr(lrs({k, k}), lrs({1 / k, 1 / k}));
    CHECK(c < prev);
    CHECK(c >= 0.0);
    prev = c;
  }
  CHECK(prev < 1e-9);

  // Strictly decreasing in each H1 LR and increasing in each H2 LR.
  CHECK(cllr(lrs({3.0, 5.0}), lrs({0.5})) < cllr(lrs({3.0, 4.0}), lrs({0.5})));
  CHECK(cllr(lrs({3.0}), lrs({0.5, 0.2})) < cllr(lrs({3.0}), lrs({0.5, 0.3})));
}

TEST_CASE("roc and auc") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(roc_auc(s, {false, false, true, true}).auc == 1.0);
  CHECK(roc_auc(s, {false, true, false, true}).auc == 0.75);
  CHECK(roc_auc(std::vector<double>(6, 2.0), {true, false, true, false, true, false}).auc == 0.5);
  CHECK_THROWS_AS(roc_auc(s, {true, true, true, true}), DataError);

  const auto r = roc_auc(std::vector<double>{0.5, 2.0, 0.5, 3.0}, {true, true, false, false});
  CHECK(r.fn_rate == 0.5);  // H1 at 0.5 is not above LR 1
  CHECK(r.fp_rate == 0.5);  // H2 at 3 is above it

  // Invariant under strictly monotone transforms.
  Rng rng(1);
  std::vector<double> x, y;
  std::vector<bool> f;
  for (int i = 0; i < 500; ++i) {
    const bool h1 = rng.bernoulli(0.4);
    x.push_back(rng.normal() + (h1 ? 1.0 : 0.0));
    y.push_back(std::exp(3 * x.back()) + 7);
    f.push_back(h1);
  }
  CHECK(roc_auc(x, f).auc == roc_auc(y, f).auc);
}

TEST_CASE("tippett on a hand set") {
  const auto c = tippett(lrs({0.1, 1.0, 10.0}), lrs({0.1, 1.0, 10.0}));
  REQUIRE(c.points.size() == 4);
  const double expect[4] = {1.0, 2.0 / 3, 1.0 / 3, 0.0};
  const double thresholds[4] = {-2, -1, 0, 1};
  for (int i = 0; i < 4; ++i) {
    CHECK(c.points[static_cast<std::size_t>(i)].threshold == doctest::Approx(thresholds[i]));
    CHECK(c.points[static_cast<std::size_t>(i)].fraction_h1 == doctest::Approx(expect[i]));
    CHECK(c.points[static_cast<std::size_t>(i)].fraction_h2 == doctest::Approx(expect[i]));
  }
  CHECK(c.to_csv().rfind("threshold,fraction_h1,fraction_h2\n", 0) == 0);
}

TEST_CASE("lr cap and verbal scale") {
  CHECK(cap_lr(LRValue::from_lr(5000)).lr() == 1000.0);
  CHECK(cap_lr(LRValue::from_lr(1.0 / 5000)).lr() == doctest::Approx(1e-3));
  CHECK(cap_lr(LRValue::from_lr(50)).lr() == 50.0);
  CHECK_THROWS_AS(cap_lr(LRValue::from_lr(2), 1.0), std::invalid_argument);

  for (double v : {1e-8, 1e-3, 0.3, 7.0, 999.0, 1e4, 1e9}) {
    const auto once = cap_lr(LRValue::from_lr(v));
    CHECK(cap_lr(once).lr() == once.lr());
    const auto verbal = verbal_scale(once);
    CHECK(verbal.strength != Strength::strong);
    CHECK(verbal.strength != Strength::very_strong);
  }

  CHECK(verbal_scale(LRValue::from_lr(3)).label() == "weak support");
  CHECK(verbal_scale(LRValue::from_lr(3)).favours == Favours::h1);
  CHECK(verbal_scale(LRValue::from_lr(1)).label() == "do not support one hypothesis over the other");
  CHECK(verbal_scale(LRValue::from_lr(1.0 / 50)).describe() == "moderate support for H2");
  CHECK(verbal_scale(LRValue::from_lr(2)).strength == Strength::neutral);
  CHECK(verbal_scale(LRValue::from_lr(0.5)).strength == Strength::neutral);
  CHECK(verbal_scale(LRValue::from_lr(10)).strength == Strength::weak);
  CHECK(verbal_scale(LRValue::from_lr(100)).strength == Strength::moderate);
  CHECK(verbal_scale(LRValue::from_lr(1000)).strength == Strength::moderately_strong);
  CHECK(verbal_scale(LRValue::from_lr(0.1)).strength == Strength::weak);

  CHECK_THROWS_AS(LRValue::from_lr(0.0), std::invalid_argument);
  CHECK_THROWS_AS(LRValue::from_lr(-1.0), std::invalid_argument);
}

TEST_CASE("calibrator arithmetic") {
  const Calibrator id = Calibrator::identity();
  for (double s : {1e-3, 0.5, 1.0, 42.0}) CHECK(apply_calibrator(id, s).lr() == doctest::Approx(s));
  CHECK(apply_calibrator(Calibrator{-1.0, 1.0, 0.0}, 10.0).lr() == doctest::Approx(1.0));
  CHECK_THROWS_AS(apply_calibrator(id, 0.0), std::invalid_argument);
  CHECK(apply_calibrator(id, 1e20).log10_lr() == kMaxLog10Score);
  CHECK(apply_calibrator(Calibrator{0.2, 1.5, 0.3}, 100.0).log10_lr() == doctest::Approx(0.2 + 3.0 - 0.3));
}

TEST_CASE("fused coefficients equal calibrate-after-score") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    BinaryLogReg m;
    m.intercept = rng.normal();
    for (int i = 0; i < 15; ++i) m.coefficients.push_back(rng.normal());
    m.scaling = FeatureScaling::identity(15);
    const Calibrator c{rng.normal(), rng.uniform(0.1, 2.0), rng.normal() * 0.3};
    const auto fused = fuse_coefficients(c, m);
    std::vector<double> r(15);
    for (auto& v : r) v = rng.uniform(0, 1);
    const double composed = apply_calibrator_log10(c, m.log10_score(r)).log10_lr();
    CHECK(std::abs(fused.log10_score(r) - composed) <= 1e-12 * std::max(1.0, std::abs(composed)));
  }
  BinaryLogReg m;
  m.intercept = 0.4;
  m.coefficients = {1.0, -2.0};
  const auto same = fuse_coefficients(Calibrator::identity(), m);
  CHECK(same.intercept == m.intercept);
  CHECK(same.coefficients == m.coefficients);
}

TEST_CASE("calibrator fits") {
  CalibrationOptions balanced;
  balanced.correct_prior = false;

  SUBCASE("symmetric normals give a zero intercept") {
    Rng rng(3);
    std::vector<double> s;
    std::vector<bool> f;
    for (int i = 0; i < 2000; ++i) {
      s.push_back(1 + rng.normal());
      f.push_back(true);
      s.push_back(-1 + rng.normal());
      f.push_back(false);
    }
    const auto c = fit_calibrator(s, f, balanced);
    CHECK(std::abs(c.a0) < 0.1);
    CHECK(c.a1 > 0);
  }

  SUBCASE("honest LRs keep unit slope") {
    const auto b = binormal(5000, 1.0, 0.0, 4);
    const auto c = fit_calibrator(b.log10_scores, b.h1, balanced);
    CHECK(c.a1 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(c.a0) < 0.05);
  }

  SUBCASE("scores a decade too high are shifted down") {
    const auto b = binormal(5000, 1.0, 1.0, 5);
    const auto c = fit_calibrator(b.log10_scores, b.h1, balanced);
    const double lr_at_1 = apply_calibrator(c, 1.0).lr();
    CHECK(lr_at_1 == doctest::Approx(0.1).epsilon(0.15));
    // The affine map matches the true posterior odds log10 s - 1 over the bulk.
    for (double t = -1.0; t <= 3.0; t += 0.5) CHECK(std::abs(c.a0 + c.a1 * t - (t - 1.0)) < 0.1);
  }

  SUBCASE("prior correction subtracts the class log odds") {
    auto b = binormal(3000, 1.0, 0.0, 6);
    for (std::size_t i = 0; i < 3000; ++i) {
      b.log10_scores.push_back(b.log10_scores[2 * i]);
      b.h1.push_back(true);
    }
    const auto c = fit_calibrator(b.log10_scores, b.h1);
    CHECK(c.prior_log_odds == doctest::Approx(std::log10(2.0)));
    CHECK(std::abs(c.a0 - c.prior_log_odds) < 0.1);
  }

  SUBCASE("calibrated outputs lean the right way on their own data") {
    const auto b = binormal(2000, 0.8, 0.7, 7);
    const auto c = fit_calibrator(b.log10_scores, b.h1);
    double h1 = 0, h2 = 0;
    for (std::size_t i = 0; i < b.h1.size(); ++i) (b.h1[i] ? h1 : h2) += c.log10_lr(b.log10_scores[i]);
    CHECK(h1 >= 0);
    CHECK(h2 <= 0);
  }

  SUBCASE("held-out decade bins") {
    const auto fit = binormal(5000, 1.2, 0.8, 8);
    const auto held = binormal(20000, 1.2, 0.8, 9);
    const auto c = fit_calibrator(fit.log10_scores, fit.h1);
    std::map<long, std::pair<int, int>> bins;
    for (std::size_t i = 0; i < held.h1.size(); ++i) {
      const long bin = std::lround(c.log10_lr(held.log10_scores[i]));
      (held.h1[i] ? bins[bin].first : bins[bin].second)++;
    }
    int checked = 0;
    for (const auto& [center, n] : bins) {
      if (n.first < 30 || n.second < 30) continue;
      ++checked;
      CHECK(std::abs(std::log10(double(n.first) / n.second) - double(center)) <= 0.5);
    }
    CHECK(checked >= 3);
  }

  SUBCASE("errors") {
    const auto b = binormal(200, 1.0, 0.0, 10);
    std::vector<bool> flipped;
    for (bool f : b.h1) flipped.push_back(!f);
    CHECK_THROWS_AS(fit_calibrator(b.log10_scores, flipped), NumericError);
    CHECK_THROWS_AS(fit_calibrator(b.log10_scores, std::vector<bool>(b.h1.size(), true)), DataError);
  }

  SUBCASE("calibration keeps the ranking") {
    const auto b = binormal(1000, 1.0, 0.5, 11);
    const auto c = fit_calibrator(b.log10_scores, b.h1);
    std::vector<double> calibrated;
    for (double s : b.log10_scores) calibrated.push_back(c.log10_lr(s));
    CHECK(std::abs(roc_auc(b.log10_scores, b.h1, 0.0).auc - roc_auc(calibrated, b.h1, 0.0).auc) < 1e-12);
  }
}

TEST_CASE("metric report") {
  const auto all = lrs({10.0, 0.1, 3.0, 0.5});
  const auto m = evaluate_lrs(all, {true, false, true, false});
  CHECK(m.n_h1 == 2);
  CHECK(m.n_h2 == 2);
  CHECK(m.auc == 1.0);
  CHECK(m.fp_rate == 0.0);
  CHECK(m.fn_rate == 0.0);
  CHECK(m.cllr == doctest::Approx(cllr(lrs({10.0, 3.0}), lrs({0.1, 0.5}))));
}
