#include "mixlr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mixlr/error.hpp"
#include "text_util.hpp"

namespace mixlr {

namespace {

constexpr double kLn10 = 2.302585092994045684;
constexpr double kLn2 = 0.693147180559945309;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// log2(1 + 10^x) without overflow.
double log2_one_plus_pow10(double x) { return softplus(x * kLn10) / kLn2; }

}  // namespace

double cllr(std::span<const LRValue> lrs_h1, std::span<const LRValue> lrs_h2) {
  if (lrs_h1.empty() || lrs_h2.empty()) throw std::invalid_argument("cllr needs LRs under both hypotheses");
  double h1 = 0.0, h2 = 0.0;
  for (const auto& lr : lrs_h1) h1 += log2_one_plus_pow10(-lr.log10_lr());
  for (const auto& lr : lrs_h2) h2 += log2_one_plus_pow10(lr.log10_lr());
  return 0.5 * (h1 / static_cast<double>(lrs_h1.size()) + h2 / static_cast<double>(lrs_h2.size()));
}

RocSummary roc_auc(std::span<const double> scores, const std::vector<bool>& h1_flags, double threshold) {
  if (scores.size() != h1_flags.size()) throw std::invalid_argument("scores and flags differ in length");
  const auto n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_h1 = 0.0;
  std::size_t n1 = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (h1_flags[order[k]]) rank_sum_h1 += avg_rank;
    i = j;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (h1_flags[i]) {
      ++n1;
      if (!(scores[i] > threshold)) ++fn;
    } else if (scores[i] > threshold) {
      ++fp;
    }
  }
  const std::size_t n2 = n - n1;
  if (n1 == 0 || n2 == 0) throw DataError("ROC analysis needs both H1 and H2 items");
  const double d1 = static_cast<double>(n1), d2 = static_cast<double>(n2);
  RocSummary out;
  out.auc = (rank_sum_h1 - d1 * (d1 + 1.0) / 2.0) / (d1 * d2);
  out.fp_rate = static_cast<double>(fp) / d2;
  out.fn_rate = static_cast<double>(fn) / d1;
  return out;
}

std::string TippettCurve::to_csv() const {
  std::ostringstream out;
  out << "threshold,fraction_h1,fraction_h2\n";
  for (const auto& p : points)
    out << detail::format_double(p.threshold) << ',' << detail::format_double(p.fraction_h1) << ','
        << detail::format_double(p.fraction_h2) << '\n';
  return out.str();
}

TippettCurve tippett(std::span<const LRValue> lrs_h1, std::span<const LRValue> lrs_h2) {
  if (lrs_h1.empty() || lrs_h2.empty()) throw std::invalid_argument("tippett needs LRs under both hypotheses");
  auto sorted_logs = [](std::span<const LRValue> lrs) {
    std::vector<double> v;
    v.reserve(lrs.size());
    for (const auto& lr : lrs) v.push_back(lr.log10_lr());
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = sorted_logs(lrs_h1);
  const auto b = sorted_logs(lrs_h2);
  std::vector<double> grid;
  grid.reserve(a.size() + b.size() + 1);
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(grid));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.insert(grid.begin(), grid.front() - 1.0);

  auto above = [](const std::vector<double>& v, double t) {
    const auto it = std::upper_bound(v.begin(), v.end(), t);
    return static_cast<double>(v.end() - it) / static_cast<double>(v.size());
  };
  TippettCurve curve;
  curve.points.reserve(grid.size());
  for (double t : grid) curve.points.push_back({t, above(a, t), above(b, t)});
  return curve;
}

LRValue cap_lr(const LRValue& lr, double cap) {
  if (!(cap > 1.0)) throw std::invalid_argument("LR cap must exceed 1");
  const double limit = std::log10(cap);
  if (lr.log10_lr() > limit) return LRValue::from_lr(cap);
  if (lr.log10_lr() < -limit) return LRValue::from_lr(1.0 / cap);
  return lr;
}

std::string_view VerbalConclusion::label() const noexcept {
  switch (strength) {
    case Strength::neutral:
      return "do not support one hypothesis over the other";
    case Strength::weak:
      return "weak support";
    case Strength::moderate:
      return "moderate support";
    case Strength::moderately_strong:
      return "moderately strong support";
    case Strength::strong:
      return "strong support";
    case Strength::very_strong:
      return "very strong support";
  }
  return "";
}

std::string VerbalConclusion::describe() const {
  std::string out(label());
  if (favours == Favours::h1) out += " for H1";
  if (favours == Favours::h2) out += " for H2";
  return out;
}

VerbalConclusion verbal_scale(const LRValue& lr) {
  const double v = lr.lr();
  if (v >= 0.5 && v <= 2.0) return {Strength::neutral, Favours::neither};
  const bool for_h1 = v > 2.0;
  // Upper-inclusive bins on the H1 side; the H2 side mirrors them on 1/LR,
  // which makes them lower-inclusive in LR.
  const auto bin = [&](double bound) { return for_h1 ? v <= bound : v >= 1.0 / bound; };
  Strength s = Strength::very_strong;
  if (bin(10.0)) s = Strength::weak;
  else if (bin(100.0)) s = Strength::moderate;
  else if (bin(1000.0)) s = Strength::moderately_strong;
  else if (bin(10000.0)) s = Strength::strong;
  return {s, for_h1 ? Favours::h1 : Favours::h2};
}

MetricReport evaluate_lrs(std::span<const LRValue> lrs, const std::vector<bool>& h1_flags) {
  if (lrs.size() != h1_flags.size()) throw std::invalid_argument("LRs and flags differ in length");
  std::vector<LRValue> h1, h2;
  std::vector<double> values;
  values.reserve(lrs.size());
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    (h1_flags[i] ? h1 : h2).push_back(lrs[i]);
    values.push_back(lrs[i].log10_lr());
  }
  const auto roc = roc_auc(values, h1_flags, 0.0);
  MetricReport out;
  out.cllr = cllr(h1, h2);
  out.auc = roc.auc;
  out.fp_rate = roc.fp_rate;
  out.fn_rate = roc.fn_rate;
  out.n_h1 = h1.size();
  out.n_h2 = h2.size();
  return out;
}

}  // namespace mixlr
