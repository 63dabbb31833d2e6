#include "countlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "countlab/errors.hpp"

namespace countlab::analysis {

double neg_log_loss(double loss) {
  if (!(loss > 0.0)) throw NonPositiveLoss("neg_log_loss: loss must be positive");
  return -std::log(loss);
}

RegressionResult ols(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch("ols: xs and ys differ in length");
  const std::size_t n = xs.size();
  if (n < 3) throw InvalidArgument("ols: need at least 3 points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw DegenerateX("ols: xs are constant");

  RegressionResult r;
  r.n = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy == 0.0) {
    r.slope = 0.0;
    r.intercept = my;
    r.r2 = 0.0;
    r.p = 1.0;
    return r;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (r.intercept + r.slope * xs[i]);
    sse += e * e;
  }
  r.r2 = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  const double df = static_cast<double>(n - 2);
  r.slope_stderr = std::sqrt(sse / df / sxx);
  if (sse <= 1e-28 * syy) {
    r.r2 = 1.0;
    r.p = 0.0;
    return r;
  }
  r.p = student_t_p(r.slope / r.slope_stderr, df);
  return r;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_p(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("student_t_p: df must be positive");
  if (std::isnan(t)) throw InvalidArgument("student_t_p: t is NaN");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

Histogram fpf_histogram(std::span<const evaluation::FpfRecord> records, const HistogramSpec& spec) {
  if (spec.bin_width == 0 || spec.lo >= spec.hi)
    throw InvalidArgument("fpf_histogram: need bin width > 0 and lo < hi");
  Histogram h;
  for (std::size_t start = spec.lo; start < spec.hi; start += spec.bin_width)
    h.bins.push_back({start, std::min(start + spec.bin_width, spec.hi), 0});
  for (const auto& r : records) {
    if (r.censored()) {
      ++h.censored;
      continue;
    }
    const std::size_t v = *r.fpf;
    if (v < spec.lo || v >= spec.hi) {
      ++h.out_of_range;
      continue;
    }
    ++h.bins[(v - spec.lo) / spec.bin_width].count;
  }
  return h;
}

}  // namespace countlab::analysis
