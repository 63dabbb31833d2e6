#include <doctest.h>

#include <cmath>
#include <random>

#include "countlab/analysis.hpp"
#include "countlab/errors.hpp"
#include "oracles.hpp"

using namespace countlab;
using namespace countlab::analysis;
using evaluation::FpfRecord;

TEST_CASE("neg_log_loss") {
  CHECK(neg_log_loss(1.0) == 0.0);
  CHECK(neg_log_loss(std::exp(-2.0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(neg_log_loss(0.0), NonPositiveLoss);
  CHECK_THROWS_AS(neg_log_loss(-1.0), NonPositiveLoss);
}

TEST_CASE("ols examples") {
  const std::vector<double> xs{1, 2, 3};
  const auto r = ols(xs, std::vector<double>{2, 4, 6});
  CHECK(r.slope == doctest::Approx(2.0));
  CHECK(std::abs(r.intercept) < 1e-12);
  CHECK(r.r2 == 1.0);
  CHECK(r.p == 0.0);
  CHECK(r.n == 3);

  const auto flat = ols(xs, std::vector<double>{5, 5, 5});
  CHECK(flat.slope == 0.0);
  CHECK(flat.r2 == 0.0);
  CHECK(flat.p == 1.0);

  CHECK_THROWS_AS(ols(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateX);
  CHECK_THROWS_AS(ols(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InvalidArgument);
  CHECK_THROWS_AS(ols(xs, std::vector<double>{1, 2}), LengthMismatch);
}

TEST_CASE("ols against hand-computed sums") {
  // xs = 1..5, ys = 1, 3, 2, 5, 4: Sxx = 10, Sxy = 8, Syy = 10.
  const auto r = ols(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1, 3, 2, 5, 4});
  CHECK(r.slope == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(r.intercept == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(r.r2 == doctest::Approx(0.64).epsilon(1e-14));
  // se = sqrt((Syy - slope Sxy) / (n - 2) / Sxx) = sqrt(3.6 / 3 / 10)
  CHECK(r.slope_stderr == doctest::Approx(std::sqrt(0.12)).epsilon(1e-14));
  const double t = 0.8 / std::sqrt(0.12);
  CHECK(r.p == doctest::Approx(test::student_t_p_quadrature(t, 3)).epsilon(1e-8));
}

TEST_CASE("ols properties") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(12), ys(12);
    for (int i = 0; i < 12; ++i) {
      xs[i] = noise(gen);
      ys[i] = 0.5 * xs[i] + noise(gen);
    }
    const auto base = ols(xs, ys);
    CHECK(base.r2 >= 0.0);
    CHECK(base.r2 <= 1.0);
    CHECK(base.p > 0.0);
    CHECK(base.p <= 1.0);

    auto px = xs, py = ys;
    std::reverse(px.begin(), px.end());
    std::reverse(py.begin(), py.end());
    const auto perm = ols(px, py);
    CHECK(perm.slope == doctest::Approx(base.slope).epsilon(1e-12));
    CHECK(perm.r2 == doctest::Approx(base.r2).epsilon(1e-12));

    std::vector<double> lin(12);
    const double a = noise(gen) + 3.0, b = noise(gen);
    for (int i = 0; i < 12; ++i) lin[i] = a * xs[i] + b;
    CHECK(ols(xs, lin).r2 == doctest::Approx(1.0).epsilon(1e-12));

    // r2 equals the squared Pearson correlation.
    double mx = 0, my = 0;
    for (int i = 0; i < 12; ++i) mx += xs[i] / 12, my += ys[i] / 12;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 12; ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    CHECK(base.r2 == doctest::Approx(sxy * sxy / (sxx * syy)).epsilon(1e-10));
  }
}

TEST_CASE("synthetic slope recovery") {
  int covered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::mt19937_64 gen(1000 + trial);
    std::normal_distribution<double> noise(0.0, 2.0);
    std::uniform_real_distribution<double> ux(0.0, 10.0);
    std::vector<double> xs(60), ys(60);
    for (int i = 0; i < 60; ++i) {
      xs[i] = ux(gen);
      ys[i] = 3.0 * xs[i] + noise(gen);
    }
    const auto r = ols(xs, ys);
    covered += std::abs(r.slope - 3.0) <= 2.0 * r.slope_stderr;
  }
  CHECK(covered >= 190);
}

TEST_CASE("student_t_p against quadrature and reference values") {
  CHECK(student_t_p(0.0, 5) == 1.0);
  CHECK(student_t_p(2.228, 10) == doctest::Approx(0.050).epsilon(0.02));
  CHECK(std::abs(student_t_p(2.228, 10) - 0.050011771817) < 1e-10);
  CHECK(std::abs(student_t_p(3.0, 58) - 0.00397427218436653) < 1e-12);
  CHECK(std::abs(student_t_p(0.5, 3) - 0.651447964848151) < 1e-12);
  CHECK(student_t_p(-3.0, 58) == student_t_p(3.0, 58));

  const double far = student_t_p(1e6, 58);
  CHECK(std::isfinite(far));
  CHECK(far < 1e-15);
  CHECK(far >= 0.0);
  CHECK(student_t_p(INFINITY, 4) == 0.0);

  for (double df : {1.0, 2.0, 5.0, 10.0, 58.0}) {
    double prev = 1.0;
    for (double t = 0.25; t <= 6.0; t += 0.25) {
      const double p = student_t_p(t, df);
      CHECK(p == doctest::Approx(test::student_t_p_quadrature(t, df)).epsilon(1e-7));
      CHECK(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("incomplete beta edges and symmetry") {
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  // I_x(1, 1) = x;  I_x(a, 1) = x^a.
  CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(incomplete_beta(3, 1, 0.6) == doctest::Approx(0.216).epsilon(1e-12));
  CHECK(incomplete_beta(2.5, 4, 0.35) + incomplete_beta(4, 2.5, 0.65) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fpf histogram") {
  const HistogramSpec spec{10, 500, 1000};
  std::vector<FpfRecord> same(7, FpfRecord{0, 1000, 999});
  const auto h = fpf_histogram(same, spec);
  CHECK(h.bins.size() == 50);
  CHECK(h.bins.front().start == 500);
  CHECK(h.bins.back().end == 1000);
  for (const auto& b : h.bins) CHECK(b.count == (b.start == 990 ? 7u : 0u));

  std::vector<FpfRecord> none(4, FpfRecord{0, 1000, std::nullopt});
  const auto hn = fpf_histogram(none, spec);
  CHECK(hn.censored == 4);
  for (const auto& b : hn.bins) CHECK(b.count == 0);

  const std::vector<FpfRecord> mixed{{0, 1000, 500}, {1, 1000, 505}, {2, 1000, 999}, {3, 1000, 12}};
  const auto hm = fpf_histogram(mixed, spec);
  CHECK(hm.bins[0].count == 2);
  CHECK(hm.bins[49].count == 1);
  CHECK(hm.out_of_range == 1);

  CHECK_THROWS_AS(fpf_histogram(mixed, {0, 0, 10}), InvalidArgument);
  CHECK_THROWS_AS(fpf_histogram(mixed, {10, 100, 100}), InvalidArgument);
}
