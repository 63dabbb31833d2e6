#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "countlab/evaluation.hpp"

namespace countlab::analysis {

// -ln(loss); throws NonPositiveLoss for loss <= 0.
double neg_log_loss(double loss);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double p = 1.0;             // two-sided t-test on the slope
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

// Simple least squares. Requires n >= 3 (InvalidArgument) and non-constant
// xs (DegenerateX). A perfect fit reports r2 = 1 and p = 0; constant ys
// report slope 0, r2 = 0, p = 1.
RegressionResult ols(std::span<const double> xs, std::span<const double> ys);

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees of
// freedom, as I_{df/(df+t^2)}(df/2, 1/2).
double student_t_p(double t, double df);

struct HistogramSpec {
  std::size_t bin_width = 10;
  std::size_t lo = 0;
  std::size_t hi = 1000;
};

struct HistogramBin {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t count = 0;
};

struct Histogram {
  std::vector<HistogramBin> bins;
  std::size_t censored = 0;      // records without a failure
  std::size_t out_of_range = 0;  // failures outside [lo, hi)
};

Histogram fpf_histogram(std::span<const evaluation::FpfRecord> records, const HistogramSpec& spec);

}  // namespace countlab::analysis
