// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "logprober/types.hpp"

namespace logprober {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double x, double a, double b);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom (df may be
/// fractional).
double student_t_two_tailed_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_tailed = 1.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
};

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom. Throws DegenerateGroups when a group has fewer than two values
/// or both sample variances are zero.
TTestResult welch_t_test(std::span<const double> xs, std::span<const double> ys);

/// Positive class is "contaminated" throughout.
struct ConfusionMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

ConfusionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

void to_json(Json& j, const TTestResult& r);
void from_json(const Json& j, TTestResult& r);
void to_json(Json& j, const ConfusionMetrics& m);
void from_json(const Json& j, ConfusionMetrics& m);

}  // namespace logprober
