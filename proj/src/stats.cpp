// SPDX-License-Identifier: Apache-2.0

#include "logprober/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "logprober/errors.hpp"

namespace logprober {

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 10'000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_tailed_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  const double p = regularized_incomplete_beta(x, df / 2.0, 0.5);
  return std::clamp(p, 0.0, 1.0);
}

TTestResult welch_t_test(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 2 || ys.size() < 2) {
    throw Error(ErrorKind::DegenerateGroups, "each group needs at least two values");
  }
  TTestResult r;
  r.n_x = xs.size();
  r.n_y = ys.size();
  r.mean_x = mean(xs);
  r.mean_y = mean(ys);
  const double vx = sample_variance(xs, r.mean_x) / static_cast<double>(r.n_x);
  const double vy = sample_variance(ys, r.mean_y) / static_cast<double>(r.n_y);
  const double se2 = vx + vy;
  if (!(se2 > 0.0)) throw Error(ErrorKind::DegenerateGroups, "both groups have zero variance");

  r.t = (r.mean_x - r.mean_y) / std::sqrt(se2);
  r.df = se2 * se2 /
         (vx * vx / static_cast<double>(r.n_x - 1) + vy * vy / static_cast<double>(r.n_y - 1));
  r.p_two_tailed = student_t_two_tailed_p(r.t, r.df);
  return r;
}

ConfusionMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  const std::size_t total = tp + fp + fn + tn;
  if (total == 0) throw Error(ErrorKind::MissingLabels, "no labelled items to score");
  ConfusionMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

void to_json(Json& j, const TTestResult& r) {
  j = Json{{"t", r.t},           {"df", r.df},   {"p_two_tailed", r.p_two_tailed},
           {"mean_x", r.mean_x}, {"mean_y", r.mean_y}, {"n_x", r.n_x},
           {"n_y", r.n_y}};
}

void from_json(const Json& j, TTestResult& r) {
  r.t = j.at("t").get<double>();
  r.df = j.at("df").get<double>();
  r.p_two_tailed = j.at("p_two_tailed").get<double>();
  r.mean_x = j.at("mean_x").get<double>();
  r.mean_y = j.at("mean_y").get<double>();
  r.n_x = j.at("n_x").get<std::size_t>();
  r.n_y = j.at("n_y").get<std::size_t>();
}

namespace {
Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
std::optional<double> read_optional(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}
}  // namespace

void to_json(Json& j, const ConfusionMetrics& m) {
  j = Json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}, {"accuracy", m.accuracy}};
  j["precision"] = optional_number(m.precision);
  j["recall"] = optional_number(m.recall);
  j["f1"] = optional_number(m.f1);
}

void from_json(const Json& j, ConfusionMetrics& m) {
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = read_optional(j, "precision");
  m.recall = read_optional(j, "recall");
  m.f1 = read_optional(j, "f1");
}

}  // namespace logprober
