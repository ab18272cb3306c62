#pragma once

// Statistics for ACR rating analysis: MOS with Student-t intervals, Cohen's h,
// Pearson r, paired t, and one-way repeated-measures ANOVA with partial eta
// squared. Distribution tails use the regularized incomplete beta function
// evaluated by a Lentz continued fraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "wbqoe/error.hpp"

namespace wbqoe::stats {

inline constexpr double kBetaTolerance = 1e-12;

namespace detail {

// Continued fraction for I_x(a, b) (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10'000;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
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
    if (std::fabs(del - 1.0) < kBetaTolerance) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

/// Two-sided p-value for a t statistic.
inline double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

/// Inverse of student_t_cdf, by bisection to machine precision.
inline double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw Error(Errc::OutOfRangeProportion, "quantile probability outside (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Upper tail P(F > f) of the F distribution.
inline double f_survival(double f, double df1, double df2) {
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return std::clamp(incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)), 0.0, 1.0);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::EmptySample, "mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for n = 1.
inline double sample_sd(std::span<const double> v) {
  const double m = mean(v);
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct MosResult {
  std::size_t n = 0;
  double mos = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Mean opinion score with a two-sided 95% Student-t interval.
inline MosResult mos_ci(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::EmptySample, "no scores");
  MosResult r;
  r.n = scores.size();
  r.mos = mean(scores);
  r.sd = sample_sd(scores);
  if (r.n < 2) {
    r.ci_low = r.ci_high = r.mos;
    return r;
  }
  const double half = student_t_quantile(0.975, static_cast<double>(r.n - 1)) * r.sd /
                      std::sqrt(static_cast<double>(r.n));
  r.ci_low = r.mos - half;
  r.ci_high = r.mos + half;
  return r;
}

inline MosResult mos_ci(std::span<const int> scores) {
  std::vector<double> v(scores.begin(), scores.end());
  return mos_ci(std::span<const double>(v));
}

struct CohensH {
  double h = 0.0;
};

/// h = 2 asin(sqrt(p1)) - 2 asin(sqrt(p2)).
inline CohensH cohens_h(double p1, double p2) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0))
    throw Error(Errc::OutOfRangeProportion, "proportions must lie in [0, 1]");
  return {2.0 * std::asin(std::sqrt(p1)) - 2.0 * std::asin(std::sqrt(p2))};
}

struct PearsonR {
  double r = 0.0;
  std::size_t n = 0;
};

inline PearsonR pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "series differ in length");
  if (x.size() < 2) throw Error(Errc::LengthMismatch, "need at least 2 pairs");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ConstantSeries, "a series is constant");
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), x.size()};
}

struct PairedT {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double mean_diff = 0.0;
  bool degenerate = false;  // differences have zero spread
};

/// Paired t on d = x - y. Zero-spread differences return t = 0, p = 1 flagged
/// degenerate.
inline PairedT paired_t(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "series differ in length");
  if (x.size() < 2) throw Error(Errc::LengthMismatch, "need at least 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  PairedT out;
  out.df = static_cast<double>(d.size() - 1);
  out.mean_diff = mean(d);
  const double sd = sample_sd(d);
  if (sd == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.t = out.mean_diff / (sd / std::sqrt(static_cast<double>(d.size())));
  out.p = student_t_two_sided_p(out.t, out.df);
  return out;
}

struct RmAnova {
  double F = 0.0;
  double df_effect = 0.0;
  double df_error = 0.0;
  double p = 1.0;
  double partial_eta_sq = 0.0;
  double ss_total = 0.0;
  double ss_subjects = 0.0;
  double ss_effect = 0.0;
  double ss_error = 0.0;
};

/// One-way within-subjects ANOVA; rows are subjects, columns are levels.
/// NaN cells or ragged rows are missing cells.
inline RmAnova rm_anova(const std::vector<std::vector<double>>& data) {
  const std::size_t n = data.size();
  if (n < 2) throw Error(Errc::TooFewLevels, "need at least 2 subjects");
  const std::size_t k = data.front().size();
  if (k < 2) throw Error(Errc::TooFewLevels, "need at least 2 levels");
  for (const auto& row : data) {
    if (row.size() != k) throw Error(Errc::MissingCells, "ragged data matrix");
    for (double v : row)
      if (std::isnan(v)) throw Error(Errc::MissingCells, "missing cell");
  }
  double grand = 0.0;
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += data[i][j] / static_cast<double>(k);
      col_mean[j] += data[i][j] / static_cast<double>(n);
      grand += data[i][j];
    }
  grand /= static_cast<double>(n * k);

  RmAnova r;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) r.ss_total += (data[i][j] - grand) * (data[i][j] - grand);
  for (double m : row_mean) r.ss_subjects += static_cast<double>(k) * (m - grand) * (m - grand);
  for (double m : col_mean) r.ss_effect += static_cast<double>(n) * (m - grand) * (m - grand);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double e = data[i][j] - row_mean[i] - col_mean[j] + grand;
      r.ss_error += e * e;
    }
  r.df_effect = static_cast<double>(k - 1);
  r.df_error = static_cast<double>((k - 1) * (n - 1));

  // Round-off can leave a tiny positive effect in exactly balanced data.
  const double scale = std::max(r.ss_total, 1.0);
  if (r.ss_effect <= 1e-14 * scale) r.ss_effect = 0.0;
  if (r.ss_error <= 1e-14 * scale) r.ss_error = 0.0;

  if (r.ss_error == 0.0) {
    r.F = r.ss_effect == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p = r.ss_effect == 0.0 ? 1.0 : 0.0;
    r.partial_eta_sq = r.ss_effect == 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.F = (r.ss_effect / r.df_effect) / (r.ss_error / r.df_error);
  r.p = f_survival(r.F, r.df_effect, r.df_error);
  r.partial_eta_sq = r.ss_effect / (r.ss_effect + r.ss_error);
  return r;
}

}  // namespace wbqoe::stats
