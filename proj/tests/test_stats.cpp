#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "wbqoe/schedule.hpp"
#include "wbqoe/stats.hpp"

using namespace wbqoe;
using namespace wbqoe::stats;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::InvalidConfig;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 10.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.unit() - 0.5) * scale;
  return v;
}

}  // namespace

TEST(Distributions, IncompleteBeta) {
  EXPECT_NEAR(incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
  EXPECT_NEAR(incomplete_beta(0.5, 0.5, 0.3), 0.36901011956554536, 1e-12);
  EXPECT_NEAR(incomplete_beta(10, 2, 0.9), 0.6973568802000002, 1e-12);
  EXPECT_NEAR(incomplete_beta(1.5, 20, 0.05), 0.4434212016856899, 1e-12);
  EXPECT_NEAR(incomplete_beta(50, 60, 0.45), 0.46423529143060444, 1e-11);
  EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
}

TEST(Distributions, StudentT) {
  EXPECT_NEAR(student_t_cdf(0.5, 3), 0.6742760175759246, 1e-12);
  EXPECT_NEAR(student_t_cdf(-1.2, 7), 0.1345859684136032, 1e-12);
  EXPECT_NEAR(student_t_cdf(2.5, 10), 0.9842765778816956, 1e-12);
  EXPECT_NEAR(student_t_cdf(4.0, 2), 0.9714045207910317, 1e-12);
  EXPECT_NEAR(student_t_cdf(1.96, 1000), 0.9748634075221256, 1e-12);
  EXPECT_NEAR(student_t_quantile(0.975, 4), 2.7764451051977987, 1e-9);
  EXPECT_NEAR(student_t_quantile(0.975, 1), 12.706204736432095, 1e-8);
  EXPECT_NEAR(student_t_quantile(0.975, 23), 2.0686576104190406, 1e-9);
  EXPECT_NEAR(student_t_quantile(0.995, 10), 3.16927267261695, 1e-9);
  EXPECT_NEAR(student_t_quantile(0.025, 4), -2.7764451051977987, 1e-9);
}

TEST(Distributions, FSurvival) {
  EXPECT_NEAR(f_survival(3, 2, 6), 0.125, 1e-12);
  EXPECT_NEAR(f_survival(0.5, 4, 20), 0.7360371889109241, 1e-12);
  EXPECT_NEAR(f_survival(10, 1, 5), 0.02503101581845294, 1e-12);
  EXPECT_NEAR(f_survival(33.99, 6, 138) / 5.806835483245986e-25, 1.0, 1e-8);
  EXPECT_EQ(f_survival(0, 2, 6), 1.0);
}

TEST(Mos, ConstantScores) {
  const std::vector<int> s = {5, 5, 5, 5};
  const auto r = mos_ci(std::span<const int>(s));
  EXPECT_EQ(r.mos, 5.0);
  EXPECT_EQ(r.sd, 0.0);
  EXPECT_EQ(r.ci_low, 5.0);
  EXPECT_EQ(r.ci_high, 5.0);
}

TEST(Mos, OneToFive) {
  const std::vector<int> s = {1, 2, 3, 4, 5};
  const auto r = mos_ci(std::span<const int>(s));
  EXPECT_DOUBLE_EQ(r.mos, 3.0);
  EXPECT_NEAR(r.sd, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(r.ci_low, 1.0367568385224393, 1e-9);
  EXPECT_NEAR(r.ci_high, 4.9632431614775605, 1e-9);
}

TEST(Mos, EightScores) {
  const std::vector<int> s = {4, 4, 5, 3, 4, 2, 5, 4};
  const auto r = mos_ci(std::span<const int>(s));
  EXPECT_NEAR(r.mos, 3.875, 1e-12);
  EXPECT_NEAR(r.sd, 0.9910312089651149, 1e-12);
  EXPECT_NEAR(r.ci_low, 3.0464771753171775, 1e-9);
  EXPECT_NEAR(r.ci_high, 4.703522824682823, 1e-9);
}

TEST(Mos, SingleAndEmpty) {
  const std::vector<int> one = {3};
  const auto r = mos_ci(std::span<const int>(one));
  EXPECT_EQ(r.ci_low, 3.0);
  EXPECT_EQ(r.ci_high, 3.0);
  EXPECT_EQ(error_of([] { mos_ci(std::span<const double>{}); }), Errc::EmptySample);
}

TEST(Mos, IntervalContainsMeanAndShrinks) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(2 + rng.uniform(30));
    for (auto& x : s) x = static_cast<double>(1 + rng.uniform(5));
    const auto r = mos_ci(s);
    ASSERT_LE(r.ci_low, r.mos);
    ASSERT_GE(r.ci_high, r.mos);
  }
  // Fixed sd: the two-point pattern {1, 5} repeated keeps sd near constant.
  double prev = 1e9;
  for (std::size_t n = 2; n < 40; ++n) {
    std::vector<double> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(i % 2 ? 5.0 : 1.0);
    const double width = (mos_ci(s).ci_high - mos_ci(s).ci_low) / mos_ci(s).sd;
    ASSERT_LT(width, prev);
    prev = width;
  }
}

TEST(CohensH, Anchors) {
  EXPECT_NEAR(cohens_h(1.0, 0.5).h, std::numbers::pi / 2.0, 1e-12);
  EXPECT_NEAR(cohens_h(1.0, 0.5).h, 1.5707963267948963, 1e-12);
  EXPECT_NEAR(cohens_h(0.94, 0.5).h, 1.0758622004540006, 1e-12);
  EXPECT_NEAR(cohens_h(0.86, 0.5).h, 0.8038023189330297, 1e-12);
}

TEST(CohensH, Properties) {
  Rng rng(1);
  for (int i = 0; i < 10'000; ++i) {
    const double a = rng.unit(), b = rng.unit();
    ASSERT_EQ(cohens_h(a, b).h, -cohens_h(b, a).h);
    ASSERT_EQ(cohens_h(a, a).h, 0.0);
    ASSERT_LE(std::fabs(cohens_h(a, b).h), std::numbers::pi);
  }
  EXPECT_NEAR(cohens_h(1.0, 0.0).h, std::numbers::pi, 1e-15);
  EXPECT_EQ(error_of([] { cohens_h(1.1, 0.5); }), Errc::OutOfRangeProportion);
  EXPECT_EQ(error_of([] { cohens_h(0.5, -0.01); }), Errc::OutOfRangeProportion);
}

TEST(Pearson, Examples) {
  const std::vector<double> x = {1, 2, 3};
  const std::vector<double> neg = {-1, -2, -3};
  EXPECT_DOUBLE_EQ(pearson_r(x, x).r, 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(x, neg).r, -1.0);
  const std::vector<double> a = {1.2, 2.3, 2.9, 4.1, 5.5, 6.0, 7.2};
  const std::vector<double> b = {2.0, 2.9, 3.7, 4.0, 6.1, 5.8, 7.9};
  EXPECT_NEAR(pearson_r(a, b).r, 0.9812917043976273, 1e-12);
}

TEST(Pearson, MatchesRawSumFormula) {
  Rng rng(20);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_vec(rng, 20), y = random_vec(rng, 20);
    // n*Sxy - Sx*Sy over the root of the matching variance terms.
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      sx += x[i];
      sy += y[i];
      sxx += static_cast<long double>(x[i]) * x[i];
      syy += static_cast<long double>(y[i]) * y[i];
      sxy += static_cast<long double>(x[i]) * y[i];
    }
    const long double n = 20;
    const double expected =
        static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
    ASSERT_NEAR(pearson_r(x, y).r, expected, 1e-12);
  }
}

TEST(Pearson, AffineInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = random_vec(rng, 10), y = random_vec(rng, 10);
    const double a = (rng.unit() - 0.5) * 8.0, c = (rng.unit() - 0.5) * 100.0;
    if (std::fabs(a) < 1e-3) continue;
    std::vector<double> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + c;
    ASSERT_NEAR(pearson_r(ax, y).r, (a > 0 ? 1 : -1) * pearson_r(x, y).r, 1e-9);
  }
}

TEST(Pearson, Errors) {
  const std::vector<double> x = {1, 2, 3}, short_y = {1, 2}, flat = {2, 2, 2};
  EXPECT_EQ(error_of([&] { pearson_r(x, short_y); }), Errc::LengthMismatch);
  EXPECT_EQ(error_of([&] { pearson_r(x, flat); }), Errc::ConstantSeries);
}

TEST(PairedT, EightPairOracle) {
  const std::vector<double> a = {200, 174, 198, 170, 179, 182, 193, 209};
  const std::vector<double> b = {185, 169, 173, 173, 188, 186, 175, 180};
  const auto r = paired_t(a, b);
  EXPECT_NEAR(r.t, 1.8839207264029945, 1e-9);
  EXPECT_NEAR(r.p, 0.10157895109718501, 1e-9);
  EXPECT_NEAR(r.mean_diff, 9.5, 1e-12);
  EXPECT_EQ(r.df, 7.0);
}

TEST(PairedT, DegenerateAndIdentical) {
  const std::vector<double> x = {1, 2, 3, 4}, y = {0, 1, 2, 3};
  auto r = paired_t(x, x);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  r = paired_t(x, y);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  const std::vector<double> three = {1, 2, 3};
  EXPECT_EQ(error_of([&] { paired_t(x, three); }), Errc::LengthMismatch);
}

TEST(PairedT, SignFlip) {
  Rng rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.uniform(20);
    const auto x = random_vec(rng, n), y = random_vec(rng, n);
    ASSERT_EQ(paired_t(x, y).t, -paired_t(y, x).t);
    ASSERT_NEAR(paired_t(x, y).p, paired_t(y, x).p, 1e-15);
  }
}

TEST(RmAnova, TextbookOracle) {
  const std::vector<std::vector<double>> d = {{45, 50, 55}, {42, 42, 45}, {36, 41, 43}, {39, 35, 40}};
  const auto r = rm_anova(d);
  EXPECT_NEAR(r.ss_total, 344.25, 1e-9);
  EXPECT_NEAR(r.ss_subjects, 248.25, 1e-9);
  EXPECT_NEAR(r.ss_effect, 58.5, 1e-9);
  EXPECT_NEAR(r.ss_error, 37.5, 1e-9);
  EXPECT_NEAR(r.F, 4.68, 1e-9);
  EXPECT_EQ(r.df_effect, 2.0);
  EXPECT_EQ(r.df_error, 6.0);
  EXPECT_NEAR(r.p, 0.059604644775390625, 1e-9);
  EXPECT_NEAR(r.partial_eta_sq, 0.609375, 1e-12);
}

TEST(RmAnova, TwoLevelsAgreeWithPairedT) {
  const std::vector<std::vector<double>> d = {{45, 50}, {42, 42}, {36, 41}, {39, 35}};
  EXPECT_NEAR(rm_anova(d).F, 0.4736842105263156, 1e-9);
  Rng rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.uniform(15);
    std::vector<std::vector<double>> m(n);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = (rng.unit() - 0.5) * 10;
      b[i] = (rng.unit() - 0.5) * 10;
      m[i] = {a[i], b[i]};
    }
    const double t = paired_t(a, b).t;
    const double F = rm_anova(m).F;
    ASSERT_NEAR(F, t * t, 1e-9 * std::max(1.0, t * t));
    ASSERT_NEAR(rm_anova(m).p, paired_t(a, b).p, 1e-9);
  }
}

TEST(RmAnova, DecompositionIdentity) {
  Rng rng(24);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 2 + rng.uniform(12), k = 2 + rng.uniform(7);
    std::vector<std::vector<double>> m(n);
    for (auto& row : m) row = random_vec(rng, k, 100.0);
    const auto r = rm_anova(m);
    ASSERT_NEAR(r.ss_subjects + r.ss_effect + r.ss_error, r.ss_total, 1e-9 * r.ss_total);
    ASSERT_GE(r.F, 0.0);
    ASSERT_GE(r.partial_eta_sq, 0.0);
    ASSERT_LE(r.partial_eta_sq, 1.0);
    ASSERT_GE(r.p, 0.0);
    ASSERT_LE(r.p, 1.0);
  }
}

TEST(RmAnova, NullEffect) {
  const std::vector<std::vector<double>> d = {{1, 2, 3}, {3, 1, 2}, {2, 3, 1}};
  const auto r = rm_anova(d);
  EXPECT_EQ(r.ss_effect, 0.0);
  EXPECT_EQ(r.F, 0.0);
}

TEST(RmAnova, Errors) {
  EXPECT_EQ(error_of([] { rm_anova({{1, 2, 3}}); }), Errc::TooFewLevels);
  EXPECT_EQ(error_of([] { rm_anova({{1}, {2}}); }), Errc::TooFewLevels);
  EXPECT_EQ(error_of([] { rm_anova({{1, 2}, {3}}); }), Errc::MissingCells);
  EXPECT_EQ(error_of([] { rm_anova({{1, 2}, {3, std::nan("")}}); }), Errc::MissingCells);
}
