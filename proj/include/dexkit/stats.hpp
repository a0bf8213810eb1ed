#pragma once

#include <span>
#include <vector>

namespace dexkit::stats {

double mean(std::span<const double> v);
double sample_stddev(std::span<const double> v);

// Regularized incomplete gamma P(a, x) and the upper tail Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

// Pearson chi-square goodness-of-fit p-value against equal bin probabilities.
double chi_square_uniform_pvalue(std::span<const long> counts);

// One-sided paired t-test p-value for H1: mean(a - b) < 0.
// Returns 1.0 when the difference variance is zero and the mean is >= 0,
// and 0.0 when it is zero with a negative mean.
double paired_t_test_less(std::span<const double> a, std::span<const double> b);

// Two-sided Student-t survival helper: P(T_dof > t).
double student_t_sf(double t, double dof);

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// Least-squares slope of y against x.
double slope(std::span<const double> x, std::span<const double> y);

}  // namespace dexkit::stats
