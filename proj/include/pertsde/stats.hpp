#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pertsde::stats {

double normal_cdf(double x) noexcept;
/// CDF of |N(0, scale^2)|.
double half_normal_cdf(double x, double scale = 1.0) noexcept;

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|. Sorts a copy.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);
/// Two-sample KS statistic sup |F_n - G_m|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic 1% critical values.
double ks_critical_1pct(std::size_t n) noexcept;
double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) noexcept;

double mean(std::span<const double> v) noexcept;
/// Unbiased sample variance.
double variance(std::span<const double> v) noexcept;
double median(std::span<const double> v);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace pertsde::stats
