#include "pertsde/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pertsde::stats {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double half_normal_cdf(double x, double scale) noexcept {
    return x <= 0.0 ? 0.0 : std::erf(x / (scale * std::numbers::sqrt2));
}

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        const double f = cdf(sorted[j]);
        d = std::max(d, std::max(static_cast<double>(j + 1) / n - f, f - static_cast<double>(j) / n));
    }
    return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size());
    const double m = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return d;
}

double ks_critical_1pct(std::size_t n) noexcept { return 1.63 / std::sqrt(static_cast<double>(n)); }

double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) noexcept {
    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    return 1.63 * std::sqrt((nn + mm) / (nn * mm));
}

double mean(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) noexcept {
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
}

double median(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const std::size_t h = s.size() / 2;
    return s.size() % 2 == 1 ? s[h] : 0.5 * (s[h - 1] + s[h]);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("fit_line: need at least two (x, y) pairs");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - fit.intercept - fit.slope * x[k];
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(x.size()));
    return fit;
}

}  // namespace pertsde::stats
