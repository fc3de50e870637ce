#include "pertsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pertsde {

ExtremaDecomposition explicit_alpha_perturbed(const SamplePath& w, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("explicit_alpha_perturbed: requires alpha in (0, 1)");
    }
    const std::size_t n = w.size();
    const double gain = alpha / (1.0 - alpha);
    std::vector<double> w_max(w.values().begin(), w.values().end());
    running_max_inplace(w_max);

    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = w[k] + gain * w_max[k];
    std::vector<double> x_max = x;
    std::vector<double> x_min = x;
    running_max_inplace(x_max);
    running_min_inplace(x_min);

    const auto& grid = w.grid();
    return {SamplePath(grid, std::move(x)), SamplePath(grid, std::move(x_max)), SamplePath(grid, std::move(x_min)),
            SamplePath(grid, std::vector<double>(n, 0.0)),
            SamplePath(grid, std::vector<double>(w.values().begin(), w.values().end()))};
}

double girsanov_log_weight(const SamplePath& x, const SamplePath& w, const Coefficient& b) {
    if (!(x.grid() == w.grid())) {
        throw std::invalid_argument("girsanov_log_weight: x and w are on different grids");
    }
    const auto& grid = w.grid();
    const double dt = grid.dt();
    double stochastic = 0.0;
    double quadratic = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double drift = b(grid.time(k), x[k]);
        stochastic += drift * (w[k + 1] - w[k]);
        quadratic += drift * drift;
    }
    return -stochastic - 0.5 * quadratic * dt;
}

namespace {

// Clock in units of dt, so integer-valued clocks (sigma^2 integral) stay exact.
std::vector<double> clock_units(const SamplePath& y, const Coefficient& sigma) {
    const auto& grid = y.grid();
    std::vector<double> units(y.size());
    units[0] = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double s = sigma(grid.time(k), y[k]);
        units[k + 1] = units[k] + s * s;
    }
    return units;
}

}  // namespace

SamplePath time_change_clock(const SamplePath& y, const Coefficient& sigma) {
    std::vector<double> units = clock_units(y, sigma);
    for (double& u : units) u *= y.grid().dt();
    return SamplePath(y.grid(), std::move(units));
}

SamplePath time_change(const SamplePath& y, const Coefficient& sigma) {
    if (!sigma.lower_bound_epsilon || !(*sigma.lower_bound_epsilon > 0.0)) {
        throw std::invalid_argument("time_change: sigma must carry a lower bound epsilon > 0");
    }
    const auto& grid = y.grid();
    const std::vector<double> units = clock_units(y, sigma);
    const auto n_out = static_cast<std::size_t>(std::floor(units.back()));
    if (n_out == 0) {
        throw std::invalid_argument("time_change: terminal clock is shorter than one step");
    }
    std::vector<double> out(n_out + 1);
    std::size_t k = 0;
    for (std::size_t target = 0; target <= n_out; ++target) {
        while (units[k] < static_cast<double>(target)) ++k;
        out[target] = y[k];
    }
    return SamplePath(TimeGrid(static_cast<double>(n_out) * grid.dt(), n_out), std::move(out));
}

double squared_process_residual(const ExtremaDecomposition& reflected) {
    const auto& x = reflected.x;
    for (double v : x.values()) {
        if (v < 0.0) {
            throw std::invalid_argument("squared_process_residual: input is not a reflected (nonnegative) solution");
        }
    }
    const double dt = x.grid().dt();
    const std::size_t n = x.size();
    std::vector<double> qv(n, 0.0);
    std::vector<double> drift(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double y0 = x[k] * x[k];
        const double y1 = x[k + 1] * x[k + 1];
        qv[k + 1] = qv[k] + (y1 - y0) * (y1 - y0);
        drift[k + 1] = drift[k] + 4.0 * y0 * dt;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        worst = std::max(worst, std::abs(qv[k] - drift[k]));
    }
    return worst / (1.0 + qv.back());
}

}  // namespace pertsde
