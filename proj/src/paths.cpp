#include "pertsde/paths.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pertsde/random.hpp"

namespace pertsde {

TimeGrid::TimeGrid(double t_end, std::size_t n_steps) : t_end_(t_end), n_steps_(n_steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw std::invalid_argument("TimeGrid: t_end must be finite and > 0");
    }
    if (n_steps == 0) {
        throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    }
    dt_ = t_end / static_cast<double>(n_steps);
}

SamplePath::SamplePath(TimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n_nodes()) {
        throw std::invalid_argument("SamplePath: expected " + std::to_string(grid_.n_nodes()) +
                                    " values, got " + std::to_string(values_.size()));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            throw std::invalid_argument("SamplePath: non-finite value at node " + std::to_string(k));
        }
    }
}

SamplePath generate_brownian(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index) {
    const CounterStream stream(seed, path_index, stream_domain::kBrownian);
    const double sqrt_dt = std::sqrt(grid.dt());
    const std::size_t n = grid.n_steps();

    std::vector<double> w(n + 1);
    w[0] = 0.0;
    for (std::size_t k = 0; k < n; k += 2) {
        // One Box-Muller pair feeds increments k and k+1; identical to
        // stream.normal(k), stream.normal(k + 1).
        const double u1 = stream.uniform(k);
        const double u2 = stream.uniform(k + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        w[k + 1] = w[k] + sqrt_dt * (r * std::cos(theta));
        if (k + 1 < n) {
            w[k + 2] = w[k + 1] + sqrt_dt * (r * std::sin(theta));
        }
    }
    return SamplePath(grid, std::move(w));
}

SamplePath coarsen(const SamplePath& path, std::size_t factor) {
    const auto& grid = path.grid();
    if (factor == 0 || grid.n_steps() % factor != 0) {
        throw std::invalid_argument("coarsen: factor " + std::to_string(factor) +
                                    " does not divide n_steps " + std::to_string(grid.n_steps()));
    }
    const std::size_t n_coarse = grid.n_steps() / factor;
    std::vector<double> out(n_coarse + 1);
    for (std::size_t k = 0; k <= n_coarse; ++k) {
        out[k] = path[k * factor];
    }
    return SamplePath(TimeGrid(grid.t_end(), n_coarse), std::move(out));
}

void running_max_inplace(std::span<double> values) noexcept {
    for (std::size_t k = 1; k < values.size(); ++k) {
        values[k] = std::max(values[k], values[k - 1]);
    }
}

void running_min_inplace(std::span<double> values) noexcept {
    for (std::size_t k = 1; k < values.size(); ++k) {
        values[k] = std::min(values[k], values[k - 1]);
    }
}

SamplePath running_max(const SamplePath& path) {
    std::vector<double> out(path.values().begin(), path.values().end());
    running_max_inplace(out);
    return SamplePath(path.grid(), std::move(out));
}

SamplePath running_min(const SamplePath& path) {
    std::vector<double> out(path.values().begin(), path.values().end());
    running_min_inplace(out);
    return SamplePath(path.grid(), std::move(out));
}

Reflection skorohod_reflect(const SamplePath& driver) {
    if (driver.front() < 0.0) {
        throw std::invalid_argument("skorohod_reflect: driver must start at a value >= 0");
    }
    const std::size_t n = driver.size();
    std::vector<double> push(n);
    std::vector<double> reflected(n);
    double level = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        level = std::max(level, -driver[k]);
        push[k] = level;
        // x + (-x) == 0 exactly, so reflected is 0 wherever the push moves.
        reflected[k] = driver[k] + level;
    }
    return {SamplePath(driver.grid(), std::move(reflected)),
            SamplePath(driver.grid(), std::move(push))};
}

SamplePath bridge_running_max(const SamplePath& w, std::uint64_t seed, std::uint64_t path_index) {
    const CounterStream stream(seed, path_index, stream_domain::kBridgeMax);
    const double dt = w.grid().dt();
    std::vector<double> out(w.size());
    out[0] = w[0];
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const double a = w[k];
        const double b = w[k + 1];
        const double d = b - a;
        const double bridge_max = 0.5 * (a + b + std::sqrt(d * d - 2.0 * dt * std::log(stream.uniform(k))));
        out[k + 1] = std::max(out[k], bridge_max);
    }
    return SamplePath(w.grid(), std::move(out));
}

std::uint64_t checksum(const SamplePath& path) noexcept {
    constexpr std::uint64_t kPrime = 0x100000001b3ULL;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::uint64_t word) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (word >> (8 * byte)) & 0xffULL;
            h *= kPrime;
        }
    };
    feed(std::bit_cast<std::uint64_t>(path.grid().t_end()));
    feed(path.grid().n_steps());
    for (double v : path.values()) {
        feed(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}  // namespace pertsde
