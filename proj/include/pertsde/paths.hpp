#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pertsde {

/// Uniform time grid t_k = k * dt on [0, t_end], k = 0..n_steps.
class TimeGrid {
public:
    TimeGrid(double t_end, std::size_t n_steps);

    double t_end() const noexcept { return t_end_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t n_nodes() const noexcept { return n_steps_ + 1; }
    double dt() const noexcept { return dt_; }

    /// Node time; the last node is t_end exactly.
    double time(std::size_t k) const noexcept {
        return k == n_steps_ ? t_end_ : static_cast<double>(k) * dt_;
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double t_end_;
    std::size_t n_steps_;
    double dt_;
};

/// Values of a scalar process on the nodes of a TimeGrid. All values finite.
class SamplePath {
public:
    SamplePath(TimeGrid grid, std::vector<double> values);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double front() const noexcept { return values_.front(); }
    double back() const noexcept { return values_.back(); }

    /// Moves the values out; the path is left empty.
    std::vector<double> release() && { return std::move(values_); }

    bool operator==(const SamplePath&) const = default;

private:
    TimeGrid grid_;
    std::vector<double> values_;
};

/// A solution path with its running extrema and local time at zero.
///
/// `driver` is the accumulated noise-plus-drift term A_k that the solution was
/// built from, so the defining identity of each family can be re-checked.
struct ExtremaDecomposition {
    SamplePath x;
    SamplePath max;
    SamplePath min;
    SamplePath local_time;
    SamplePath driver;

    const TimeGrid& grid() const noexcept { return x.grid(); }
};

/// Brownian path for stream (seed, path_index). W_0 = 0 and the increments are
/// sqrt(dt) times the CounterStream normals 0..n_steps-1.
SamplePath generate_brownian(const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t path_index = 0);

/// Keeps every factor-th node. Throws if factor does not divide n_steps.
SamplePath coarsen(const SamplePath& path, std::size_t factor);

SamplePath running_max(const SamplePath& path);
SamplePath running_min(const SamplePath& path);

void running_max_inplace(std::span<double> values) noexcept;
void running_min_inplace(std::span<double> values) noexcept;

struct Reflection {
    SamplePath reflected;
    SamplePath local_time;
};

/// Skorohod map at zero: local_time_k = max(0, max_{j<=k} -driver_j) and
/// reflected = driver + local_time. Requires driver_0 >= 0.
Reflection skorohod_reflect(const SamplePath& driver);

/// Running maximum of the continuous Brownian path through the nodes of `w`.
///
/// The maximum of the Brownian bridge on each step [t_k, t_{k+1}] is sampled
/// exactly as (a + b + sqrt((b - a)^2 - 2 dt log U)) / 2 with U drawn from the
/// kBridgeMax stream of (seed, path_index). Node k holds max over [0, t_k].
SamplePath bridge_running_max(const SamplePath& w, std::uint64_t seed,
                              std::uint64_t path_index = 0);

/// FNV-1a over the grid and the IEEE bit patterns of the values.
std::uint64_t checksum(const SamplePath& path) noexcept;

}  // namespace pertsde
