#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pertsde/models.hpp"
#include "pertsde/paths.hpp"
#include "pertsde/picard.hpp"

namespace pertsde {

/// printf("%.17g"): round-trip exact.
std::string format_double(double value);

enum class StudyKind { UniquenessGap, ConvergenceOrder, LawKs, InvariantSweep, PicardRate, Simulation };

std::string_view to_string(StudyKind kind) noexcept;

enum class Comparison { AtMost, AtLeast };

struct Threshold {
    std::string metric;
    Comparison comparison = Comparison::AtMost;
    double value = 0.0;
};

/// Raw per-path values, one row per path in path order.
struct PerPathTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct StudyReport {
    StudyKind kind = StudyKind::Simulation;
    std::vector<std::pair<std::string, std::string>> parameters;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<Threshold> thresholds;
    bool pass = false;
    std::uint64_t master_seed = 0;
    std::size_t n_paths = 0;
    PerPathTable per_path;
    std::vector<std::string> notes;

    bool has_metric(std::string_view name) const noexcept;
    /// Throws std::out_of_range for an unknown metric.
    double metric(std::string_view name) const;
};

/// True iff every threshold names a finite metric that satisfies it.
/// No thresholds means pass (descriptive study).
bool evaluate_pass(const std::vector<std::pair<std::string, double>>& metrics,
                   const std::vector<Threshold>& thresholds);

/// Replaces threshold values by metric name and recomputes pass.
/// Throws std::invalid_argument if a name matches no declared threshold.
void override_thresholds(StudyReport& report, const std::map<std::string, double>& values);

/// Echo of a ProblemSpec as ordered (key, value) strings.
std::vector<std::pair<std::string, std::string>> describe(const ProblemSpec& spec);

/// Path `path_index` of the seed's Brownian family on `grid`, generated on the
/// grid refined by `factor` and coarsened, so every level sees the same noise.
SamplePath coupled_brownian(const TimeGrid& grid, std::size_t factor, std::uint64_t seed,
                            std::uint64_t path_index);

/// Same-noise comparison of two solution methods over grid, 2x and 4x refined.
///
///   doubly:          picard_solve vs stepper
///   max / reflected: stepper with the two tie-break rules, plus the closed
///                    form when sigma = 1 and b = 0 (family 1)
///   max-drift:       Euler vs predictor-max Euler, plus the ordering check
///                    X_k > Y_k => M^X_k >= M^Y_k on every node
///
/// Each method rebuilds its Brownian input independently; the two checksums
/// must agree. Non-Lipschitz coefficients give a descriptive report.
StudyReport uniqueness_gap_study(const ProblemSpec& spec, std::size_t n_paths, const TimeGrid& grid,
                                 std::uint64_t seed);

/// Strong order from coupled refinements (n_steps_levels increasing, each
/// dividing the next, at least three). The gap of level pair l is
/// max_k E|X^l_k - X^{l+1}_k| over the nodes of the coarsest grid; the order
/// is the least-squares slope of log2(gap) against log2(dt).
StudyReport convergence_order_study(const ProblemSpec& spec, double t_end,
                                    const std::vector<std::size_t>& n_steps_levels, std::size_t n_paths,
                                    std::uint64_t seed);

enum class LawKind { MaxLaw, GirsanovMeanOne, SquaredQv };

std::string_view to_string(LawKind kind) noexcept;
std::optional<LawKind> parse_law_kind(std::string_view name) noexcept;

struct LawOptions {
    /// squared_qv: per-path residual bound.
    double qv_residual_threshold = 0.2;
    /// squared_qv: required fraction of paths under the bound.
    double qv_pass_rate = 0.95;
};

/// max_law:           family 1, sigma = 1, b = 0. KS of (1 - alpha) M^X_T against
///                    |N(0, T)|, M^X over continuous time via the Brownian bridge.
/// girsanov_mean_one: any family; mean of exp(girsanov_log_weight(X, W, b)).
/// squared_qv:        reflected family, sigma = 1, b = 0; squared_process_residual.
StudyReport law_ks_study(LawKind kind, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed, const LawOptions& options = {});

struct PicardRateOptions {
    PicardOptions picard;
    std::size_t iteration_budget = 25;
    std::size_t burn_in = 2;
    /// Also rerun every path on [0, 2 t_end] with the same number of steps.
    bool double_horizon = true;
};

/// Super-geometric decay of the Picard deltas on the doubly family.
StudyReport picard_rate_study(const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed, const PicardRateOptions& options = {});

/// Structural checks on simulated paths: identity residual, exact running
/// extrema, local time monotone and flat off zero, nonnegativity and
/// complementarity for the reflected family, step faults.
StudyReport invariant_sweep(const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed);

}  // namespace pertsde
