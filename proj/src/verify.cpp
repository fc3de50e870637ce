#include "pertsde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pertsde/measure.hpp"
#include "pertsde/parallel.hpp"
#include "pertsde/stats.hpp"
#include "pertsde/stepper.hpp"

namespace pertsde {

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string_view to_string(StudyKind kind) noexcept {
    switch (kind) {
        case StudyKind::UniquenessGap: return "uniqueness_gap";
        case StudyKind::ConvergenceOrder: return "convergence_order";
        case StudyKind::LawKs: return "law_ks";
        case StudyKind::InvariantSweep: return "invariant_sweep";
        case StudyKind::PicardRate: return "picard_rate";
        case StudyKind::Simulation: return "simulation";
    }
    return "unknown";
}

std::string_view to_string(LawKind kind) noexcept {
    switch (kind) {
        case LawKind::MaxLaw: return "max_law";
        case LawKind::GirsanovMeanOne: return "girsanov_mean_one";
        case LawKind::SquaredQv: return "squared_qv";
    }
    return "unknown";
}

std::optional<LawKind> parse_law_kind(std::string_view name) noexcept {
    for (LawKind kind : {LawKind::MaxLaw, LawKind::GirsanovMeanOne, LawKind::SquaredQv}) {
        if (name == to_string(kind)) return kind;
    }
    return std::nullopt;
}

bool StudyReport::has_metric(std::string_view name) const noexcept {
    return std::any_of(metrics.begin(), metrics.end(), [&](const auto& m) { return m.first == name; });
}

double StudyReport::metric(std::string_view name) const {
    for (const auto& [key, value] : metrics) {
        if (key == name) return value;
    }
    throw std::out_of_range("StudyReport: no metric named " + std::string(name));
}

bool evaluate_pass(const std::vector<std::pair<std::string, double>>& metrics,
                   const std::vector<Threshold>& thresholds) {
    for (const Threshold& t : thresholds) {
        auto it = std::find_if(metrics.begin(), metrics.end(), [&](const auto& m) { return m.first == t.metric; });
        if (it == metrics.end() || !std::isfinite(it->second)) return false;
        const bool ok = t.comparison == Comparison::AtMost ? it->second <= t.value : it->second >= t.value;
        if (!ok) return false;
    }
    return true;
}

void override_thresholds(StudyReport& report, const std::map<std::string, double>& values) {
    for (const auto& [name, value] : values) {
        bool found = false;
        for (Threshold& t : report.thresholds) {
            if (t.metric == name) {
                t.value = value;
                found = true;
            }
        }
        if (!found) {
            throw std::invalid_argument("threshold." + name + ": study " + std::string(to_string(report.kind)) +
                                        " declares no such threshold");
        }
    }
    report.pass = evaluate_pass(report.metrics, report.thresholds);
}

std::vector<std::pair<std::string, std::string>> describe(const ProblemSpec& spec) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("family", std::string(to_string(spec.family)));
    if (spec.family == Family::MaxDrift) {
        out.emplace_back("max_drift", spec.max_drift.name);
    } else {
        out.emplace_back("sigma", spec.sigma.name);
        out.emplace_back("b", spec.b.name);
        out.emplace_back("alpha", format_double(spec.params.alpha));
        out.emplace_back("beta", format_double(spec.params.beta));
        if (spec.params.h_transform) out.emplace_back("h", spec.params.h_transform->name);
        if (spec.params.alpha_of_t) out.emplace_back("alpha_t", spec.params.alpha_of_t->name);
    }
    out.emplace_back("initial", format_double(spec.initial));
    return out;
}

SamplePath coupled_brownian(const TimeGrid& grid, std::size_t factor, std::uint64_t seed,
                            std::uint64_t path_index) {
    const TimeGrid fine(grid.t_end(), grid.n_steps() * factor);
    return coarsen(generate_brownian(fine, seed, path_index), factor);
}

namespace {

void add_grid(StudyReport& report, const TimeGrid& grid) {
    report.parameters.emplace_back("t_end", format_double(grid.t_end()));
    report.parameters.emplace_back("n_steps", std::to_string(grid.n_steps()));
}

void require_valid(const ProblemSpec& spec, double horizon, const char* who) {
    const ValidationResult v = validate_params(spec, horizon);
    if (!v.schemes_defined()) throw std::invalid_argument(std::string(who) + ": " + v.summary());
}

bool lipschitz_coefficients(const ProblemSpec& spec) {
    if (spec.family == Family::MaxDrift) return true;
    return spec.sigma.claims_lipschitz && spec.b.claims_lipschitz;
}

bool unit_noise_no_drift(const ProblemSpec& spec) {
    return spec.sigma.is_constant(1.0) && spec.b.is_constant(0.0) && !spec.params.h_transform &&
           !spec.params.alpha_of_t;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
}

void finish(StudyReport& report) { report.pass = evaluate_pass(report.metrics, report.thresholds); }

constexpr std::size_t kRefinements = 3;
constexpr double kShrinkFactor = 1.3;
constexpr double kGapFloor = 1e-9;

struct GapRow {
    double gap[kRefinements] = {};
    double oracle_gap[kRefinements] = {};
    double ordering_violations = 0;
    double coupling_mismatches = 0;
    double picard_nonconverged = 0;
};

}  // namespace

StudyReport uniqueness_gap_study(const ProblemSpec& spec, std::size_t n_paths, const TimeGrid& grid,
                                 std::uint64_t seed) {
    if (n_paths == 0) throw std::invalid_argument("uniqueness_gap_study: n_paths must be positive");
    require_valid(spec, grid.t_end(), "uniqueness_gap_study");
    const bool doubly = spec.family == Family::DoublyPerturbed;
    const bool max_drift = spec.family == Family::MaxDrift;
    const bool oracle = spec.family == Family::MaxPerturbed && unit_noise_no_drift(spec);
    constexpr std::size_t finest = std::size_t{1} << (kRefinements - 1);

    auto rows = parallel_map<GapRow>(n_paths, [&](std::size_t p) {
        GapRow row;
        for (std::size_t level = 0; level < kRefinements; ++level) {
            const TimeGrid g(grid.t_end(), grid.n_steps() << level);
            const std::size_t factor = finest >> level;
            const SamplePath wa = coupled_brownian(g, factor, seed, p);
            const SamplePath wb = coupled_brownian(g, factor, seed, p);
            if (checksum(wa) != checksum(wb)) row.coupling_mismatches += 1;

            if (doubly) {
                const PicardReport pr = picard_solve(spec, wa);
                if (!pr.converged) row.picard_nonconverged += 1;
                row.gap[level] = sup_distance(pr.final.x.values(), simulate(spec, wb).x.values());
            } else if (max_drift) {
                const auto a = simulate(spec, wa);
                const auto b = simulate(spec, wb, {.max_drift_predictor = true});
                row.gap[level] = sup_distance(a.x.values(), b.x.values());
                for (std::size_t k = 0; k < a.x.size(); ++k) {
                    if (a.x[k] > b.x[k] && a.max[k] < b.max[k]) row.ordering_violations += 1;
                    if (b.x[k] > a.x[k] && b.max[k] < a.max[k]) row.ordering_violations += 1;
                }
            } else {
                const auto a = simulate(spec, wa, {.tie = TieBreak::KeepExtremum});
                const auto b = simulate(spec, wb, {.tie = TieBreak::NewExtremum});
                row.gap[level] = sup_distance(a.x.values(), b.x.values());
                if (oracle) {
                    const auto exact = explicit_alpha_perturbed(wa, spec.params.alpha);
                    row.oracle_gap[level] = sup_distance(a.x.values(), exact.x.values());
                }
            }
        }
        return row;
    });

    StudyReport report;
    report.kind = StudyKind::UniquenessGap;
    report.parameters = describe(spec);
    add_grid(report, grid);
    report.parameters.emplace_back("refinements", std::to_string(kRefinements));
    report.parameters.emplace_back("method_a", doubly ? "picard" : max_drift ? "euler" : "stepper_keep_extremum");
    report.parameters.emplace_back("method_b", doubly ? "stepper" : max_drift ? "euler_predictor_max"
                                                                               : "stepper_new_extremum");
    report.master_seed = seed;
    report.n_paths = n_paths;
    report.notes.push_back(
        "pathwise uniqueness is measured as the gap between two solution methods driven by the same "
        "Brownian path, tracked under grid refinement");

    report.per_path.columns = {"path_id"};
    for (std::size_t l = 0; l < kRefinements; ++l) report.per_path.columns.push_back("gap_l" + std::to_string(l));
    if (oracle) {
        for (std::size_t l = 0; l < kRefinements; ++l) {
            report.per_path.columns.push_back("oracle_gap_l" + std::to_string(l));
        }
    }
    if (max_drift) report.per_path.columns.push_back("ordering_violations");

    double mismatches = 0.0;
    double ordering = 0.0;
    double nonconverged = 0.0;
    double max_gap = 0.0;
    double max_oracle_gap = 0.0;
    std::vector<double> medians;
    for (std::size_t l = 0; l < kRefinements; ++l) {
        std::vector<double> gaps;
        gaps.reserve(n_paths);
        for (const GapRow& r : rows) gaps.push_back(r.gap[l]);
        medians.push_back(stats::median(gaps));
        const double level_max = *std::max_element(gaps.begin(), gaps.end());
        max_gap = std::max(max_gap, level_max);
        report.metrics.emplace_back("dt_l" + std::to_string(l), grid.dt() / static_cast<double>(1u << l));
        report.metrics.emplace_back("median_gap_l" + std::to_string(l), medians.back());
        report.metrics.emplace_back("max_gap_l" + std::to_string(l), level_max);
    }
    for (std::size_t p = 0; p < n_paths; ++p) {
        const GapRow& r = rows[p];
        std::vector<double> out{static_cast<double>(p)};
        out.insert(out.end(), std::begin(r.gap), std::end(r.gap));
        if (oracle) {
            out.insert(out.end(), std::begin(r.oracle_gap), std::end(r.oracle_gap));
            for (double g : r.oracle_gap) max_oracle_gap = std::max(max_oracle_gap, g);
        }
        if (max_drift) out.push_back(r.ordering_violations);
        report.per_path.rows.push_back(std::move(out));
        mismatches += r.coupling_mismatches;
        ordering += r.ordering_violations;
        nonconverged += r.picard_nonconverged;
    }
    double failing = 0.0;
    for (std::size_t l = 0; l + 1 < kRefinements; ++l) {
        const double shrink = medians[l + 1] > 0.0 ? medians[l] / medians[l + 1] : 0.0;
        report.metrics.emplace_back("shrink_l" + std::to_string(l), shrink);
        if (!(medians[l + 1] <= medians[l] / kShrinkFactor || medians[l + 1] <= kGapFloor)) failing += 1.0;
    }
    report.metrics.emplace_back("max_gap", max_gap);
    report.metrics.emplace_back("refinements_failing_shrink", failing);
    report.metrics.emplace_back("coupling_mismatches", mismatches);
    report.thresholds.push_back({"coupling_mismatches", Comparison::AtMost, 0.0});
    if (oracle) report.metrics.emplace_back("max_oracle_gap", max_oracle_gap);
    if (max_drift) report.metrics.emplace_back("ordering_violations", ordering);
    if (doubly) report.metrics.emplace_back("picard_nonconverged", nonconverged);

    if (lipschitz_coefficients(spec)) {
        if (doubly || max_drift) {
            report.thresholds.push_back({"refinements_failing_shrink", Comparison::AtMost, 0.0});
        } else {
            report.thresholds.push_back({"max_gap", Comparison::AtMost, kGapFloor});
        }
        if (oracle) report.thresholds.push_back({"max_oracle_gap", Comparison::AtMost, 1e-12});
        if (max_drift && spec.max_drift.strictly_increasing_in_m) {
            report.thresholds.push_back({"ordering_violations", Comparison::AtMost, 0.0});
        }
        if (doubly) report.thresholds.push_back({"picard_nonconverged", Comparison::AtMost, 0.0});
    } else {
        report.notes.push_back("coefficients without a Lipschitz claim: gaps are descriptive, no rate is asserted");
    }
    finish(report);
    return report;
}

StudyReport convergence_order_study(const ProblemSpec& spec, double t_end,
                                    const std::vector<std::size_t>& n_steps_levels, std::size_t n_paths,
                                    std::uint64_t seed) {
    if (n_steps_levels.size() < 3) {
        throw std::invalid_argument("convergence_order_study: need at least 3 refinement levels");
    }
    if (n_paths == 0) throw std::invalid_argument("convergence_order_study: n_paths must be positive");
    for (std::size_t l = 0; l + 1 < n_steps_levels.size(); ++l) {
        const std::size_t a = n_steps_levels[l];
        const std::size_t b = n_steps_levels[l + 1];
        if (a == 0 || b <= a || b % a != 0) {
            throw std::invalid_argument("convergence_order_study: each level must strictly divide the next");
        }
    }
    require_valid(spec, t_end, "convergence_order_study");
    const std::size_t pairs = n_steps_levels.size() - 1;
    const std::size_t coarse_n = n_steps_levels.front();
    const TimeGrid finest(t_end, n_steps_levels.back());

    // Per path: |X^l_k - X^{l+1}_k| on the coarse nodes, pair-major.
    auto diffs = parallel_map<std::vector<double>>(n_paths, [&](std::size_t p) {
        const SamplePath w = generate_brownian(finest, seed, p);
        std::vector<std::vector<double>> coarse_x;
        for (std::size_t n : n_steps_levels) {
            const auto sol = simulate(spec, coarsen(w, finest.n_steps() / n));
            const std::size_t stride = n / coarse_n;
            std::vector<double> x(coarse_n + 1);
            for (std::size_t k = 0; k <= coarse_n; ++k) x[k] = sol.x[k * stride];
            coarse_x.push_back(std::move(x));
        }
        std::vector<double> out;
        out.reserve(pairs * (coarse_n + 1));
        for (std::size_t l = 0; l < pairs; ++l) {
            for (std::size_t k = 0; k <= coarse_n; ++k) out.push_back(std::abs(coarse_x[l][k] - coarse_x[l + 1][k]));
        }
        return out;
    });

    StudyReport report;
    report.kind = StudyKind::ConvergenceOrder;
    report.parameters = describe(spec);
    report.parameters.emplace_back("t_end", format_double(t_end));
    std::string levels;
    for (std::size_t n : n_steps_levels) levels += (levels.empty() ? "" : ",") + std::to_string(n);
    report.parameters.emplace_back("n_steps_levels", levels);
    report.parameters.emplace_back("gap_metric", "max_k E|X^l_k - X^(l+1)_k| on coarsest nodes");
    report.master_seed = seed;
    report.n_paths = n_paths;
    report.per_path.columns = {"path_id"};
    for (std::size_t l = 0; l < pairs; ++l) report.per_path.columns.push_back("sup_gap_pair" + std::to_string(l));

    std::vector<double> mean_gap(pairs * (coarse_n + 1), 0.0);
    std::vector<double> mean_sup(pairs, 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        std::vector<double> row{static_cast<double>(p)};
        for (std::size_t l = 0; l < pairs; ++l) {
            double sup = 0.0;
            for (std::size_t k = 0; k <= coarse_n; ++k) {
                const double d = diffs[p][l * (coarse_n + 1) + k];
                mean_gap[l * (coarse_n + 1) + k] += d;
                sup = std::max(sup, d);
            }
            mean_sup[l] += sup;
            row.push_back(sup);
        }
        report.per_path.rows.push_back(std::move(row));
    }
    const double inv_n = 1.0 / static_cast<double>(n_paths);
    std::vector<double> log_dt;
    std::vector<double> log_gap;
    std::vector<double> log_esup;
    double max_gap = 0.0;
    for (std::size_t l = 0; l < pairs; ++l) {
        double gap = 0.0;
        for (std::size_t k = 0; k <= coarse_n; ++k) gap = std::max(gap, mean_gap[l * (coarse_n + 1) + k] * inv_n);
        const double esup = mean_sup[l] * inv_n;
        max_gap = std::max(max_gap, gap);
        report.metrics.emplace_back("gap_pair" + std::to_string(l), gap);
        report.metrics.emplace_back("esup_gap_pair" + std::to_string(l), esup);
        log_dt.push_back(std::log2(t_end / static_cast<double>(n_steps_levels[l])));
        log_gap.push_back(std::log2(gap));
        log_esup.push_back(std::log2(esup));
    }
    report.metrics.emplace_back("max_gap", max_gap);

    const bool lipschitz = lipschitz_coefficients(spec);
    if (max_gap <= 1e-12) {
        report.notes.push_back("consecutive levels agree to rounding: the scheme is exact for this problem");
        report.thresholds.push_back({"max_gap", Comparison::AtMost, 1e-12});
    } else if (std::all_of(log_gap.begin(), log_gap.end(), [](double v) { return std::isfinite(v); })) {
        const stats::LineFit fit = stats::fit_line(log_dt, log_gap);
        report.metrics.emplace_back("order", fit.slope);
        report.metrics.emplace_back("fit_residual", fit.rms_residual);
        report.metrics.emplace_back("esup_order", stats::fit_line(log_dt, log_esup).slope);
        if (lipschitz) {
            report.thresholds.push_back({"order", Comparison::AtLeast, 0.4});
            report.thresholds.push_back({"order", Comparison::AtMost, 0.8});
        }
    } else {
        report.notes.push_back("some level pairs agree exactly while others do not: no order can be fitted");
        if (lipschitz) report.thresholds.push_back({"max_gap", Comparison::AtMost, 1e-12});
    }
    if (!lipschitz) report.notes.push_back("coefficients without a Lipschitz claim: order is descriptive");
    finish(report);
    return report;
}

namespace {

StudyReport law_base(LawKind kind, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                     std::uint64_t seed) {
    StudyReport report;
    report.kind = StudyKind::LawKs;
    report.parameters.emplace_back("law_kind", std::string(to_string(kind)));
    for (auto& kv : describe(spec)) report.parameters.push_back(std::move(kv));
    add_grid(report, grid);
    report.master_seed = seed;
    report.n_paths = n_paths;
    return report;
}

struct MaxLawRow {
    double continuous = 0.0;
    double on_grid = 0.0;
    double closed_form_gap = 0.0;
};

void max_law(StudyReport& report, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
             std::uint64_t seed) {
    if (spec.family != Family::MaxPerturbed || !unit_noise_no_drift(spec)) {
        throw std::invalid_argument("law_ks_study: max_law needs family max_perturbed with sigma = 1, b = 0");
    }
    const double alpha = spec.params.alpha;
    auto rows = parallel_map<MaxLawRow>(n_paths, [&](std::size_t p) {
        const SamplePath w = generate_brownian(grid, seed, p);
        const auto sol = simulate(spec, w);
        const SamplePath w_max = running_max(w);
        MaxLawRow row;
        for (std::size_t k = 0; k < w.size(); ++k) {
            row.closed_form_gap = std::max(row.closed_form_gap, std::abs(sol.max[k] - w_max[k] / (1.0 - alpha)));
        }
        // Between nodes the solution is W + alpha/(1-alpha) max W, so its max is max W / (1 - alpha).
        row.continuous = bridge_running_max(w, seed, p).back();
        row.on_grid = (1.0 - alpha) * sol.max.back();
        return row;
    });
    std::vector<double> cont;
    std::vector<double> disc;
    double gap = 0.0;
    report.per_path.columns = {"path_id", "scaled_max", "scaled_max_grid"};
    for (std::size_t p = 0; p < n_paths; ++p) {
        cont.push_back(rows[p].continuous);
        disc.push_back(rows[p].on_grid);
        gap = std::max(gap, rows[p].closed_form_gap);
        report.per_path.rows.push_back({static_cast<double>(p), rows[p].continuous, rows[p].on_grid});
    }
    const double scale = std::sqrt(grid.t_end());
    auto cdf = [scale](double x) { return stats::half_normal_cdf(x, scale); };
    const double critical = stats::ks_critical_1pct(n_paths);
    report.metrics.emplace_back("ks_statistic", stats::ks_statistic(cont, cdf));
    report.metrics.emplace_back("ks_critical", critical);
    report.metrics.emplace_back("ks_statistic_grid_max", stats::ks_statistic(disc, cdf));
    report.metrics.emplace_back("max_closed_form_gap", gap);
    report.thresholds.push_back({"ks_statistic", Comparison::AtMost, critical});
    report.thresholds.push_back({"max_closed_form_gap", Comparison::AtMost, 1e-10});
    report.notes.push_back(
        "the running max is taken over continuous time (exact Brownian-bridge maxima between nodes); "
        "the grid-node max is biased low at finite dt and is reported as ks_statistic_grid_max");
}

struct WeightRow {
    double weight = 0.0;
    double weight_without_half = 0.0;
};

void girsanov(StudyReport& report, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
              std::uint64_t seed) {
    require_valid(spec, grid.t_end(), "law_ks_study");
    if (spec.family == Family::MaxDrift) {
        throw std::invalid_argument("law_ks_study: girsanov_mean_one needs a family with a drift coefficient b");
    }
    auto rows = parallel_map<WeightRow>(n_paths, [&](std::size_t p) {
        const SamplePath w = generate_brownian(grid, seed, p);
        const auto sol = simulate(spec, w);
        const double log_weight = girsanov_log_weight(sol.x, w, spec.b);
        double quadratic = 0.0;
        for (std::size_t k = 0; k < grid.n_steps(); ++k) {
            const double drift = spec.b(grid.time(k), sol.x[k]);
            quadratic += drift * drift * grid.dt();
        }
        return WeightRow{std::exp(log_weight), std::exp(log_weight - 0.5 * quadratic)};
    });
    std::vector<double> weights;
    std::vector<double> variant;
    report.per_path.columns = {"path_id", "weight"};
    for (std::size_t p = 0; p < n_paths; ++p) {
        weights.push_back(rows[p].weight);
        variant.push_back(rows[p].weight_without_half);
        report.per_path.rows.push_back({static_cast<double>(p), rows[p].weight});
    }
    const double mean = stats::mean(weights);
    const double stderr_ = std::sqrt(stats::variance(weights) / static_cast<double>(n_paths));
    report.metrics.emplace_back("mean_weight", mean);
    report.metrics.emplace_back("standard_error", stderr_);
    report.metrics.emplace_back("deviation_in_standard_errors",
                                stderr_ > 0.0         ? std::abs(mean - 1.0) / stderr_
                                : mean == 1.0 ? 0.0
                                              : std::numeric_limits<double>::max());
    report.metrics.emplace_back("mean_weight_without_half", stats::mean(variant));
    report.thresholds.push_back({"deviation_in_standard_errors", Comparison::AtMost, 3.0});
}

void squared_qv(StudyReport& report, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                std::uint64_t seed, const LawOptions& options) {
    if (spec.family != Family::ReflectedMaxPerturbed || !unit_noise_no_drift(spec)) {
        throw std::invalid_argument("law_ks_study: squared_qv needs family reflected with sigma = 1, b = 0");
    }
    const bool coarse = grid.n_steps() % 2 == 0;
    auto rows = parallel_map<std::pair<double, double>>(n_paths, [&](std::size_t p) {
        const SamplePath w = generate_brownian(grid, seed, p);
        const double fine = squared_process_residual(simulate(spec, w));
        const double half = coarse ? squared_process_residual(simulate(spec, coarsen(w, 2))) : 0.0;
        return std::pair{fine, half};
    });
    std::vector<double> residuals;
    std::vector<double> coarse_residuals;
    std::size_t passing = 0;
    report.per_path.columns = {"path_id", "qv_residual"};
    for (std::size_t p = 0; p < n_paths; ++p) {
        residuals.push_back(rows[p].first);
        coarse_residuals.push_back(rows[p].second);
        if (rows[p].first <= options.qv_residual_threshold) ++passing;
        report.per_path.rows.push_back({static_cast<double>(p), rows[p].first});
    }
    report.parameters.emplace_back("residual_threshold", format_double(options.qv_residual_threshold));
    report.metrics.emplace_back("pass_rate", static_cast<double>(passing) / static_cast<double>(n_paths));
    report.metrics.emplace_back("median_residual", stats::median(residuals));
    report.metrics.emplace_back("p95_residual", quantile(residuals, 0.95));
    report.metrics.emplace_back("max_residual", *std::max_element(residuals.begin(), residuals.end()));
    if (coarse) report.metrics.emplace_back("median_residual_double_dt", stats::median(coarse_residuals));
    report.thresholds.push_back({"pass_rate", Comparison::AtLeast, options.qv_pass_rate});
}

}  // namespace

StudyReport law_ks_study(LawKind kind, const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                         std::uint64_t seed, const LawOptions& options) {
    if (n_paths < 2) throw std::invalid_argument("law_ks_study: need at least 2 paths");
    StudyReport report = law_base(kind, spec, grid, n_paths, seed);
    switch (kind) {
        case LawKind::MaxLaw: max_law(report, spec, grid, n_paths, seed); break;
        case LawKind::GirsanovMeanOne: girsanov(report, spec, grid, n_paths, seed); break;
        case LawKind::SquaredQv: squared_qv(report, spec, grid, n_paths, seed, options); break;
    }
    finish(report);
    return report;
}

namespace {

struct PicardRow {
    double iterations = 0;
    bool converged = false;
    bool decreasing = false;
    double max_n_ratio = 0.0;
    double factorial_slope = 0.0;
    bool has_slope = false;
    double iterations_2t = 0;
    bool converged_2t = false;
};

bool ratios_decrease(const std::vector<double>& deltas, std::size_t burn_in) {
    std::vector<double> n;
    std::vector<double> log_ratio;
    for (std::size_t j = burn_in; j + 1 < deltas.size(); ++j) {
        if (!(deltas[j] > 0.0) || !(deltas[j + 1] > 0.0)) break;
        n.push_back(static_cast<double>(j));
        log_ratio.push_back(std::log(deltas[j + 1] / deltas[j]));
    }
    if (n.size() < 2) return true;
    return stats::fit_line(n, log_ratio).slope < 0.0;
}

}  // namespace

StudyReport picard_rate_study(const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed, const PicardRateOptions& options) {
    if (spec.family != Family::DoublyPerturbed) {
        throw std::invalid_argument("picard_rate_study: needs family doubly");
    }
    if (n_paths == 0) throw std::invalid_argument("picard_rate_study: n_paths must be positive");
    const double t_end = grid.t_end();
    const TimeGrid grid_2t(2.0 * t_end, grid.n_steps());
    auto rows = parallel_map<PicardRow>(n_paths, [&](std::size_t p) {
        PicardRow row;
        const PicardReport r = picard_solve(spec, generate_brownian(grid, seed, p), options.picard);
        row.iterations = static_cast<double>(r.iterations);
        row.converged = r.converged;
        row.decreasing = ratios_decrease(r.sup_deltas, options.burn_in);
        std::vector<double> shape;
        std::vector<double> log_delta;
        for (std::size_t j = 0; j < r.sup_deltas.size(); ++j) {
            const double d = r.sup_deltas[j];
            if (!(d > 0.0)) break;
            const double n = static_cast<double>(j + 1);
            shape.push_back(n * std::log(t_end) - std::lgamma(n + 1.0));
            log_delta.push_back(std::log(d));
            if (j >= 1 && r.sup_deltas[j - 1] > 0.0) {
                row.max_n_ratio = std::max(row.max_n_ratio, static_cast<double>(j) * d / r.sup_deltas[j - 1]);
            }
        }
        if (shape.size() >= 2 && shape.front() != shape.back()) {
            row.factorial_slope = stats::fit_line(shape, log_delta).slope;
            row.has_slope = true;
        }
        if (options.double_horizon) {
            const PicardReport r2 = picard_solve(spec, generate_brownian(grid_2t, seed, p), options.picard);
            row.iterations_2t = static_cast<double>(r2.iterations);
            row.converged_2t = r2.converged;
        }
        return row;
    });

    StudyReport report;
    report.kind = StudyKind::PicardRate;
    report.parameters = describe(spec);
    add_grid(report, grid);
    report.parameters.emplace_back("tolerance", format_double(options.picard.tol));
    report.parameters.emplace_back("max_iter", std::to_string(options.picard.max_iter));
    report.parameters.emplace_back("iteration_budget", std::to_string(options.iteration_budget));
    report.parameters.emplace_back("burn_in", std::to_string(options.burn_in));
    report.parameters.emplace_back("double_horizon", options.double_horizon ? "true" : "false");
    report.master_seed = seed;
    report.n_paths = n_paths;
    report.notes.push_back(
        "a path has decreasing ratios when log(delta_{n+1}/delta_n) has negative least-squares slope in n "
        "after burn-in");
    report.per_path.columns = {"path_id", "iterations", "converged", "decreasing_ratios", "max_n_ratio"};
    if (options.double_horizon) {
        report.per_path.columns.push_back("iterations_2t");
        report.per_path.columns.push_back("converged_2t");
    }

    std::size_t within_budget = 0;
    std::size_t decreasing = 0;
    std::size_t nonconverged = 0;
    std::size_t converged_2t = 0;
    double max_iter = 0.0;
    double max_iter_2t = 0.0;
    double max_n_ratio = 0.0;
    std::vector<double> iterations;
    std::vector<double> slopes;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const PicardRow& r = rows[p];
        if (r.converged && r.iterations <= static_cast<double>(options.iteration_budget)) ++within_budget;
        if (!r.converged) ++nonconverged;
        if (r.decreasing) ++decreasing;
        if (r.converged_2t) ++converged_2t;
        if (r.has_slope) slopes.push_back(r.factorial_slope);
        iterations.push_back(r.iterations);
        max_iter = std::max(max_iter, r.iterations);
        max_iter_2t = std::max(max_iter_2t, r.iterations_2t);
        max_n_ratio = std::max(max_n_ratio, r.max_n_ratio);
        std::vector<double> row{static_cast<double>(p), r.iterations, r.converged ? 1.0 : 0.0,
                                r.decreasing ? 1.0 : 0.0, r.max_n_ratio};
        if (options.double_horizon) {
            row.push_back(r.iterations_2t);
            row.push_back(r.converged_2t ? 1.0 : 0.0);
        }
        report.per_path.rows.push_back(std::move(row));
    }
    const double n = static_cast<double>(n_paths);
    report.metrics.emplace_back("converged_within_budget_fraction", static_cast<double>(within_budget) / n);
    report.metrics.emplace_back("decreasing_ratio_fraction", static_cast<double>(decreasing) / n);
    report.metrics.emplace_back("nonconverged_paths", static_cast<double>(nonconverged));
    report.metrics.emplace_back("median_iterations", stats::median(iterations));
    report.metrics.emplace_back("max_iterations", max_iter);
    report.metrics.emplace_back("max_n_ratio", max_n_ratio);
    if (!slopes.empty()) report.metrics.emplace_back("median_factorial_slope", stats::median(slopes));
    report.thresholds.push_back({"converged_within_budget_fraction", Comparison::AtLeast, 0.99});
    report.thresholds.push_back({"decreasing_ratio_fraction", Comparison::AtLeast, 0.9});
    if (options.double_horizon) {
        report.metrics.emplace_back("converged_fraction_double_horizon", static_cast<double>(converged_2t) / n);
        report.metrics.emplace_back("max_iterations_double_horizon", max_iter_2t);
        report.thresholds.push_back({"converged_fraction_double_horizon", Comparison::AtLeast, 0.99});
    }
    finish(report);
    return report;
}

namespace {

struct SweepRow {
    double residual = 0.0;
    double extrema_mismatches = 0;
    double local_time_violations = 0;
    double negative_nodes = 0;
    double complementarity = 0.0;
    double fault = 0;
};

}  // namespace

StudyReport invariant_sweep(const ProblemSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed) {
    if (n_paths == 0) throw std::invalid_argument("invariant_sweep: n_paths must be positive");
    require_valid(spec, grid.t_end(), "invariant_sweep");
    const bool reflected = spec.family == Family::ReflectedMaxPerturbed;

    auto rows = parallel_map<SweepRow>(n_paths, [&](std::size_t p) {
        SweepRow row;
        const SamplePath w = generate_brownian(grid, seed, p);
        std::optional<ExtremaDecomposition> sol;
        try {
            sol.emplace(simulate(spec, w));
        } catch (const StepFault&) {
            row.fault = 1;
            return row;
        }
        row.residual = identity_residual(spec, *sol, w);
        const auto x = sol->x.values();
        double hi = x[0];
        double lo = x[0];
        for (std::size_t k = 0; k < x.size(); ++k) {
            hi = std::max(hi, x[k]);
            lo = std::min(lo, x[k]);
            if (sol->max[k] != hi || sol->min[k] != lo) row.extrema_mismatches += 1;
            if (reflected && x[k] < 0.0) row.negative_nodes += 1;
        }
        const auto l = sol->local_time.values();
        if (l[0] != 0.0) row.local_time_violations += 1;
        for (std::size_t k = 0; k + 1 < l.size(); ++k) {
            const double dl = l[k + 1] - l[k];
            if (dl < 0.0) row.local_time_violations += 1;
            if (dl > 0.0 && x[k + 1] != 0.0) row.local_time_violations += 1;
            row.complementarity += x[k + 1] * dl;
        }
        return row;
    });

    StudyReport report;
    report.kind = StudyKind::InvariantSweep;
    report.parameters = describe(spec);
    add_grid(report, grid);
    report.master_seed = seed;
    report.n_paths = n_paths;
    report.per_path.columns = {"path_id", "identity_residual", "extrema_mismatches", "local_time_violations",
                               "negative_nodes", "complementarity", "step_fault"};
    double residual = 0.0;
    double mismatches = 0.0;
    double lt = 0.0;
    double negative = 0.0;
    double complementarity = 0.0;
    double faults = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const SweepRow& r = rows[p];
        residual = std::max(residual, r.residual);
        mismatches += r.extrema_mismatches;
        lt += r.local_time_violations;
        negative += r.negative_nodes;
        complementarity = std::max(complementarity, std::abs(r.complementarity));
        faults += r.fault;
        report.per_path.rows.push_back({static_cast<double>(p), r.residual, r.extrema_mismatches,
                                        r.local_time_violations, r.negative_nodes, r.complementarity, r.fault});
    }
    report.metrics.emplace_back("max_identity_residual", residual);
    report.metrics.emplace_back("extrema_mismatches", mismatches);
    report.metrics.emplace_back("local_time_violations", lt);
    report.metrics.emplace_back("negative_nodes", negative);
    report.metrics.emplace_back("max_abs_complementarity", complementarity);
    report.metrics.emplace_back("step_faults", faults);
    report.thresholds.push_back({"max_identity_residual", Comparison::AtMost, 1e-12});
    report.thresholds.push_back({"extrema_mismatches", Comparison::AtMost, 0.0});
    report.thresholds.push_back({"local_time_violations", Comparison::AtMost, 0.0});
    report.thresholds.push_back({"negative_nodes", Comparison::AtMost, 0.0});
    report.thresholds.push_back({"max_abs_complementarity", Comparison::AtMost, 0.0});
    report.thresholds.push_back({"step_faults", Comparison::AtMost, 0.0});
    finish(report);
    return report;
}

}  // namespace pertsde
