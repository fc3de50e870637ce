// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// argv[1] is the pertsde binary used by the determinism check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pertsde/measure.hpp"
#include "pertsde/parallel.hpp"
#include "pertsde/picard.hpp"
#include "pertsde/stepper.hpp"
#include "pertsde/verify.hpp"

using namespace pertsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string metric_line(const StudyReport& r, std::initializer_list<const char*> names) {
    std::string out;
    for (const char* n : names) {
        if (!r.has_metric(n)) continue;
        out += (out.empty() ? "" : ", ") + std::string(n) + " = " + fmt(r.metric(n));
    }
    return out;
}

double sup_diff(const SamplePath& a, const SamplePath& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

const Coefficient kOne = presets::constant(1.0);
const Coefficient kZero = presets::constant(0.0);
const Coefficient kSine = presets::bounded_sine(0.5, 0.5);
const Coefficient kAffine = presets::affine(0.0, -0.5);

Outcome ac1() {
    constexpr double tol = 1e-10;
    const TimeGrid g(1.0, 1024);
    double worst = 0.0;
    for (double alpha : {0.1, 0.5, 0.9}) {
        const ProblemSpec spec = ProblemSpec::max_perturbed(alpha, kOne, kZero);
        for (std::uint64_t p = 0; p < 100; ++p) {
            const SamplePath w = generate_brownian(g, 2026, p);
            const auto sim = simulate(spec, w);
            const auto exact = explicit_alpha_perturbed(w, alpha);
            worst = std::max({worst, sup_diff(sim.x, exact.x), sup_diff(sim.max, exact.max)});
        }
    }
    return {worst <= tol, "max |stepper - closed form| = " + fmt(worst) + " (tol 1e-10)"};
}

Outcome ac2() {
    const TimeGrid g(1.0, 1024);
    const std::vector<ProblemSpec> specs = {
        ProblemSpec::max_perturbed(0.5, kSine, kAffine), ProblemSpec::reflected(0.5, kSine, kAffine),
        ProblemSpec::doubly(0.25, 0.25, 1.0, kSine, kAffine), ProblemSpec::doubly(0.4, -0.8, 0.5, kSine, kAffine),
        ProblemSpec::max_drift_family(0.0, presets::atan_max_drift(1.0, 0.5))};
    bool pass = true;
    double worst = 0.0;
    for (const ProblemSpec& spec : specs) {
        const auto r = invariant_sweep(spec, g, 200, 2026);
        pass = pass && r.pass;
        if (spec.family != Family::MaxDrift) worst = std::max(worst, r.metric("max_identity_residual"));
    }
    return {pass, "max identity residual = " + fmt(worst) + " (tol 1e-12) over 5 specs x 200 paths"};
}

Outcome ac3() {
    const auto r =
        law_ks_study(LawKind::MaxLaw, ProblemSpec::max_perturbed(0.5, kOne, kZero), TimeGrid(1.0, 1024), 100000, 2026);
    return {r.pass, metric_line(r, {"ks_statistic", "ks_critical", "ks_statistic_grid_max", "max_closed_form_gap"})};
}

Outcome ac4() {
    constexpr double tol = 1e-10;
    const TimeGrid g(1.0, 256);
    double worst = 0.0;
    for (auto [alpha, beta] : {std::pair{0.25, 0.25}, std::pair{0.4, -0.8}, std::pair{0.1, 0.6}}) {
        const auto gaps = parallel_map<double>(1000, [&](std::size_t p) {
            const SamplePath w = generate_brownian(g, 2026, p);
            std::vector<double> d(w.values().begin(), w.values().end());
            const double start = 0.5 * static_cast<double>(p % 3) - 0.5;
            for (double& v : d) v += start;
            const SamplePath driver(g, std::move(d));
            const auto whole = coupled_max_min_solve(driver, alpha, beta);
            const auto stepped = step_along_driver(driver, alpha, beta);
            return std::max({sup_diff(whole.x, stepped.x), sup_diff(whole.max, stepped.max),
                             sup_diff(whole.min, stepped.min)});
        });
        for (double v : gaps) worst = std::max(worst, v);
    }
    return {worst <= tol, "max sup gap = " + fmt(worst) + " (tol 1e-10) over 3 x 1000 drivers"};
}

Outcome ac5() {
    const auto r = picard_rate_study(ProblemSpec::doubly(0.25, 0.25, 1.0, kSine, kAffine), TimeGrid(1.0, 1024), 1000,
                                     2026);
    return {r.pass, metric_line(r, {"converged_within_budget_fraction", "decreasing_ratio_fraction", "max_iterations",
                                    "converged_fraction_double_horizon"})};
}

Outcome ac6() {
    bool pass = validate_params(ProblemSpec::doubly(0.25, 0.25, 0.0, kOne, kZero)).ok() &&
                !validate_params(ProblemSpec::doubly(0.5, 0.5, 0.0, kOne, kZero)).ok();
    std::size_t mismatches = 0;
    std::size_t accepted = 0;
    std::size_t cells = 0;
    for (int i = -19; i <= 19; ++i) {
        for (int j = -19; j <= 19; ++j) {
            const double a = i / 20.0;
            const double b = j / 20.0;
            const bool direct = a < 1.0 && b < 1.0 && std::abs(a * b) < (1.0 - a) * (1.0 - b);
            const bool gate = validate_params(ProblemSpec::doubly(a, b, 0.0, kOne, kZero)).ok();
            mismatches += (gate != direct || doubly_admissible(a, b) != direct) ? 1 : 0;
            accepted += direct ? 1 : 0;
            ++cells;
        }
    }
    pass = pass && mismatches == 0;
    return {pass, "0.5/0.5 rejected, 0.25/0.25 accepted; grid mismatches = " + std::to_string(mismatches) + " of " +
                      std::to_string(cells) + " (" + std::to_string(accepted) + " admissible)"};
}

Outcome ac7() {
    const ProblemSpec spec = ProblemSpec::reflected(0.5, kOne, kZero);
    const auto sweep = invariant_sweep(ProblemSpec::reflected(0.5, kSine, kAffine), TimeGrid(1.0, 1024), 1000, 2026);
    const auto qv = law_ks_study(LawKind::SquaredQv, spec, TimeGrid(1.0, 4096), 1000, 2026);
    return {sweep.pass && qv.pass,
            metric_line(sweep, {"negative_nodes", "local_time_violations", "max_abs_complementarity"}) + "; " +
                metric_line(qv, {"pass_rate", "median_residual", "p95_residual"}) + " (residual threshold 0.2)"};
}

Outcome ac8() {
    const std::vector<std::size_t> levels = {256, 512, 1024, 2048};
    const auto one = convergence_order_study(ProblemSpec::max_perturbed(0.5, kSine, kZero), 1.0, levels, 200, 2026);
    const auto e2 = convergence_order_study(ProblemSpec::doubly(0.25, 0.25, 1.0, kSine, kAffine), 1.0, levels, 200, 2026);
    auto order = [](const StudyReport& r) { return r.has_metric("order") ? r.metric("order") : std::nan(""); };
    return {one.pass && e2.pass, "order family max_perturbed = " + fmt(order(one)) + ", doubly = " + fmt(order(e2)) +
                                     " (required [0.4, 0.8])"};
}

Outcome ac9() {
    const auto r = law_ks_study(LawKind::GirsanovMeanOne, ProblemSpec::reflected(0.5, kOne, presets::constant(0.5)),
                                TimeGrid(1.0, 256), 100000, 2026);
    return {r.pass, metric_line(r, {"mean_weight", "standard_error", "deviation_in_standard_errors",
                                    "mean_weight_without_half"})};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome ac10(const std::string& tool) {
    if (tool.empty()) return {false, "no pertsde binary given"};
    const fs::path root = fs::temp_directory_path() / "pertsde_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> invocations = {
        "simulate --family reflected --sigma sine:0.5,0.5 --b affine:0,-0.5 --n-steps 256 --n-paths 50 --seed 3",
        "verify --family doubly --alpha 0.25 --beta 0.25 --xi 1 --sigma sine:0.5,0.5 --n-steps 128 --n-paths 20",
        "law --law-kind girsanov_mean_one --family reflected --b const0.5 --n-steps 64 --n-paths 2000",
        "convergence --family max_perturbed --sigma sine:0.5,0.5 --n-steps 32 --levels 3 --n-paths 50",
    };
    std::size_t compared = 0;
    std::size_t differing = 0;
    for (std::size_t i = 0; i < invocations.size(); ++i) {
        std::vector<fs::path> dirs;
        for (const char* run : {"a", "b"}) {
            const fs::path dir = root / (std::to_string(i) + run);
            const std::string cmd = tool + " " + invocations[i] + " --out-dir " + dir.string() + " >/dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (status == -1 || WEXITSTATUS(status) == 2) return {false, "invocation failed: " + invocations[i]};
            dirs.push_back(dir);
        }
        for (const char* f : {"paths.csv", "metrics.csv", "report.json"}) {
            ++compared;
            const std::string a = slurp(dirs[0] / f);
            if (a.empty() || a != slurp(dirs[1] / f)) ++differing;
        }
    }
    fs::remove_all(root);
    return {differing == 0, std::to_string(compared) + " file pairs compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string tool = argc > 1 ? argv[1] : "";
    struct Criterion {
        const char* id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"AC1", "closed-form oracle", 5, ac1},
        {"AC2", "defining-identity residuals", 60, ac2},
        {"AC3", "max-law KS", 60, ac3},
        {"AC4", "coupled solver vs stepper", 10, ac4},
        {"AC5", "Picard convergence", 120, ac5},
        {"AC6", "admissibility gate", 5, ac6},
        {"AC7", "reflected invariants and squared-process QV", 90, ac7},
        {"AC8", "strong convergence order", 120, ac8},
        {"AC9", "Girsanov mean one", 30, ac9},
        {"AC10", "CLI determinism", 60, [&] { return ac10(tool); }},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("%s %s  %s: %s [%.2f s, budget %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), seconds, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
