#include "pertsde/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

namespace pertsde {

namespace {

void require_unit_alpha(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << who << ": requires alpha in (0, 1), got " << alpha;
        throw std::invalid_argument(os.str());
    }
}

bool starts_new_extremum(double candidate, double extremum, TieBreak tie) noexcept {
    return tie == TieBreak::KeepExtremum ? candidate > extremum : candidate >= extremum;
}

// Pushes a negative post-step value back to zero. `next` came from a step on
// the effective driver a_new + l, so it took the no-new-max branch (m >= 0).
StepState push_to_zero(StepState next, const StepState& prev, double a_new) {
    next.a = a_new;
    if (next.x >= 0.0) return next;
    next.l = prev.l - next.x;
    next.x = 0.0;
    next.m = prev.m;
    next.i = std::min(prev.i, 0.0);
    next.p = prev.p;
    return next;
}

}  // namespace

StepState step_max(double a_new, const StepState& state, double alpha, TieBreak tie) {
    require_unit_alpha(alpha, "step_max");
    StepState next = state;
    next.a = a_new;
    if (starts_new_extremum(a_new, (1.0 - alpha) * state.m, tie)) {
        next.x = a_new / (1.0 - alpha);
        next.m = std::max(state.m, next.x);
    } else {
        next.x = std::min(a_new + alpha * state.m, state.m);
    }
    next.i = std::min(state.i, next.x);
    return next;
}

StepState step_reflected_max(double a_new, const StepState& state, double alpha, TieBreak tie) {
    require_unit_alpha(alpha, "step_reflected_max");
    if (state.m < 0.0) {
        throw std::invalid_argument("step_reflected_max: running max must be >= 0");
    }
    return push_to_zero(step_max(a_new + state.l, state, alpha, tie), state, a_new);
}

StepState step_double(double a_new, const StepState& state, double alpha, double beta) {
    const double m = state.m;
    const double i = state.i;
    const double interior = a_new + alpha * m + beta * i;
    const double new_max = (a_new + beta * i) / (1.0 - alpha);
    const double new_min = (a_new + alpha * m) / (1.0 - beta);

    const bool interior_ok = i <= interior && interior <= m;
    const bool max_ok = new_max > m;
    const bool min_ok = new_min < i;

    StepState next = state;
    next.a = a_new;
    if (max_ok && min_ok) {
        std::ostringstream os;
        os.precision(17);
        os << "step_double: new-max and new-min branches both valid (x_max=" << new_max
           << ", x_min=" << new_min << ", m=" << m << ", i=" << i
           << "); parameters inadmissible or step too coarse";
        throw StepFault(os.str());
    }
    if (interior_ok) {
        next.x = interior;
    } else if (max_ok) {
        next.x = new_max;
        next.m = new_max;
    } else if (min_ok) {
        next.x = new_min;
        next.i = new_min;
    } else {
        // Rounding can leave a tie with no branch strictly valid; the branch
        // values agree there, so clamp the interior candidate.
        const double slack = 1e-12 * (1.0 + std::abs(m) + std::abs(i) + std::abs(a_new));
        if (interior > m + slack || interior < i - slack || !std::isfinite(interior)) {
            std::ostringstream os;
            os.precision(17);
            os << "step_double: no branch valid (x_interior=" << interior << ", x_max=" << new_max
               << ", x_min=" << new_min << ", m=" << m << ", i=" << i << ")";
            throw StepFault(os.str());
        }
        next.x = std::clamp(interior, i, m);
    }
    if (!std::isfinite(next.x)) {
        throw StepFault("step_double: non-finite state");
    }
    return next;
}

StepState step_max_transform(double a_new, const StepState& state, const MonotoneTransform& h, TieBreak tie) {
    StepState next = state;
    next.a = a_new;
    const double m = state.m;
    const double candidate = a_new + h.value(m);
    if (!starts_new_extremum(candidate, m, tie)) {
        next.x = std::min(candidate, m);
        next.i = std::min(state.i, next.x);
        return next;
    }

    // g(x) = x - H(x) - a_new is strictly increasing with g(m) <= 0.
    auto g = [&](double x) { return x - h.value(x) - a_new; };
    double lo = m;
    double step = std::max(1.0, std::abs(m));
    double hi = m + step;
    for (int doubling = 0; g(hi) < 0.0; ++doubling) {
        if (doubling > 200) throw StepFault("step_max_transform: failed to bracket the new maximum");
        step *= 2.0;
        hi = m + step;
    }
    for (int iter = 0; iter < 400 && hi - lo > 1e-13; ++iter) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    next.x = hi;
    next.m = hi;
    return next;
}

StepState step_max_weighted(double a_new, const StepState& state, double alpha_k, TieBreak tie) {
    if (!(alpha_k >= 0.0 && alpha_k < 1.0)) {
        throw std::invalid_argument("step_max_weighted: requires 0 <= alpha(t) < 1");
    }
    StepState next = state;
    next.a = a_new;
    const double candidate = a_new + state.p;
    if (starts_new_extremum(candidate, state.m, tie)) {
        next.x = std::max((a_new + state.p - alpha_k * state.m) / (1.0 - alpha_k), state.m);
        next.p = state.p + alpha_k * (next.x - state.m);
        next.m = next.x;
    } else {
        next.x = std::min(candidate, state.m);
    }
    next.i = std::min(state.i, next.x);
    return next;
}

namespace {

struct Trajectory {
    std::vector<double> x, m, i, l, a;

    explicit Trajectory(std::size_t n) : x(n), m(n), i(n), l(n), a(n) {}

    void record(std::size_t k, const StepState& s) {
        x[k] = s.x;
        m[k] = s.m;
        i[k] = s.i;
        l[k] = s.l;
        a[k] = s.a;
    }

    ExtremaDecomposition finish(const TimeGrid& grid) && {
        return {SamplePath(grid, std::move(x)), SamplePath(grid, std::move(m)), SamplePath(grid, std::move(i)),
                SamplePath(grid, std::move(l)), SamplePath(grid, std::move(a))};
    }
};

using StepFn = std::function<StepState(double a_new, const StepState&, double t)>;

StepFn max_family_step(const ProblemSpec& spec, const SimulateOptions& options) {
    const auto& p = spec.params;
    const TieBreak tie = options.tie;
    StepFn inner;
    if (p.h_transform) {
        inner = [h = *p.h_transform, tie](double a, const StepState& s, double) {
            return step_max_transform(a, s, h, tie);
        };
    } else if (p.alpha_of_t) {
        inner = [w = *p.alpha_of_t, tie](double a, const StepState& s, double t) {
            return step_max_weighted(a, s, w.rule(t), tie);
        };
    } else {
        inner = [alpha = p.alpha, tie](double a, const StepState& s, double) { return step_max(a, s, alpha, tie); };
    }
    if (spec.family == Family::MaxPerturbed) return inner;
    return [inner](double a, const StepState& s, double t) {
        return push_to_zero(inner(a + s.l, s, t), s, a);
    };
}

}  // namespace

ExtremaDecomposition simulate(const ProblemSpec& spec, const SamplePath& w, const SimulateOptions& options) {
    const auto& grid = w.grid();
    const ValidationResult validation = validate_params(spec, grid.t_end());
    if (!validation.schemes_defined()) {
        throw std::invalid_argument("simulate: " + validation.summary());
    }
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    Trajectory out(n + 1);

    if (spec.family == Family::MaxDrift) {
        StepState s = StepState::at(spec.initial, spec.initial);
        out.record(0, s);
        for (std::size_t k = 0; k < n; ++k) {
            const double dw = w[k + 1] - w[k];
            const double m_eval = options.max_drift_predictor ? std::max(s.m, s.x + dw) : s.m;
            const double x_new = s.x + dw + spec.max_drift(s.x, m_eval) * dt;
            s = {x_new, std::max(s.m, x_new), std::min(s.i, x_new), 0.0, x_new, 0.0};
            out.record(k + 1, s);
        }
        return std::move(out).finish(grid);
    }

    StepState s;
    StepFn step;
    if (spec.family == Family::DoublyPerturbed) {
        const double alpha = spec.params.alpha;
        const double beta = spec.params.beta;
        const double denom = 1.0 - alpha - beta;
        if (!(denom > 0.0)) {
            throw std::invalid_argument("simulate: doubly perturbed start requires 1 - alpha - beta > 0");
        }
        const double x0 = spec.initial / denom;
        s = {x0, x0, x0, 0.0, spec.initial, 0.0};
        step = [alpha, beta](double a, const StepState& st, double) { return step_double(a, st, alpha, beta); };
    } else {
        s = StepState::at(0.0, 0.0);
        step = max_family_step(spec, options);
    }

    out.record(0, s);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = grid.time(k);
        const double dw = w[k + 1] - w[k];
        const double a_new = s.a + spec.sigma(t, s.x) * dw + spec.b(t, s.x) * dt;
        s = step(a_new, s, t);
        out.record(k + 1, s);
    }
    return std::move(out).finish(grid);
}

ExtremaDecomposition step_along_driver(const SamplePath& driver, double alpha, double beta) {
    const double denom = 1.0 - alpha - beta;
    if (!(denom > 0.0)) {
        throw std::invalid_argument("step_along_driver: requires 1 - alpha - beta > 0");
    }
    const std::size_t n = driver.size();
    Trajectory out(n);
    const double x0 = driver[0] / denom;
    StepState s{x0, x0, x0, 0.0, driver[0], 0.0};
    out.record(0, s);
    for (std::size_t k = 1; k < n; ++k) {
        s = step_double(driver[k], s, alpha, beta);
        out.record(k, s);
    }
    return std::move(out).finish(driver.grid());
}

double identity_residual(const ProblemSpec& spec, const ExtremaDecomposition& sol, const SamplePath& w) {
    const std::size_t n = sol.x.size();
    double worst = 0.0;
    if (spec.family == Family::MaxDrift) {
        const double dt = sol.grid().dt();
        worst = std::abs(sol.x[0] - spec.initial);
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double expected = sol.x[k] + (w[k + 1] - w[k]) + spec.max_drift(sol.x[k], sol.max[k]) * dt;
            worst = std::max(worst, std::abs(sol.x[k + 1] - expected));
        }
        return worst;
    }
    const auto& p = spec.params;
    double accumulated = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double perturbation;
        if (p.h_transform) {
            perturbation = p.h_transform->value(sol.max[k]);
        } else if (p.alpha_of_t) {
            if (k > 0) {
                accumulated += p.alpha_of_t->rule(sol.grid().time(k - 1)) * (sol.max[k] - sol.max[k - 1]);
            }
            perturbation = accumulated;
        } else {
            perturbation = p.alpha * sol.max[k] + p.beta * sol.min[k];
        }
        worst = std::max(worst, std::abs(sol.x[k] - sol.driver[k] - perturbation - sol.local_time[k]));
    }
    return worst;
}

}  // namespace pertsde
