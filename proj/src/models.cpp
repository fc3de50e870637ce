#include "pertsde/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pertsde {

namespace {

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

namespace presets {

Coefficient constant(double c) {
    Coefficient coef;
    coef.rule = [c](double, double) { return c; };
    coef.name = "const:" + fmt_num(c);
    coef.claims_lipschitz = true;
    coef.claims_linear_growth = true;
    if (c > 0.0) coef.lower_bound_epsilon = c;
    coef.constant_value = c;
    return coef;
}

Coefficient affine(double a, double c) {
    Coefficient coef;
    coef.rule = [a, c](double, double x) { return a + c * x; };
    coef.name = "affine:" + fmt_num(a) + "," + fmt_num(c);
    coef.claims_lipschitz = true;
    coef.claims_linear_growth = true;
    if (c == 0.0) {
        if (a > 0.0) coef.lower_bound_epsilon = a;
        coef.constant_value = a;
    }
    return coef;
}

Coefficient bounded_sine(double offset, double amplitude, double frequency) {
    Coefficient coef;
    coef.rule = [=](double, double x) { return offset + amplitude * std::sin(frequency * x); };
    coef.name = "sine:" + fmt_num(offset) + "," + fmt_num(amplitude) + "," + fmt_num(frequency);
    coef.claims_lipschitz = true;
    coef.claims_linear_growth = true;
    if (const double floor = offset - std::abs(amplitude); floor > 0.0) coef.lower_bound_epsilon = floor;
    return coef;
}

Coefficient piecewise(double below, double above, double threshold) {
    Coefficient coef;
    coef.rule = [=](double, double x) { return x < threshold ? below : above; };
    coef.name = "piecewise:" + fmt_num(below) + "," + fmt_num(above) + "," + fmt_num(threshold);
    coef.claims_lipschitz = (below == above);
    coef.claims_linear_growth = true;
    if (const double floor = std::min(below, above); floor > 0.0) coef.lower_bound_epsilon = floor;
    return coef;
}

MaxDriftCoefficient zero_max_drift() {
    MaxDriftCoefficient drift;
    drift.rule = [](double, double) { return 0.0; };
    drift.name = "zero";
    drift.bounded = true;
    drift.strictly_increasing_in_m = false;
    return drift;
}

MaxDriftCoefficient atan_max_drift(double k, double c) {
    MaxDriftCoefficient drift;
    drift.rule = [k, c](double x, double m) { return k * std::atan(m) + c * std::tanh(x); };
    drift.name = "atan:" + fmt_num(k) + "," + fmt_num(c);
    drift.bounded = true;
    drift.strictly_increasing_in_m = k > 0.0;
    return drift;
}

MonotoneTransform linear_transform(double c) {
    return {[c](double x) { return c * x; }, [c](double) { return c; }, "linear:" + fmt_num(c)};
}

MonotoneTransform tanh_transform(double c) {
    return {[c](double x) { return c * std::tanh(x); },
            [c](double x) {
                const double s = 1.0 / std::cosh(x);
                return c * s * s;
            },
            "tanh:" + fmt_num(c)};
}

TimeDependentWeight linear_weight(double a0, double a1) {
    return {[a0, a1](double s) { return a0 + a1 * s; }, "ramp:" + fmt_num(a0) + "," + fmt_num(a1)};
}

}  // namespace presets

std::string_view to_string(Family family) noexcept {
    switch (family) {
        case Family::MaxPerturbed: return "max_perturbed";
        case Family::ReflectedMaxPerturbed: return "reflected";
        case Family::MaxDrift: return "max_drift";
        case Family::DoublyPerturbed: return "doubly";
    }
    return "unknown";
}

std::optional<Family> parse_family(std::string_view name) noexcept {
    if (name == "max_perturbed" || name == "MaxPerturbed") return Family::MaxPerturbed;
    if (name == "reflected" || name == "reflected_max_perturbed" || name == "ReflectedMaxPerturbed")
        return Family::ReflectedMaxPerturbed;
    if (name == "max_drift" || name == "MaxDrift") return Family::MaxDrift;
    if (name == "doubly" || name == "doubly_perturbed" || name == "DoublyPerturbed")
        return Family::DoublyPerturbed;
    return std::nullopt;
}

ProblemSpec ProblemSpec::max_perturbed(double alpha, Coefficient sigma, Coefficient b) {
    ProblemSpec spec;
    spec.family = Family::MaxPerturbed;
    spec.sigma = std::move(sigma);
    spec.b = std::move(b);
    spec.params.alpha = alpha;
    return spec;
}

ProblemSpec ProblemSpec::reflected(double alpha, Coefficient sigma, Coefficient b) {
    ProblemSpec spec = max_perturbed(alpha, std::move(sigma), std::move(b));
    spec.family = Family::ReflectedMaxPerturbed;
    return spec;
}

ProblemSpec ProblemSpec::max_drift_family(double x0, MaxDriftCoefficient drift) {
    ProblemSpec spec;
    spec.family = Family::MaxDrift;
    spec.max_drift = std::move(drift);
    spec.initial = x0;
    return spec;
}

ProblemSpec ProblemSpec::doubly(double alpha, double beta, double xi, Coefficient sigma, Coefficient b) {
    ProblemSpec spec;
    spec.family = Family::DoublyPerturbed;
    spec.sigma = std::move(sigma);
    spec.b = std::move(b);
    spec.params.alpha = alpha;
    spec.params.beta = beta;
    spec.initial = xi;
    return spec;
}

std::string ValidationResult::summary() const {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.field + ": " + v.message;
    }
    return out;
}

bool ValidationResult::schemes_defined() const noexcept {
    for (const auto& v : violations) {
        if (!v.hypothesis_only) return false;
    }
    return true;
}

bool doubly_admissible(double alpha, double beta) noexcept {
    if (!(alpha < 1.0) || !(beta < 1.0)) return false;
    return std::abs(alpha * beta) / ((1.0 - alpha) * (1.0 - beta)) < 1.0;
}

double contraction_factor(double alpha, double beta) {
    if (!(alpha < 1.0) || !(beta < 1.0)) {
        throw std::invalid_argument("contraction_factor: requires alpha < 1 and beta < 1, got alpha=" +
                                    fmt_num(alpha) + ", beta=" + fmt_num(beta));
    }
    return std::abs(alpha * beta) / ((1.0 - alpha) * (1.0 - beta));
}

namespace {

void check_transform(const MonotoneTransform& h, ValidationResult& result) {
    if (std::abs(h.value(0.0)) > 1e-14) {
        result.violations.push_back({"h_transform", "H(0) must be 0, got " + fmt_num(h.value(0.0))});
    }
    for (int j = -400; j <= 400; ++j) {
        const double x = 0.05 * j;
        const double slope = h.slope(x);
        if (!(slope > 0.0 && slope < 1.0)) {
            result.violations.push_back({"h_transform", "requires 0 < H'(x) < 1, got H'(" + fmt_num(x) +
                                                            ") = " + fmt_num(slope)});
            return;
        }
    }
}

void check_weight(const TimeDependentWeight& w, double horizon, ValidationResult& result) {
    for (int j = 0; j <= 1000; ++j) {
        const double s = horizon * j / 1000.0;
        const double a = w.rule(s);
        if (!(a >= 0.0 && a < 1.0)) {
            result.violations.push_back({"alpha_of_t", "requires 0 <= alpha(s) < 1, got alpha(" + fmt_num(s) +
                                                           ") = " + fmt_num(a)});
            return;
        }
    }
}

}  // namespace

ValidationResult validate_params(const ProblemSpec& spec, double horizon) {
    ValidationResult result;
    const auto& p = spec.params;
    switch (spec.family) {
        case Family::MaxPerturbed:
        case Family::ReflectedMaxPerturbed: {
            if (p.h_transform && p.alpha_of_t) {
                result.violations.push_back({"params", "h_transform and alpha_of_t are mutually exclusive"});
            }
            if (p.h_transform) {
                check_transform(*p.h_transform, result);
            } else if (p.alpha_of_t) {
                check_weight(*p.alpha_of_t, horizon, result);
            } else if (!(p.alpha > 0.0 && p.alpha < 1.0)) {
                result.violations.push_back({"alpha", "requires alpha in (0, 1), got " + fmt_num(p.alpha)});
            }
            if (p.beta != 0.0) {
                result.violations.push_back({"beta", "must be 0 for the " + std::string(to_string(spec.family)) +
                                                         " family, got " + fmt_num(p.beta)});
            }
            if (spec.initial != 0.0) {
                result.violations.push_back({"initial", "X_0 = alpha X_0 forces initial = 0, got " +
                                                            fmt_num(spec.initial)});
            }
            break;
        }
        case Family::DoublyPerturbed: {
            if (!(p.alpha < 1.0)) {
                result.violations.push_back({"alpha", "requires alpha < 1, got " + fmt_num(p.alpha)});
            }
            if (!(p.beta < 1.0)) {
                result.violations.push_back({"beta", "requires beta < 1, got " + fmt_num(p.beta)});
            }
            if (p.alpha < 1.0 && p.beta < 1.0) {
                const double ratio = contraction_factor(p.alpha, p.beta);
                if (!(ratio < 1.0)) {
                    result.violations.push_back(
                        {"alpha,beta", "admissibility condition |alpha*beta|/((1-alpha)(1-beta)) < 1 violated: ratio = " +
                                           fmt_num(ratio)});
                }
            }
            if (p.h_transform || p.alpha_of_t) {
                result.violations.push_back({"params", "h_transform/alpha_of_t apply to the max-perturbed families only"});
            }
            if (!(p.alpha > 0.0 && p.alpha < 1.0)) {
                result.warnings.push_back("alpha = " + fmt_num(p.alpha) +
                                          " outside (0, 1); only the coupled admissibility condition is enforced");
            }
            break;
        }
        case Family::MaxDrift: {
            if (!spec.max_drift.strictly_increasing_in_m) {
                result.violations.push_back({"b", "max-drift coefficient '" + spec.max_drift.name +
                                                      "' is not flagged strictly increasing in the running max",
                                             true});
            }
            if (p.alpha != 0.0 || p.beta != 0.0 || p.h_transform || p.alpha_of_t) {
                result.violations.push_back({"params", "the max-drift family takes no perturbation parameters"});
            }
            break;
        }
    }
    if (!std::isfinite(spec.initial)) {
        result.violations.push_back({"initial", "must be finite"});
    }
    return result;
}

}  // namespace pertsde
