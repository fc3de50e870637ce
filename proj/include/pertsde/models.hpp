#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pertsde {

/// A coefficient (t, x) -> real together with the regularity it claims.
///
/// The flags are claims, not proofs; tests sample them.
struct Coefficient {
    std::function<double(double t, double x)> rule;
    std::string name;
    bool claims_lipschitz = false;
    bool claims_linear_growth = false;
    std::optional<double> lower_bound_epsilon;
    /// Set by the constant preset; lets callers recognise sigma = 1, b = 0.
    std::optional<double> constant_value;

    double operator()(double t, double x) const { return rule(t, x); }

    bool is_constant(double c) const noexcept { return constant_value && *constant_value == c; }
};

namespace presets {
Coefficient constant(double c);
/// a + c * x
Coefficient affine(double a, double c);
/// offset + amplitude * sin(frequency * x)
Coefficient bounded_sine(double offset, double amplitude, double frequency = 1.0);
/// below for x < threshold, above otherwise. Discontinuous; Lipschitz is not claimed.
Coefficient piecewise(double below, double above, double threshold = 0.0);
}  // namespace presets

/// Drift b(x, m) of the max-in-drift family, m the running max (m >= x).
struct MaxDriftCoefficient {
    std::function<double(double x, double m)> rule;
    std::string name;
    bool bounded = false;
    bool strictly_increasing_in_m = false;

    double operator()(double x, double m) const { return rule(x, m); }
};

namespace presets {
MaxDriftCoefficient zero_max_drift();
/// k * atan(m) + c * tanh(x); bounded, strictly increasing in m for k > 0,
/// nondecreasing in x for c >= 0.
MaxDriftCoefficient atan_max_drift(double k, double c);
}  // namespace presets

/// Increasing perturbation H applied to the running max in place of alpha * M.
/// Admissible when H(0) = 0 and 0 < H' < 1.
struct MonotoneTransform {
    std::function<double(double)> value;
    std::function<double(double)> slope;
    std::string name;
};

/// Deterministic weight alpha(s) for the perturbation integral of alpha(s) dM_s.
struct TimeDependentWeight {
    std::function<double(double)> rule;
    std::string name;
};

namespace presets {
/// H(x) = c * x; reproduces the constant-alpha equation.
MonotoneTransform linear_transform(double c);
/// H(x) = c * tanh(x)
MonotoneTransform tanh_transform(double c);
/// alpha(s) = a0 + a1 * s
TimeDependentWeight linear_weight(double a0, double a1);
}  // namespace presets

struct PerturbationParams {
    double alpha = 0.0;
    double beta = 0.0;
    std::optional<MonotoneTransform> h_transform;
    std::optional<TimeDependentWeight> alpha_of_t;
};

enum class Family {
    MaxPerturbed,           // X = int sigma dW + int b ds + alpha max X
    ReflectedMaxPerturbed,  // ... + L^0, X >= 0
    MaxDrift,               // X = x + W + int b(X, max X) ds
    DoublyPerturbed,        // X = xi + int sigma dW + int b ds + alpha max X + beta min X
};

std::string_view to_string(Family family) noexcept;
/// Accepts max_perturbed, reflected, max_drift, doubly (and the enum spellings).
std::optional<Family> parse_family(std::string_view name) noexcept;

struct ProblemSpec {
    Family family = Family::MaxPerturbed;
    Coefficient sigma = presets::constant(1.0);
    Coefficient b = presets::constant(0.0);
    MaxDriftCoefficient max_drift = presets::zero_max_drift();
    PerturbationParams params;
    /// xi for the doubly perturbed family, x for the max-drift family; zero
    /// for the max-perturbed families (X_0 = alpha X_0 forces X_0 = 0).
    double initial = 0.0;

    static ProblemSpec max_perturbed(double alpha, Coefficient sigma, Coefficient b);
    static ProblemSpec reflected(double alpha, Coefficient sigma, Coefficient b);
    static ProblemSpec max_drift_family(double x0, MaxDriftCoefficient drift);
    static ProblemSpec doubly(double alpha, double beta, double xi, Coefficient sigma, Coefficient b);
};

struct Violation {
    std::string field;
    std::string message;
    /// A violated well-posedness hypothesis (e.g. monotonicity of the
    /// max-drift coefficient) rather than a condition the schemes need.
    bool hypothesis_only = false;
};

struct ValidationResult {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return violations.empty(); }
    /// No violation other than hypothesis-only ones; enough to run the schemes.
    bool schemes_defined() const noexcept;
    /// All violation messages joined by "; ".
    std::string summary() const;
};

/// The doubly perturbed admissibility test: alpha < 1, beta < 1 and
/// |alpha beta| / ((1 - alpha)(1 - beta)) < 1.
bool doubly_admissible(double alpha, double beta) noexcept;

/// Family admissibility. Never throws; sampled conditions (H', alpha(s)) are
/// checked on a fixed sample set, alpha(s) over [0, horizon].
ValidationResult validate_params(const ProblemSpec& spec, double horizon = 1.0);

/// |alpha beta| / ((1 - alpha)(1 - beta)), the rate of the coupled max/min
/// fixed point. Throws std::invalid_argument unless alpha < 1 and beta < 1.
double contraction_factor(double alpha, double beta);

}  // namespace pertsde
