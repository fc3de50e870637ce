#pragma once

#include <stdexcept>
#include <string>

#include "pertsde/models.hpp"
#include "pertsde/paths.hpp"

namespace pertsde {

/// Discrete state after step k.
///
/// For the max/min perturbed families the defining identity
///   x = a + alpha m + beta i + l
/// holds at every node (perturbation = alpha m + beta i in general, H(m) or
/// the accumulated sum of alpha(t_j) (m_{j+1} - m_j) for the extensions).
struct StepState {
    double x = 0.0;  // X_k
    double m = 0.0;  // running max M_k
    double i = 0.0;  // running min I_k
    double l = 0.0;  // local time at zero L_k
    double a = 0.0;  // driver A_k = xi + sum sigma dW + sum b dt
    double p = 0.0;  // accumulated perturbation, time-dependent alpha only

    static StepState at(double x0, double a0) noexcept { return {x0, x0, x0, 0.0, a0, 0.0}; }
};

/// Which branch wins when the no-new-extremum and new-extremum candidates coincide.
/// Both give the same value at a tie; only bookkeeping differs.
enum class TieBreak { KeepExtremum, NewExtremum };

/// step_double found no consistent branch, or two strict ones.
class StepFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solves X = A + alpha M, M = max X for one step.
///
/// No new max iff a_new <= (1 - alpha) m, giving x = a_new + alpha m; otherwise
/// x = a_new / (1 - alpha) becomes the new max. Throws unless alpha in (0, 1).
StepState step_max(double a_new, const StepState& state, double alpha,
                   TieBreak tie = TieBreak::KeepExtremum);

/// step_max on the effective driver a_new + l, then a minimal push to zero.
///
/// A reflected step never sets a new max because m >= 0.
StepState step_reflected_max(double a_new, const StepState& state, double alpha,
                             TieBreak tie = TieBreak::KeepExtremum);

/// Solves X = A + alpha M + beta I for one step. Exactly one of interior,
/// new-max, new-min holds on admissible input; ties resolve to interior.
/// Throws StepFault otherwise.
StepState step_double(double a_new, const StepState& state, double alpha, double beta);

/// X = A + H(M): the new-max branch solves x = a_new + H(x) by safeguarded bisection.
StepState step_max_transform(double a_new, const StepState& state, const MonotoneTransform& h,
                             TieBreak tie = TieBreak::KeepExtremum);

/// X = A + sum_j alpha(t_j) (M_{j+1} - M_j) with weight alpha_k = alpha(t_k)
/// for this step; the new-max branch is linear and explicit.
StepState step_max_weighted(double a_new, const StepState& state, double alpha_k,
                            TieBreak tie = TieBreak::KeepExtremum);

struct SimulateOptions {
    TieBreak tie = TieBreak::KeepExtremum;
    /// Max-drift family only: evaluate the drift at max(m, x + dW) instead of m.
    bool max_drift_predictor = false;
};

/// Euler-Maruyama with each family's per-step solve, left-point coefficients.
///
/// Max-drift family: x+ = x + dW + b(x, m) dt, then m+ = max(m, x+).
/// Throws std::invalid_argument on inadmissible parameters or a grid-less
/// path, StepFault from step_double.
ExtremaDecomposition simulate(const ProblemSpec& spec, const SamplePath& w,
                              const SimulateOptions& options = {});

/// Runs step_double along a fixed driver path (driver_0 = xi).
ExtremaDecomposition step_along_driver(const SamplePath& driver, double alpha, double beta);

/// max_k |x_k - a_k - perturbation_k - l_k| with the family's active terms.
/// For the max-drift family this is the residual of the explicit recursion
/// against w.
double identity_residual(const ProblemSpec& spec, const ExtremaDecomposition& sol, const SamplePath& w);

}  // namespace pertsde
