#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pertsde/models.hpp"
#include "pertsde/paths.hpp"

namespace pertsde {

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MinInit {
    Zero,                // I^0 = 0
    ScaledRunningMin,    // I^0 = running_min(driver) / (1 - beta)
};

struct CoupledSolveOptions {
    double tol = 1e-12;
    std::size_t max_iter = 200;
    MinInit init = MinInit::ScaledRunningMin;
};

struct CoupledSolution {
    ExtremaDecomposition solution;
    std::size_t iterations = 0;
    /// Per-sweep sup change of I; it contracts by contraction_factor each sweep.
    std::vector<double> sup_changes;
};

/// Solves X = driver + alpha M + beta I, M = running max X, I = running min X
/// on the whole path by alternating the two Skorohod identities
///   M <- running_max(driver + beta I) / (1 - alpha)
///   I <- running_min(driver + alpha M) / (1 - beta)
/// until the sup change is at most tol * (1 - contraction_factor). The
/// iteration contracts at rate contraction_factor(alpha, beta).
///
/// Throws std::invalid_argument on inadmissible (alpha, beta) and
/// ConvergenceError when max_iter is exhausted.
CoupledSolution coupled_max_min_solve_detailed(const SamplePath& driver, double alpha, double beta,
                                               const CoupledSolveOptions& options = {});

ExtremaDecomposition coupled_max_min_solve(const SamplePath& driver, double alpha, double beta,
                                           double tol = 1e-12);

struct PicardOptions {
    double tol = 1e-10;
    std::size_t max_iter = 200;
    double inner_tol = 1e-12;
};

struct PicardReport {
    std::size_t iterations = 0;
    /// sup_k |X^{n+1}_k - X^n_k| for n = 0, 1, ...
    std::vector<double> sup_deltas;
    bool converged = false;
    double tolerance = 0.0;
    ExtremaDecomposition final;
};

/// Whole-path Picard iteration for the doubly perturbed family.
///
/// X^0 = xi / (1 - alpha) (the fixed point's start is xi / (1 - alpha - beta);
/// the initializer only affects the transient). Each sweep rebuilds the
/// driver A^n_k = xi + sum_{j<k} sigma(t_j, X^n_j) dW_j + b(t_j, X^n_j) dt and
/// solves X^{n+1} = coupled_max_min_solve(A^n). Non-convergence is reported
/// through `converged`, not thrown.
PicardReport picard_solve(const ProblemSpec& spec, const SamplePath& w, const PicardOptions& options = {});

}  // namespace pertsde
