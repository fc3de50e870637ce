#pragma once

#include "pertsde/models.hpp"
#include "pertsde/paths.hpp"

namespace pertsde {

/// Closed-form solution of X = W + alpha max X:
///   X = W + alpha / (1 - alpha) * running_max(W),  M^X = running_max(W) / (1 - alpha).
/// Throws unless alpha in (0, 1).
ExtremaDecomposition explicit_alpha_perturbed(const SamplePath& w, double alpha);

/// Exponent of the exponential martingale that removes drift b along x:
///   -sum_k b(t_k, x_k) dW_k - 1/2 sum_k b(t_k, x_k)^2 dt.
double girsanov_log_weight(const SamplePath& x, const SamplePath& w, const Coefficient& b);

/// Cumulative clock c_k = sum_{j<k} sigma(t_j, y_j)^2 dt.
SamplePath time_change_clock(const SamplePath& y, const Coefficient& sigma);

/// y read on the inverse clock: output node m holds y at the first node k with
/// c_k >= m dt (right-continuous inverse on the grid, no interpolation). The
/// output grid keeps dt and runs to floor(c_n / dt) steps. Requires sigma to
/// carry a lower bound epsilon > 0.
SamplePath time_change(const SamplePath& y, const Coefficient& sigma);

/// Discrete check of d<Y> = 4 Y dt for Y = X^2, X a reflected solution:
///   max_k |QV_k - 4 sum_{j<k} Y_j dt| / (1 + QV_n),  QV_k = sum_{j<k} (Y_{j+1} - Y_j)^2.
/// Throws if x is not a nonnegative reflected path.
double squared_process_residual(const ExtremaDecomposition& reflected);

}  // namespace pertsde
