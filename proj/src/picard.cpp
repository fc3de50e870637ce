#include "pertsde/picard.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

namespace pertsde {

namespace {

double sup_diff(const std::vector<double>& u, const std::vector<double>& v) noexcept {
    double worst = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        worst = std::max(worst, std::abs(u[k] - v[k]));
    }
    return worst;
}

ExtremaDecomposition assemble(const SamplePath& driver, double alpha, double beta, const std::vector<double>& m,
                              const std::vector<double>& i) {
    const std::size_t n = driver.size();
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = driver[k] + alpha * m[k] + beta * i[k];
    }
    std::vector<double> mx = x;
    std::vector<double> mn = x;
    running_max_inplace(mx);
    running_min_inplace(mn);
    const auto& grid = driver.grid();
    return {SamplePath(grid, std::move(x)), SamplePath(grid, std::move(mx)), SamplePath(grid, std::move(mn)),
            SamplePath(grid, std::vector<double>(n, 0.0)),
            SamplePath(grid, std::vector<double>(driver.values().begin(), driver.values().end()))};
}

}  // namespace

CoupledSolution coupled_max_min_solve_detailed(const SamplePath& driver, double alpha, double beta,
                                               const CoupledSolveOptions& options) {
    if (!doubly_admissible(alpha, beta)) {
        std::ostringstream os;
        os.precision(17);
        os << "coupled_max_min_solve: inadmissible (alpha, beta) = (" << alpha << ", " << beta << ")";
        throw std::invalid_argument(os.str());
    }
    const std::size_t n = driver.size();
    std::vector<double> m(n, 0.0);
    std::vector<double> i(n, 0.0);
    if (alpha == 0.0 && beta == 0.0) {
        return {assemble(driver, alpha, beta, m, i), 0, {}};
    }

    if (options.init == MinInit::ScaledRunningMin) {
        for (std::size_t k = 0; k < n; ++k) i[k] = driver[k];
        running_min_inplace(i);
        for (double& v : i) v /= (1.0 - beta);
    }

    const double stop = options.tol * (1.0 - contraction_factor(alpha, beta));
    std::vector<double> m_next(n);
    std::vector<double> i_next(n);
    std::vector<double> changes;
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        for (std::size_t k = 0; k < n; ++k) m_next[k] = driver[k] + beta * i[k];
        running_max_inplace(m_next);
        for (double& v : m_next) v /= (1.0 - alpha);

        for (std::size_t k = 0; k < n; ++k) i_next[k] = driver[k] + alpha * m_next[k];
        running_min_inplace(i_next);
        for (double& v : i_next) v /= (1.0 - beta);

        // A full sweep contracts the I-change by the contraction factor; the M-change only by |beta|/(1-alpha).
        const double change = sup_diff(i_next, i);
        const double m_change = sup_diff(m_next, m);
        m.swap(m_next);
        i.swap(i_next);
        changes.push_back(change);
        if (iter > 1 && std::max(change, m_change) <= stop) {
            return {assemble(driver, alpha, beta, m, i), iter, std::move(changes)};
        }
    }
    std::ostringstream os;
    os.precision(17);
    os << "coupled_max_min_solve: no convergence in " << options.max_iter << " iterations (last change "
       << (changes.empty() ? 0.0 : changes.back()) << ")";
    throw ConvergenceError(os.str());
}

ExtremaDecomposition coupled_max_min_solve(const SamplePath& driver, double alpha, double beta, double tol) {
    CoupledSolveOptions options;
    options.tol = tol;
    return coupled_max_min_solve_detailed(driver, alpha, beta, options).solution;
}

PicardReport picard_solve(const ProblemSpec& spec, const SamplePath& w, const PicardOptions& options) {
    if (spec.family != Family::DoublyPerturbed) {
        throw std::invalid_argument("picard_solve: requires the doubly perturbed family");
    }
    if (const auto v = validate_params(spec, w.grid().t_end()); !v.ok()) {
        throw std::invalid_argument("picard_solve: " + v.summary());
    }
    if (!spec.sigma.claims_lipschitz || !spec.b.claims_lipschitz) {
        throw std::invalid_argument("picard_solve: sigma and b must be flagged Lipschitz");
    }
    const double alpha = spec.params.alpha;
    const double beta = spec.params.beta;
    const double xi = spec.initial;
    const auto& grid = w.grid();
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();

    if (options.max_iter == 0) {
        throw std::invalid_argument("picard_solve: max_iter must be >= 1");
    }
    CoupledSolveOptions inner;
    inner.tol = options.inner_tol;

    std::vector<double> deltas;
    bool converged = false;
    std::vector<double> current(n + 1, xi / (1.0 - alpha));
    std::vector<double> a(n + 1);
    std::optional<ExtremaDecomposition> latest;
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        a[0] = xi;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.time(k);
            a[k + 1] = a[k] + spec.sigma(t, current[k]) * (w[k + 1] - w[k]) + spec.b(t, current[k]) * dt;
        }
        auto solved = coupled_max_min_solve_detailed(SamplePath(grid, a), alpha, beta, inner).solution;
        double delta = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            delta = std::max(delta, std::abs(solved.x[k] - current[k]));
        }
        current.assign(solved.x.values().begin(), solved.x.values().end());
        latest = std::move(solved);
        deltas.push_back(delta);
        if (delta <= options.tol) {
            converged = true;
            break;
        }
    }
    const std::size_t iterations = deltas.size();
    return {iterations, std::move(deltas), converged, options.tol, std::move(*latest)};
}

}  // namespace pertsde
