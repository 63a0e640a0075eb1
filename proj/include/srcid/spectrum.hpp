#pragma once

#include "srcid/errors.hpp"
#include "srcid/fem.hpp"
#include "srcid/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace srcid {

struct EigenEstimate {
    double value = 0.0;
    Field vector;
    std::size_t iterations = 0;
};

/// Smallest generalized eigenvalue of K y = lambda M y by inverse power iteration.
///
/// Each step solves K y_{k+1} = M y_k with conjugate gradients and takes the
/// Rayleigh quotient; stops when the quotient changes by less than tol
/// relative. The start vector is the constant field, which carries weight on
/// the positive ground state of any admissible (k, c, mu).
inline EigenEstimate smallest_generalized_eigenpair(const DiscreteOperator& op, double tol = 1e-10,
                                                    std::size_t max_iters = 500) {
    if (!(tol > 0.0)) throw InvalidArgument("estimate_delta: tol must be positive");
    const SparseMatrix& K = op.stiffness();
    const SparseMatrix& M = op.mass();
    const std::size_t n = op.dof();

    Field y(n, 1.0);
    auto rayleigh = [&](const Field& v) { return m_inner(K, v, v) / m_inner(M, v, v); };

    // A constant-coefficient-scale threshold: below it K is numerically singular.
    const double scale = K.max_abs() / M.max_abs();
    const double singular_threshold = 1e-12 * scale;

    double lambda = rayleigh(y);
    if (!(lambda > singular_threshold)) {
        throw DegenerateOperator("stiffness matrix is singular: constants lie in its kernel (delta = 0)");
    }

    SolveOptions solve;
    solve.rel_tol = 1e-12;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        std::vector<double> rhs = spmv(M, y);
        SolveResult sol;
        try {
            sol = cg_solve(K, rhs, solve, op.stiffness_diagonal(), std::span<const double>(y));
        } catch (const SolverFailure& e) {
            throw DegenerateOperator(std::string("stiffness solve failed during eigenvalue estimate: ") + e.what());
        }
        Field next(std::move(sol.x));
        const double nrm = m_norm(M, next);
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DegenerateOperator("inverse iteration produced a null vector");
        next *= 1.0 / nrm;
        const double next_lambda = rayleigh(next);
        if (!(next_lambda > singular_threshold)) {
            throw DegenerateOperator("smallest generalized eigenvalue is numerically zero");
        }
        const bool done = std::abs(next_lambda - lambda) <= tol * std::abs(next_lambda);
        lambda = next_lambda;
        y = std::move(next);
        if (done) return {lambda, y, it};
    }
    throw SolverFailure("inverse power iteration did not converge", lambda, max_iters);
}

/// Coercivity constant delta with A >= delta I.
inline double estimate_delta(const DiscreteOperator& op, double tol = 1e-10) {
    return smallest_generalized_eigenpair(op, tol).value;
}

}  // namespace srcid
