#pragma once

#include "srcid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace srcid {

/// One (row, col, value) entry used to build a sparse matrix.
struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Square sparse matrix in compressed sparse row form.
///
/// Column indices are sorted and unique within each row. Instances are
/// immutable after construction and safe to share between threads.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Builds a CSR matrix, summing duplicate entries in insertion order.
    static SparseMatrix from_triplets(std::size_t n, std::vector<Triplet> entries) {
        for (const auto& t : entries) {
            if (t.row >= n || t.col >= n) {
                throw InvalidArgument("triplet index out of range for dimension " + std::to_string(n));
            }
        }
        std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });

        SparseMatrix A;
        A.n_ = n;
        A.offsets_.assign(n + 1, 0);
        for (std::size_t i = 0; i < entries.size();) {
            std::size_t j = i;
            double sum = 0.0;
            while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col) {
                sum += entries[j].value;
                ++j;
            }
            A.cols_.push_back(entries[i].col);
            A.vals_.push_back(sum);
            ++A.offsets_[entries[i].row + 1];
            i = j;
        }
        for (std::size_t r = 0; r < n; ++r) A.offsets_[r + 1] += A.offsets_[r];
        return A;
    }

    static SparseMatrix identity(std::size_t n) {
        std::vector<double> ones(n, 1.0);
        return diagonal(ones);
    }

    static SparseMatrix diagonal(std::span<const double> d) {
        std::vector<Triplet> t;
        t.reserve(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
        return from_triplets(d.size(), std::move(t));
    }

    std::size_t dim() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return vals_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return cols_; }
    std::span<const double> values() const noexcept { return vals_; }

    /// Entry (i, j), zero when structurally absent.
    double at(std::size_t i, std::size_t j) const {
        if (i >= n_ || j >= n_) throw InvalidArgument("matrix index out of range");
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) return 0.0;
        return vals_[static_cast<std::size_t>(it - cols_.begin())];
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
        return d;
    }

    std::vector<double> row_sums() const {
        std::vector<double> s(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) s[i] += vals_[p];
        return s;
    }

    /// Largest absolute entry; a cheap scale for relative thresholds.
    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : vals_) m = std::max(m, std::abs(v));
        return m;
    }

    /// y = A x, summed row by row in column-index order.
    void multiply(std::span<const double> x, std::span<double> y) const {
        if (x.size() != n_ || y.size() != n_) {
            throw InvalidArgument("spmv dimension mismatch: matrix " + std::to_string(n_) + ", x " +
                                  std::to_string(x.size()) + ", y " + std::to_string(y.size()));
        }
        for (std::size_t i = 0; i < n_; ++i) {
            double sum = 0.0;
            for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) sum += vals_[p] * x[cols_[p]];
            y[i] = sum;
        }
    }

    /// a A + b B over the union of both sparsity patterns.
    friend SparseMatrix combine(double a, const SparseMatrix& A, double b, const SparseMatrix& B) {
        if (A.n_ != B.n_) throw InvalidArgument("combine: dimension mismatch");
        std::vector<Triplet> t;
        t.reserve(A.nnz() + B.nnz());
        for (std::size_t i = 0; i < A.n_; ++i) {
            std::size_t pa = A.offsets_[i], pb = B.offsets_[i];
            const std::size_t ea = A.offsets_[i + 1], eb = B.offsets_[i + 1];
            while (pa < ea || pb < eb) {
                if (pb == eb || (pa < ea && A.cols_[pa] < B.cols_[pb])) {
                    t.push_back({i, A.cols_[pa], a * A.vals_[pa]});
                    ++pa;
                } else if (pa == ea || B.cols_[pb] < A.cols_[pa]) {
                    t.push_back({i, B.cols_[pb], b * B.vals_[pb]});
                    ++pb;
                } else {
                    t.push_back({i, A.cols_[pa], a * A.vals_[pa] + b * B.vals_[pb]});
                    ++pa;
                    ++pb;
                }
            }
        }
        return from_triplets(A.n_, std::move(t));
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

inline std::vector<double> spmv(const SparseMatrix& A, std::span<const double> x) {
    std::vector<double> y(A.dim(), 0.0);
    A.multiply(x, y);
    return y;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

/// Discrete L2 inner product x^T M y.
inline double m_inner(const SparseMatrix& M, std::span<const double> x, std::span<const double> y) {
    if (x.size() != M.dim() || y.size() != M.dim()) throw InvalidArgument("m_inner: dimension mismatch");
    return dot(x, spmv(M, y));
}

/// Discrete L2 norm sqrt(x^T M x).
inline double m_norm(const SparseMatrix& M, std::span<const double> x) {
    return std::sqrt(std::max(0.0, m_inner(M, x, x)));
}

struct SolveOptions {
    double rel_tol = 1e-10;
    /// Defaults to 10 n when unset.
    std::optional<std::size_t> max_iters;
    /// Called after every iteration with the current iterate and recursive residual norm.
    std::function<void(std::size_t, std::span<const double>, double)> monitor;
};

struct SolveResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double residual = 0.0;  // true residual norm ||b - A x||_2 at exit
};

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite A.
///
/// Stops on the true residual: ||b - A x||_2 <= rel_tol ||b||_2. When the
/// recursive residual meets the tolerance but the true one does not, the
/// iteration restarts from the current iterate.
inline SolveResult cg_solve(const SparseMatrix& A, std::span<const double> b, const SolveOptions& opts = {},
                            std::optional<std::span<const double>> precond = std::nullopt,
                            std::optional<std::span<const double>> x0 = std::nullopt) {
    const std::size_t n = A.dim();
    if (b.size() != n) throw InvalidArgument("cg_solve: rhs dimension mismatch");
    if (!(opts.rel_tol > 0.0 && opts.rel_tol < 1.0)) throw InvalidArgument("cg_solve: rel_tol must lie in (0, 1)");
    if (precond && precond->size() != n) throw InvalidArgument("cg_solve: preconditioner dimension mismatch");
    if (x0 && x0->size() != n) throw InvalidArgument("cg_solve: initial guess dimension mismatch");

    std::vector<double> inv_diag(n, 1.0);
    if (precond) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!((*precond)[i] > 0.0)) throw InvalidArgument("cg_solve: preconditioner must be positive");
            inv_diag[i] = 1.0 / (*precond)[i];
        }
    }

    SolveResult out;
    out.x.assign(n, 0.0);
    if (x0) std::copy(x0->begin(), x0->end(), out.x.begin());

    const double bnorm = norm2(b);
    const double target = opts.rel_tol * bnorm;
    const std::size_t max_iters = opts.max_iters.value_or(10 * std::max<std::size_t>(n, 1));

    std::vector<double> r(n), z(n), p(n), q(n);
    auto true_residual = [&] {
        A.multiply(out.x, q);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
        return norm2(r);
    };

    if (bnorm == 0.0) {
        std::fill(out.x.begin(), out.x.end(), 0.0);
        return out;
    }

    double rnorm = true_residual();
    std::size_t it = 0;
    while (true) {
        if (rnorm <= target) {
            out.residual = rnorm;
            out.iterations = it;
            return out;
        }
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = inv_diag[i] * r[i];
            p[i] = z[i];
        }
        double rz = dot(r, z);
        bool restart = false;
        while (!restart) {
            if (it >= max_iters) {
                throw SolverFailure("conjugate gradients did not converge in " + std::to_string(max_iters) +
                                        " iterations (relative residual " + std::to_string(rnorm / bnorm) + ")",
                                    rnorm, it);
            }
            A.multiply(p, q);
            const double pq = dot(p, q);
            if (!(pq > 0.0)) {
                throw SolverFailure("conjugate gradients broke down: matrix not positive definite", rnorm, it);
            }
            const double alpha = rz / pq;
            for (std::size_t i = 0; i < n; ++i) {
                out.x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            ++it;
            rnorm = norm2(r);
            if (opts.monitor) opts.monitor(it, out.x, rnorm);
            if (rnorm <= target) {
                rnorm = true_residual();
                restart = true;
                break;
            }
            for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
    }
}

}  // namespace srcid
