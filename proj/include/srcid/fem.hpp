#pragma once

#include "srcid/errors.hpp"
#include "srcid/linalg.hpp"
#include "srcid/mesh.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace srcid {

/// Nodal coefficient vector of a P1 finite-element function.
class Field {
public:
    Field() = default;
    explicit Field(std::size_t n, double value = 0.0) : values_(n, value) {}
    explicit Field(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const noexcept { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    operator std::span<const double>() const noexcept { return values_; }
    operator std::span<double>() noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    Field& operator+=(const Field& other) {
        check_same_size(other);
        for (std::size_t i = 0; i < size(); ++i) values_[i] += other.values_[i];
        return *this;
    }
    Field& operator-=(const Field& other) {
        check_same_size(other);
        for (std::size_t i = 0; i < size(); ++i) values_[i] -= other.values_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }

    bool operator==(const Field&) const = default;

private:
    void check_same_size(const Field& other) const {
        if (other.size() != size()) {
            throw InvalidArgument("field size mismatch: " + std::to_string(size()) + " vs " +
                                  std::to_string(other.size()));
        }
    }

    std::vector<double> values_;
};

using ScalarFunction = std::function<double(Point)>;

/// Coefficients of the elliptic part: -div(k grad u) + c u in the domain,
/// k du/dn + mu u = 0 on the boundary.
struct Coefficients {
    ScalarFunction k;
    ScalarFunction c;
    ScalarFunction mu;

    static Coefficients constant(double k, double c, double mu) {
        return {[k](Point) { return k; }, [c](Point) { return c; }, [mu](Point) { return mu; }};
    }
};

struct AssemblyOptions {
    /// Replace the consistent mass matrix by its row-sum diagonal.
    bool lump_mass = false;
};

/// Mass matrix M and stiffness matrix K of the bilinear form; A = M^-1 K.
class DiscreteOperator {
public:
    DiscreteOperator() = default;

    DiscreteOperator(SparseMatrix mass, SparseMatrix stiffness, std::optional<std::vector<double>> lumped = {})
        : M_(std::move(mass)), K_(std::move(stiffness)), lumped_(std::move(lumped)) {
        if (M_.dim() != K_.dim()) throw InvalidArgument("mass and stiffness dimensions differ");
        if (lumped_ && lumped_->size() != M_.dim()) throw InvalidArgument("lumped mass dimension mismatch");
        mass_diag_ = M_.diagonal();
        stiff_diag_ = K_.diagonal();
    }

    std::size_t dof() const noexcept { return M_.dim(); }
    const SparseMatrix& mass() const noexcept { return M_; }
    const SparseMatrix& stiffness() const noexcept { return K_; }
    const std::optional<std::vector<double>>& lumped_mass() const noexcept { return lumped_; }
    std::span<const double> mass_diagonal() const noexcept { return mass_diag_; }
    std::span<const double> stiffness_diagonal() const noexcept { return stiff_diag_; }

private:
    SparseMatrix M_;
    SparseMatrix K_;
    std::optional<std::vector<double>> lumped_;
    std::vector<double> mass_diag_;
    std::vector<double> stiff_diag_;
};

namespace detail {

// Interior 3-point rule on the reference triangle, exact for quadratics.
inline constexpr std::array<std::array<double, 3>, 3> kTriangleBary{{
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
}};

inline Point at_bary(const Point& p0, const Point& p1, const Point& p2, const std::array<double, 3>& l) {
    return {l[0] * p0.x1 + l[1] * p1.x1 + l[2] * p2.x1, l[0] * p0.x2 + l[1] * p1.x2 + l[2] * p2.x2};
}

inline std::string describe(const Point& p) {
    std::ostringstream os;
    os.precision(17);
    os << '(' << p.x1 << ", " << p.x2 << ')';
    return os.str();
}

inline double checked(const ScalarFunction& f, const char* name, Point p, bool strictly_positive) {
    if (!f) throw InvalidCoefficient(std::string("coefficient ") + name + " is not set");
    const double v = f(p);
    const bool ok = std::isfinite(v) && (strictly_positive ? v > 0.0 : v >= 0.0);
    if (!ok) {
        std::ostringstream os;
        os.precision(17);
        os << "coefficient " << name << " = " << v << " at quadrature point " << describe(p) << " must be "
           << (strictly_positive ? "> 0" : ">= 0");
        throw InvalidCoefficient(os.str());
    }
    return v;
}

}  // namespace detail

/// Assembles P1 mass and stiffness matrices.
///
/// K realizes  int(k grad u . grad v + c u v) dx + int_boundary(mu u v) ds  and
/// M realizes  int(u v) dx. Element blocks are symmetric, so both matrices are
/// symmetric up to summation order.
inline DiscreteOperator assemble(const Mesh& mesh, const Coefficients& coeffs, const AssemblyOptions& opts = {}) {
    const std::size_t n = mesh.node_count();
    std::vector<Triplet> mass, stiff;
    mass.reserve(9 * mesh.triangles.size());
    stiff.reserve(9 * mesh.triangles.size() + 4 * mesh.boundary_edges.size());

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Point& p0 = mesh.nodes[tri[0]];
        const Point& p1 = mesh.nodes[tri[1]];
        const Point& p2 = mesh.nodes[tri[2]];
        const double det = mesh.twice_signed_area(t);
        if (!(det > 0.0)) throw InvalidArgument("triangle " + std::to_string(t) + " has non-positive area");
        const double area = 0.5 * det;

        // Gradients of the barycentric coordinates.
        const std::array<std::array<double, 2>, 3> grad{{
            {(p1.x2 - p2.x2) / det, (p2.x1 - p1.x1) / det},
            {(p2.x2 - p0.x2) / det, (p0.x1 - p2.x1) / det},
            {(p0.x2 - p1.x2) / det, (p1.x1 - p0.x1) / det},
        }};

        std::array<std::array<double, 3>, 3> Me{}, Ke{};
        double k_mean = 0.0;
        for (const auto& l : detail::kTriangleBary) {
            const Point q = detail::at_bary(p0, p1, p2, l);
            const double w = area / 3.0;
            k_mean += detail::checked(coeffs.k, "k", q, true) / 3.0;
            const double cq = detail::checked(coeffs.c, "c", q, false);
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    Me[i][j] += w * l[i] * l[j];
                    Ke[i][j] += w * cq * l[i] * l[j];
                }
            }
        }
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                Ke[i][j] += area * k_mean * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            }
        }
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                mass.push_back({tri[i], tri[j], Me[i][j]});
                stiff.push_back({tri[i], tri[j], Ke[i][j]});
            }
        }
    }

    // 2-point Gauss on boundary edges.
    const double g = 0.5 / std::sqrt(3.0);
    const std::array<double, 2> gauss{0.5 - g, 0.5 + g};
    for (const auto& e : mesh.boundary_edges) {
        const Point& a = mesh.nodes[e.a];
        const Point& b = mesh.nodes[e.b];
        const double len = std::hypot(b.x1 - a.x1, b.x2 - a.x2);
        std::array<std::array<double, 2>, 2> Be{};
        for (double s : gauss) {
            const Point q{a.x1 + s * (b.x1 - a.x1), a.x2 + s * (b.x2 - a.x2)};
            const double mu = detail::checked(coeffs.mu, "mu", q, false);
            const std::array<double, 2> phi{1.0 - s, s};
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) Be[i][j] += 0.5 * len * mu * phi[i] * phi[j];
        }
        const std::array<std::size_t, 2> ids{e.a, e.b};
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) stiff.push_back({ids[i], ids[j], Be[i][j]});
    }

    SparseMatrix M = SparseMatrix::from_triplets(n, std::move(mass));
    SparseMatrix K = SparseMatrix::from_triplets(n, std::move(stiff));
    if (opts.lump_mass) {
        std::vector<double> lumped = M.row_sums();
        SparseMatrix D = SparseMatrix::diagonal(lumped);
        return DiscreteOperator(std::move(D), std::move(K), std::move(lumped));
    }
    return DiscreteOperator(std::move(M), std::move(K));
}

/// Nodal interpolant of g.
inline Field interpolate(const Mesh& mesh, const ScalarFunction& g) {
    Field f(mesh.node_count());
    for (std::size_t i = 0; i < mesh.node_count(); ++i) f[i] = g(mesh.nodes[i]);
    return f;
}

/// Solves M x = b.
inline Field solve_mass(const DiscreteOperator& op, std::span<const double> b, const SolveOptions& solve = {}) {
    if (b.size() != op.dof()) throw InvalidArgument("mass solve: dimension mismatch");
    if (op.lumped_mass()) {
        const auto& d = *op.lumped_mass();
        Field x(op.dof());
        for (std::size_t i = 0; i < op.dof(); ++i) x[i] = b[i] / d[i];
        return x;
    }
    return Field(cg_solve(op.mass(), b, solve, op.mass_diagonal()).x);
}

/// L2 projection onto the P1 space: M^-1 b with b_i = int g chi_i dx.
inline Field project_l2(const DiscreteOperator& op, const ScalarFunction& g, const Mesh& mesh,
                        const SolveOptions& solve = {}) {
    if (mesh.node_count() != op.dof()) throw InvalidArgument("project_l2: mesh does not match operator");
    std::vector<double> b(op.dof(), 0.0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Point& p0 = mesh.nodes[tri[0]];
        const Point& p1 = mesh.nodes[tri[1]];
        const Point& p2 = mesh.nodes[tri[2]];
        const double w = 0.5 * mesh.twice_signed_area(t) / 3.0;
        for (const auto& l : detail::kTriangleBary) {
            const double gq = g(detail::at_bary(p0, p1, p2, l));
            for (std::size_t i = 0; i < 3; ++i) b[tri[i]] += w * gq * l[i];
        }
    }
    return solve_mass(op, b, solve);
}

/// A y = M^-1 (K y).
inline Field apply_A(const DiscreteOperator& op, const Field& y, const SolveOptions& solve = {}) {
    if (y.size() != op.dof()) throw InvalidArgument("apply_A: dimension mismatch");
    return solve_mass(op, spmv(op.stiffness(), y), solve);
}

inline double m_norm(const DiscreteOperator& op, const Field& x) { return m_norm(op.mass(), x); }
inline double m_inner(const DiscreteOperator& op, const Field& x, const Field& y) { return m_inner(op.mass(), x, y); }

}  // namespace srcid
