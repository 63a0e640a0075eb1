#pragma once

#include "srcid/errors.hpp"

#include <array>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace srcid {

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

/// Outward side of the rectangle a boundary edge lies on.
enum class Side { bottom, right, top, left };

struct BoundaryEdge {
    std::size_t a;
    std::size_t b;
    Side side;
};

struct Rectangle {
    double x1_min = 0.0;
    double x1_max = 1.0;
    double x2_min = 0.0;
    double x2_max = 1.0;
};

/// Structured triangulation of an axis-aligned rectangle.
///
/// Nodes are numbered row-major: node (i, j) has index j (m + 1) + i and sits
/// at x1 = i / m, x2 = j / m (scaled to the rectangle). Every cell is split
/// along its lower-left to upper-right diagonal; triangles are counter-clockwise.
struct Mesh {
    std::vector<Point> nodes;
    std::vector<std::array<std::size_t, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    std::size_t m = 0;
    Rectangle domain;

    std::size_t node_count() const noexcept { return nodes.size(); }

    /// Twice the signed area of triangle t.
    double twice_signed_area(std::size_t t) const {
        const auto& tri = triangles.at(t);
        const Point& p0 = nodes[tri[0]];
        const Point& p1 = nodes[tri[1]];
        const Point& p2 = nodes[tri[2]];
        return (p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2);
    }
};

inline Mesh build_rectangle_mesh(const Rectangle& domain, std::size_t m) {
    if (m == 0) throw InvalidArgument("mesh needs at least one subdivision per axis");
    if (!(domain.x1_max > domain.x1_min) || !(domain.x2_max > domain.x2_min)) {
        throw InvalidArgument("mesh domain must have positive extent");
    }

    Mesh mesh;
    mesh.m = m;
    mesh.domain = domain;
    const std::size_t row = m + 1;
    const auto id = [row](std::size_t i, std::size_t j) { return j * row + i; };

    mesh.nodes.reserve(row * row);
    for (std::size_t j = 0; j <= m; ++j) {
        for (std::size_t i = 0; i <= m; ++i) {
            const double s = static_cast<double>(i) / static_cast<double>(m);
            const double t = static_cast<double>(j) / static_cast<double>(m);
            mesh.nodes.push_back({domain.x1_min + s * (domain.x1_max - domain.x1_min),
                                  domain.x2_min + t * (domain.x2_max - domain.x2_min)});
        }
    }

    mesh.triangles.reserve(2 * m * m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t ll = id(i, j), lr = id(i + 1, j), ur = id(i + 1, j + 1), ul = id(i, j + 1);
            mesh.triangles.push_back({ll, lr, ur});
            mesh.triangles.push_back({ll, ur, ul});
        }
    }

    mesh.boundary_edges.reserve(4 * m);
    for (std::size_t i = 0; i < m; ++i) mesh.boundary_edges.push_back({id(i, 0), id(i + 1, 0), Side::bottom});
    for (std::size_t j = 0; j < m; ++j) mesh.boundary_edges.push_back({id(m, j), id(m, j + 1), Side::right});
    for (std::size_t i = m; i > 0; --i) mesh.boundary_edges.push_back({id(i, m), id(i - 1, m), Side::top});
    for (std::size_t j = m; j > 0; --j) mesh.boundary_edges.push_back({id(0, j), id(0, j - 1), Side::left});
    return mesh;
}

inline Mesh build_unit_square_mesh(std::size_t m) { return build_rectangle_mesh(Rectangle{}, m); }

/// Debug dump: "x1 x2" per node, a blank line, then one index triple per triangle.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
    const auto old = os.precision(17);
    for (const auto& p : mesh.nodes) os << p.x1 << ' ' << p.x2 << '\n';
    os << '\n';
    for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os.precision(old);
}

}  // namespace srcid
