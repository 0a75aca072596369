#pragma once

// Nested fine/coarse structured quadrilateral meshes on the unit square and
// the coarse-node neighborhoods built on top of them.
//
// Node numbering is row-major by (y, x) on both grids:
//   id = iy * (nx + 1) + ix
// Cell/element numbering follows the same rule with nx cells per row.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mlgms/errors.hpp"

namespace mlgms {

using Point = std::array<double, 2>;

/// Half-open rectangle of fine cells [cx0, cx1) x [cy0, cy1).
struct CellRect {
    int cx0 = 0, cx1 = 0, cy0 = 0, cy1 = 0;

    int cells_x() const { return cx1 - cx0; }
    int cells_y() const { return cy1 - cy0; }
    int nodes_x() const { return cells_x() + 1; }
    int nodes_y() const { return cells_y() + 1; }
    int num_nodes() const { return nodes_x() * nodes_y(); }
};

class StructuredGridPair {
public:
    StructuredGridPair() = default;

    int nx_fine() const { return nx_fine_; }
    int ny_fine() const { return ny_fine_; }
    int nx_coarse() const { return nx_coarse_; }
    int ny_coarse() const { return ny_coarse_; }

    /// Fine cells per coarse cell in each direction.
    int ratio_x() const { return nx_fine_ / nx_coarse_; }
    int ratio_y() const { return ny_fine_ / ny_coarse_; }

    double hx() const { return 1.0 / nx_fine_; }
    double hy() const { return 1.0 / ny_fine_; }
    double h() const { return hx(); }
    double H() const { return 1.0 / nx_coarse_; }

    int num_fine_nodes() const { return (nx_fine_ + 1) * (ny_fine_ + 1); }
    int num_fine_cells() const { return nx_fine_ * ny_fine_; }
    int num_coarse_nodes() const { return (nx_coarse_ + 1) * (ny_coarse_ + 1); }
    int num_coarse_elements() const { return nx_coarse_ * ny_coarse_; }

    int fine_node(int ix, int iy) const { return iy * (nx_fine_ + 1) + ix; }
    int coarse_node(int jx, int jy) const { return jy * (nx_coarse_ + 1) + jx; }
    int coarse_element(int ex, int ey) const { return ey * nx_coarse_ + ex; }

    const std::vector<Point>& fine_coordinates() const { return fine_xy_; }
    const std::vector<Point>& coarse_coordinates() const { return coarse_xy_; }

    bool on_boundary(int fine_node_id) const {
        const int ix = fine_node_id % (nx_fine_ + 1);
        const int iy = fine_node_id / (nx_fine_ + 1);
        return ix == 0 || iy == 0 || ix == nx_fine_ || iy == ny_fine_;
    }

    /// Fine-cell rectangle covered by coarse element (ex, ey).
    CellRect coarse_element_cells(int ex, int ey) const {
        return {ex * ratio_x(), (ex + 1) * ratio_x(), ey * ratio_y(), (ey + 1) * ratio_y()};
    }

    /// Corner node ids of coarse element e in counter-clockwise order
    /// (lower-left, lower-right, upper-right, upper-left).
    std::array<int, 4> coarse_element_vertices(int e) const {
        const int ex = e % nx_coarse_;
        const int ey = e / nx_coarse_;
        return {coarse_node(ex, ey), coarse_node(ex + 1, ey), coarse_node(ex + 1, ey + 1),
                coarse_node(ex, ey + 1)};
    }

    /// Stable fingerprint of the grid dimensions (used by the offline cache).
    std::uint64_t hash() const {
        std::uint64_t v = 1469598103934665603ULL;
        for (int d : {nx_fine_, ny_fine_, nx_coarse_, ny_coarse_}) {
            v ^= static_cast<std::uint64_t>(d);
            v *= 1099511628211ULL;
        }
        return v;
    }

    friend StructuredGridPair build_grids(int nx_fine, int ny_fine, int nx_coarse, int ny_coarse);

private:
    int nx_fine_ = 0, ny_fine_ = 0, nx_coarse_ = 0, ny_coarse_ = 0;
    std::vector<Point> fine_xy_;
    std::vector<Point> coarse_xy_;
};

inline StructuredGridPair build_grids(int nx_fine, int ny_fine, int nx_coarse, int ny_coarse) {
    if (nx_fine < 1 || ny_fine < 1 || nx_coarse < 1 || ny_coarse < 1) {
        throw ConfigError("grid cell counts must be >= 1");
    }
    if (nx_fine % nx_coarse != 0) {
        throw ConfigError("nx_fine=" + std::to_string(nx_fine) + " is not divisible by nx_coarse=" +
                          std::to_string(nx_coarse));
    }
    if (ny_fine % ny_coarse != 0) {
        throw ConfigError("ny_fine=" + std::to_string(ny_fine) + " is not divisible by ny_coarse=" +
                          std::to_string(ny_coarse));
    }
    StructuredGridPair g;
    g.nx_fine_ = nx_fine;
    g.ny_fine_ = ny_fine;
    g.nx_coarse_ = nx_coarse;
    g.ny_coarse_ = ny_coarse;
    g.fine_xy_.reserve(g.num_fine_nodes());
    for (int iy = 0; iy <= ny_fine; ++iy)
        for (int ix = 0; ix <= nx_fine; ++ix)
            g.fine_xy_.push_back({static_cast<double>(ix) / nx_fine, static_cast<double>(iy) / ny_fine});
    g.coarse_xy_.reserve(g.num_coarse_nodes());
    for (int jy = 0; jy <= ny_coarse; ++jy)
        for (int jx = 0; jx <= nx_coarse; ++jx)
            g.coarse_xy_.push_back(
                {static_cast<double>(jx) / nx_coarse, static_cast<double>(jy) / ny_coarse});
    return g;
}

/// Support of the basis functions attached to one coarse node: the union of
/// coarse elements having that node as a vertex.
struct Neighborhood {
    int coarse_node_index = 0;
    std::vector<int> member_coarse_elements;  // sorted
    CellRect cells;                           // fine cells spanned (always a rectangle)
    std::vector<int> fine_nodes;              // sorted global ids, row-major inside `cells`
    std::vector<bool> interior_mask;          // true for nodes not on the boundary of the neighborhood

    int size() const { return static_cast<int>(fine_nodes.size()); }

    /// Local index of global fine node (ix, iy); caller guarantees membership.
    int local_index(const StructuredGridPair& g, int global_id) const {
        const int ix = global_id % (g.nx_fine() + 1) - cells.cx0;
        const int iy = global_id / (g.nx_fine() + 1) - cells.cy0;
        return iy * cells.nodes_x() + ix;
    }

    bool contains(const StructuredGridPair& g, int global_id) const {
        const int ix = global_id % (g.nx_fine() + 1);
        const int iy = global_id / (g.nx_fine() + 1);
        return ix >= cells.cx0 && ix <= cells.cx1 && iy >= cells.cy0 && iy <= cells.cy1;
    }
};

/// Global fine node ids of a cell rectangle, row-major.
inline std::vector<int> rect_nodes(const StructuredGridPair& g, const CellRect& r) {
    std::vector<int> ids;
    ids.reserve(r.num_nodes());
    for (int iy = r.cy0; iy <= r.cy1; ++iy)
        for (int ix = r.cx0; ix <= r.cx1; ++ix) ids.push_back(g.fine_node(ix, iy));
    return ids;
}

inline std::vector<Neighborhood> build_neighborhoods(const StructuredGridPair& g) {
    std::vector<Neighborhood> out;
    out.reserve(g.num_coarse_nodes());
    for (int jy = 0; jy <= g.ny_coarse(); ++jy) {
        for (int jx = 0; jx <= g.nx_coarse(); ++jx) {
            Neighborhood nb;
            nb.coarse_node_index = g.coarse_node(jx, jy);
            const int ex0 = std::max(jx - 1, 0), ex1 = std::min(jx, g.nx_coarse() - 1);
            const int ey0 = std::max(jy - 1, 0), ey1 = std::min(jy, g.ny_coarse() - 1);
            for (int ey = ey0; ey <= ey1; ++ey)
                for (int ex = ex0; ex <= ex1; ++ex) nb.member_coarse_elements.push_back(g.coarse_element(ex, ey));
            nb.cells = {ex0 * g.ratio_x(), (ex1 + 1) * g.ratio_x(), ey0 * g.ratio_y(), (ey1 + 1) * g.ratio_y()};
            nb.fine_nodes = rect_nodes(g, nb.cells);
            nb.interior_mask.resize(nb.fine_nodes.size());
            for (int ly = 0; ly < nb.cells.nodes_y(); ++ly)
                for (int lx = 0; lx < nb.cells.nodes_x(); ++lx)
                    nb.interior_mask[ly * nb.cells.nodes_x() + lx] =
                        lx > 0 && ly > 0 && lx < nb.cells.cells_x() && ly < nb.cells.cells_y();
            out.push_back(std::move(nb));
        }
    }
    return out;
}

} // namespace mlgms
