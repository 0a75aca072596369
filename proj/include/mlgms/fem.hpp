#pragma once

// Bilinear (Q1) finite elements on the fine grid: element kernels, patch and
// global assembly, the Dirichlet fine solve and a dense generalized symmetric
// eigensolver.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mlgms/errors.hpp"
#include "mlgms/grid.hpp"

namespace mlgms {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

namespace q1 {

// 2x2 Gauss rule on the reference cell [0,1]^2; local vertex order is
// (0,0), (1,0), (1,1), (0,1).
struct Tables {
    std::array<std::array<double, 2>, 4> points{};
    std::array<std::array<double, 4>, 4> shape{};  // shape[q][a]
    std::array<std::array<double, 4>, 4> dxi{};    // d/dxi
    std::array<std::array<double, 4>, 4> deta{};   // d/deta

    Tables() {
        const double g0 = 0.5 - 0.5 / std::sqrt(3.0), g1 = 0.5 + 0.5 / std::sqrt(3.0);
        points = {{{g0, g0}, {g1, g0}, {g1, g1}, {g0, g1}}};
        for (int q = 0; q < 4; ++q) {
            const double s = points[q][0], t = points[q][1];
            shape[q] = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
            dxi[q] = {-(1 - t), (1 - t), t, -t};
            deta[q] = {-(1 - s), -s, s, (1 - s)};
        }
    }
};

inline const Tables& tables() {
    static const Tables t;
    return t;
}

using Mat4 = Eigen::Matrix4d;

/// Stiffness of one hx-by-hy cell for a coefficient given at the 4 vertices
/// (bilinearly interpolated to the Gauss points).
inline Mat4 stiffness(const std::array<double, 4>& coeff, double hx, double hy) {
    const auto& t = tables();
    Mat4 k = Mat4::Zero();
    const double rx = hy / hx, ry = hx / hy;
    for (int q = 0; q < 4; ++q) {
        double c = 0;
        for (int a = 0; a < 4; ++a) c += t.shape[q][a] * coeff[a];
        c *= 0.25;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) k(a, b) += c * (rx * t.dxi[q][a] * t.dxi[q][b] + ry * t.deta[q][a] * t.deta[q][b]);
    }
    return k;
}

/// Weighted mass matrix of one cell, weight interpolated from the vertices.
inline Mat4 mass(const std::array<double, 4>& coeff, double hx, double hy) {
    const auto& t = tables();
    Mat4 m = Mat4::Zero();
    for (int q = 0; q < 4; ++q) {
        double c = 0;
        for (int a = 0; a < 4; ++a) c += t.shape[q][a] * coeff[a];
        c *= 0.25 * hx * hy;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) m(a, b) += c * t.shape[q][a] * t.shape[q][b];
    }
    return m;
}

} // namespace q1

/// Global node ids of fine cell (cx, cy) in local vertex order.
inline std::array<int, 4> cell_nodes(const StructuredGridPair& g, int cx, int cy) {
    return {g.fine_node(cx, cy), g.fine_node(cx + 1, cy), g.fine_node(cx + 1, cy + 1), g.fine_node(cx, cy + 1)};
}

inline std::array<double, 4> gather(const Eigen::VectorXd& v, const std::array<int, 4>& ids) {
    return {v[ids[0]], v[ids[1]], v[ids[2]], v[ids[3]]};
}

enum class Form { Stiffness, Mass };

/// Dense matrix of a bilinear form over the nodes of a cell rectangle
/// (natural boundary conditions, row-major local numbering).
inline Eigen::MatrixXd assemble_patch_dense(const StructuredGridPair& g, const CellRect& r,
                                            const Eigen::VectorXd& coeff, Form form) {
    const int nxn = r.nodes_x();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r.num_nodes(), r.num_nodes());
    for (int cy = r.cy0; cy < r.cy1; ++cy) {
        for (int cx = r.cx0; cx < r.cx1; ++cx) {
            const auto c = gather(coeff, cell_nodes(g, cx, cy));
            const q1::Mat4 ke = form == Form::Stiffness ? q1::stiffness(c, g.hx(), g.hy()) : q1::mass(c, g.hx(), g.hy());
            const int lx = cx - r.cx0, ly = cy - r.cy0;
            const std::array<int, 4> loc = {ly * nxn + lx, ly * nxn + lx + 1, (ly + 1) * nxn + lx + 1, (ly + 1) * nxn + lx};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) out(loc[a], loc[b]) += ke(a, b);
        }
    }
    return out;
}

/// Sparse variant of assemble_patch_dense.
inline SparseMatrix assemble_patch(const StructuredGridPair& g, const CellRect& r, const Eigen::VectorXd& coeff,
                                   Form form) {
    const int nxn = r.nodes_x();
    std::vector<Triplet> trip;
    trip.reserve(16 * r.cells_x() * r.cells_y());
    for (int cy = r.cy0; cy < r.cy1; ++cy) {
        for (int cx = r.cx0; cx < r.cx1; ++cx) {
            const auto c = gather(coeff, cell_nodes(g, cx, cy));
            const q1::Mat4 ke = form == Form::Stiffness ? q1::stiffness(c, g.hx(), g.hy()) : q1::mass(c, g.hx(), g.hy());
            const int lx = cx - r.cx0, ly = cy - r.cy0;
            const std::array<int, 4> loc = {ly * nxn + lx, ly * nxn + lx + 1, (ly + 1) * nxn + lx + 1, (ly + 1) * nxn + lx};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) trip.emplace_back(loc[a], loc[b], ke(a, b));
        }
    }
    SparseMatrix m(r.num_nodes(), r.num_nodes());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

using ScalarField = std::function<double(const Point&)>;

/// Dirichlet data on the outer boundary. `g` is evaluated at every fine node
/// to form the lifting function, so it should be defined on the whole domain.
struct BoundarySpec {
    std::string name = "x1";
    ScalarField g = [](const Point& x) { return x[0]; };

    static BoundarySpec linear_x1() { return {}; }
    static BoundarySpec homogeneous() { return {"zero", [](const Point&) { return 0.0; }}; }
};

struct SourceSpec {
    std::string name = "one";
    ScalarField f = [](const Point&) { return 1.0; };

    static SourceSpec constant(double v) {
        return {v == 1.0 ? "one" : std::to_string(v), [v](const Point&) { return v; }};
    }
};

struct FineSystem {
    SparseMatrix stiffness;              // all fine nodes, natural BC
    Eigen::VectorXd load;                // all fine nodes
    std::vector<int> dirichlet_nodes;    // sorted boundary node ids
    Eigen::VectorXd dirichlet_values;    // g at dirichlet_nodes
    std::vector<int> free_nodes;         // sorted interior node ids
    Eigen::VectorXd lift;                // g evaluated at every fine node

    int size() const { return static_cast<int>(load.size()); }
};

inline Eigen::VectorXd load_vector(const StructuredGridPair& g, const SourceSpec& source) {
    const auto& t = q1::tables();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(g.num_fine_nodes());
    const double hx = g.hx(), hy = g.hy();
    for (int cy = 0; cy < g.ny_fine(); ++cy) {
        for (int cx = 0; cx < g.nx_fine(); ++cx) {
            const auto ids = cell_nodes(g, cx, cy);
            for (int q = 0; q < 4; ++q) {
                const Point xq = {(cx + t.points[q][0]) * hx, (cy + t.points[q][1]) * hy};
                const double fq = 0.25 * hx * hy * source.f(xq);
                for (int a = 0; a < 4; ++a) f[ids[a]] += fq * t.shape[q][a];
            }
        }
    }
    return f;
}

inline FineSystem assemble_fine(const StructuredGridPair& g, const Eigen::VectorXd& permeability,
                                const SourceSpec& source, const BoundarySpec& boundary) {
    if (permeability.size() != g.num_fine_nodes()) throw ConfigError("permeability field size does not match grid");
    for (int p = 0; p < permeability.size(); ++p) {
        if (!(permeability[p] > 0.0)) {
            throw DomainError("permeability must be positive; node " + std::to_string(p) + " has " +
                              std::to_string(permeability[p]));
        }
    }
    FineSystem s;
    const CellRect all{0, g.nx_fine(), 0, g.ny_fine()};
    s.stiffness = assemble_patch(g, all, permeability, Form::Stiffness);
    s.load = load_vector(g, source);
    const auto& xy = g.fine_coordinates();
    s.lift.resize(g.num_fine_nodes());
    for (int p = 0; p < g.num_fine_nodes(); ++p) {
        s.lift[p] = boundary.g(xy[p]);
        if (g.on_boundary(p)) s.dirichlet_nodes.push_back(p);
        else s.free_nodes.push_back(p);
    }
    s.dirichlet_values.resize(static_cast<Eigen::Index>(s.dirichlet_nodes.size()));
    for (std::size_t i = 0; i < s.dirichlet_nodes.size(); ++i) s.dirichlet_values[i] = s.lift[s.dirichlet_nodes[i]];
    return s;
}

/// Rows/columns of `a` restricted to `keep` (both sorted).
inline SparseMatrix restrict_symmetric(const SparseMatrix& a, const std::vector<int>& keep) {
    std::vector<int> map(a.rows(), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
    std::vector<Triplet> trip;
    trip.reserve(a.nonZeros());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            if (map[it.row()] >= 0 && map[it.col()] >= 0) trip.emplace_back(map[it.row()], map[it.col()], it.value());
    SparseMatrix out(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

/// Fine-grid pressure with the Dirichlet rows eliminated. Relative residual of
/// the reduced system is checked against 1e-10.
inline Eigen::VectorXd solve_fine(const FineSystem& s) {
    // rhs = F - A * lift on the free rows, lift restricted to boundary values.
    Eigen::VectorXd boundary_lift = Eigen::VectorXd::Zero(s.size());
    for (int p : s.dirichlet_nodes) boundary_lift[p] = s.lift[p];
    const Eigen::VectorXd full_rhs = s.load - s.stiffness * boundary_lift;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(s.free_nodes.size()));
    for (std::size_t i = 0; i < s.free_nodes.size(); ++i) rhs[i] = full_rhs[s.free_nodes[i]];

    Eigen::VectorXd u = boundary_lift;
    if (s.free_nodes.empty()) return u;
    const SparseMatrix aii = restrict_symmetric(s.stiffness, s.free_nodes);
    Eigen::SimplicialLLT<SparseMatrix> llt(aii);
    if (llt.info() != Eigen::Success) throw NumericalError("fine stiffness factorization failed (not SPD)");
    const Eigen::VectorXd ui = llt.solve(rhs);
    const double scale = std::max(rhs.norm(), 1e-300);
    const double res = (aii * ui - rhs).norm() / scale;
    if (!(res <= 1e-10) && rhs.norm() > 0) {
        throw NumericalError("fine solve relative residual " + std::to_string(res) + " exceeds 1e-10");
    }
    for (std::size_t i = 0; i < s.free_nodes.size(); ++i) u[s.free_nodes[i]] = ui[i];
    return u;
}

/// sqrt(v^T A v)
inline double energy_norm(const SparseMatrix& a, const Eigen::VectorXd& v) {
    return std::sqrt(std::max(0.0, v.dot(a * v)));
}

struct EigArtifacts {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // S-orthonormal columns
    double residual = 0.0;         // max_k ||A v_k - lambda_k S v_k||
    double orthogonality = 0.0;    // max |V^T S V - I|
};

/// The m smallest eigenpairs of A v = lambda S v for symmetric A and SPD S.
inline EigArtifacts generalized_symmetric_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s, int m) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n || s.rows() != n || s.cols() != n) throw ConfigError("eigenproblem matrices must be square and equal-sized");
    if (m < 0 || m > n) throw ConfigError("requested " + std::to_string(m) + " eigenpairs of a size-" + std::to_string(n) + " pencil");
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0) {
        throw NumericalError("mass matrix of the eigenproblem is not positive definite (Cholesky failed); "
                             "raise the weight floor");
    }
    const auto l = llt.matrixL();
    Eigen::MatrixXd c = l.solve(a);
    c = l.solve(c.transpose()).transpose();
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
    EigArtifacts out;
    out.eigenvalues = es.eigenvalues().head(m);
    out.eigenvectors = llt.matrixU().solve(es.eigenvectors().leftCols(m));
    if (m > 0) {
        const Eigen::MatrixXd sv = s * out.eigenvectors;
        out.residual = ((a * out.eigenvectors) - sv * out.eigenvalues.asDiagonal()).colwise().norm().maxCoeff();
        out.orthogonality =
            (out.eigenvectors.transpose() * sv - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    }
    return out;
}

} // namespace mlgms
