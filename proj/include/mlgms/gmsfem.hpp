#pragma once

// Generalized multiscale spaces: partition of unity, energy weight, snapshot,
// offline and online spaces per coarse neighborhood, global coupling and the
// coarse Galerkin solve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "mlgms/errors.hpp"
#include "mlgms/fem.hpp"
#include "mlgms/grid.hpp"
#include "mlgms/parallel.hpp"
#include "mlgms/randfield.hpp"
#include "mlgms/rng.hpp"

namespace mlgms {

/// chi[i] holds the values of chi_i on the fine nodes of neighborhood i
/// (local row-major numbering).
struct PartitionOfUnity {
    std::vector<Eigen::VectorXd> chi;
};

namespace detail {

inline double hat_1d(int local, int cells, int vertex) {
    const double s = static_cast<double>(local) / cells;
    return vertex == 0 ? 1.0 - s : s;
}

} // namespace detail

inline PartitionOfUnity build_partition_of_unity(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                                 const Eigen::VectorXd& perm) {
    PartitionOfUnity pu;
    pu.chi.resize(nbs.size());
    for (std::size_t i = 0; i < nbs.size(); ++i) pu.chi[i] = Eigen::VectorXd::Zero(nbs[i].size());
    const int rx = g.ratio_x(), ry = g.ratio_y();
    for (int ey = 0; ey < g.ny_coarse(); ++ey) {
        for (int ex = 0; ex < g.nx_coarse(); ++ex) {
            const CellRect rect = g.coarse_element_cells(ex, ey);
            const Eigen::MatrixXd a = assemble_patch_dense(g, rect, perm, Form::Stiffness);
            const int nxn = rect.nodes_x();
            std::vector<int> inner, bnd;
            for (int ly = 0; ly <= ry; ++ly)
                for (int lx = 0; lx <= rx; ++lx)
                    (lx > 0 && ly > 0 && lx < rx && ly < ry ? inner : bnd).push_back(ly * nxn + lx);
            const int ni = static_cast<int>(inner.size()), nbd = static_cast<int>(bnd.size());
            Eigen::MatrixXd aii(ni, ni), aib(ni, nbd);
            for (int r = 0; r < ni; ++r) {
                for (int c = 0; c < ni; ++c) aii(r, c) = a(inner[r], inner[c]);
                for (int c = 0; c < nbd; ++c) aib(r, c) = a(inner[r], bnd[c]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt;
            if (ni > 0) {
                llt.compute(aii);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("partition of unity: singular local system in coarse element " +
                                         std::to_string(g.coarse_element(ex, ey)));
            }
            for (int vy = 0; vy < 2; ++vy) {
                for (int vx = 0; vx < 2; ++vx) {
                    Eigen::VectorXd local(rect.num_nodes());
                    for (int ly = 0; ly <= ry; ++ly)
                        for (int lx = 0; lx <= rx; ++lx)
                            local[ly * nxn + lx] = detail::hat_1d(lx, rx, vx) * detail::hat_1d(ly, ry, vy);
                    if (ni > 0) {
                        Eigen::VectorXd gb(nbd);
                        for (int c = 0; c < nbd; ++c) gb[c] = local[bnd[c]];
                        const Eigen::VectorXd xi = llt.solve(-(aib * gb));
                        for (int r = 0; r < ni; ++r) local[inner[r]] = xi[r];
                    }
                    const int node = g.coarse_node(ex + vx, ey + vy);
                    const Neighborhood& nb = nbs[node];
                    for (int ly = 0; ly <= ry; ++ly)
                        for (int lx = 0; lx <= rx; ++lx) {
                            const int gid = g.fine_node(rect.cx0 + lx, rect.cy0 + ly);
                            pu.chi[node][nb.local_index(g, gid)] = local[ly * nxn + lx];
                        }
                }
            }
        }
    }
    return pu;
}

/// Sum of all chi_i at every fine node.
inline Eigen::VectorXd partition_sum(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                     const PartitionOfUnity& pu) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(g.num_fine_nodes());
    for (std::size_t i = 0; i < nbs.size(); ++i)
        for (int k = 0; k < nbs[i].size(); ++k) s[nbs[i].fine_nodes[k]] += pu.chi[i][k];
    return s;
}

/// Nodal kappa * H^2 * sum_i |grad chi_i|^2. Gradients are taken at fine cell
/// centers and averaged over the cells touching each node.
inline Eigen::VectorXd build_ktilde(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                    const Eigen::VectorXd& perm, const PartitionOfUnity& pu) {
    const int nx = g.nx_fine(), ny = g.ny_fine();
    const double hx = g.hx(), hy = g.hy();
    std::vector<double> cell(static_cast<std::size_t>(nx) * ny, 0.0);
    for (int ey = 0; ey < g.ny_coarse(); ++ey) {
        for (int ex = 0; ex < g.nx_coarse(); ++ex) {
            const CellRect rect = g.coarse_element_cells(ex, ey);
            for (int node : g.coarse_element_vertices(g.coarse_element(ex, ey))) {
                const Neighborhood& nb = nbs[node];
                const Eigen::VectorXd& chi = pu.chi[node];
                for (int cy = rect.cy0; cy < rect.cy1; ++cy) {
                    for (int cx = rect.cx0; cx < rect.cx1; ++cx) {
                        const auto ids = cell_nodes(g, cx, cy);
                        const double c0 = chi[nb.local_index(g, ids[0])], c1 = chi[nb.local_index(g, ids[1])];
                        const double c2 = chi[nb.local_index(g, ids[2])], c3 = chi[nb.local_index(g, ids[3])];
                        const double gx = ((c1 - c0) + (c2 - c3)) / (2 * hx);
                        const double gy = ((c3 - c0) + (c2 - c1)) / (2 * hy);
                        cell[static_cast<std::size_t>(cy) * nx + cx] += gx * gx + gy * gy;
                    }
                }
            }
        }
    }
    const double h2 = g.H() * g.H();
    Eigen::VectorXd kt(g.num_fine_nodes());
    for (int iy = 0; iy <= ny; ++iy) {
        for (int ix = 0; ix <= nx; ++ix) {
            double sum = 0;
            int count = 0;
            for (int cy = std::max(iy - 1, 0); cy <= std::min(iy, ny - 1); ++cy)
                for (int cx = std::max(ix - 1, 0); cx <= std::min(ix, nx - 1); ++cx) {
                    sum += cell[static_cast<std::size_t>(cy) * nx + cx];
                    ++count;
                }
            const int p = g.fine_node(ix, iy);
            kt[p] = perm[p] * h2 * sum / count;
        }
    }
    return kt;
}

/// Everything the local eigenproblems need for one permeability field.
struct ParameterFields {
    Eigen::VectorXd perm;
    PartitionOfUnity pu;
    Eigen::VectorXd ktilde;
};

inline ParameterFields parameter_fields(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                        Eigen::VectorXd perm) {
    ParameterFields f;
    f.perm = std::move(perm);
    f.pu = build_partition_of_unity(g, nbs, f.perm);
    f.ktilde = build_ktilde(g, nbs, f.perm, f.pu);
    return f;
}

/// Makes the largest-magnitude entry positive (first one on ties).
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (v[k] < 0) v *= -1.0;
}

constexpr double kWeightShift = 1e-12;

/// Neumann stiffness and kappa-tilde mass on one neighborhood.
struct LocalPencil {
    Eigen::MatrixXd A;
    Eigen::MatrixXd S;
};

inline LocalPencil local_pencil(const StructuredGridPair& g, const Neighborhood& nb, const Eigen::VectorXd& perm,
                                const Eigen::VectorXd& ktilde) {
    LocalPencil p;
    p.A = assemble_patch_dense(g, nb.cells, perm, Form::Stiffness);
    p.S = assemble_patch_dense(g, nb.cells, ktilde, Form::Mass);
    p.S.diagonal().array() += kWeightShift * p.S.trace();
    return p;
}

struct SparsePencil {
    SparseMatrix A;
    SparseMatrix S;
};

inline SparsePencil local_pencil_sparse(const StructuredGridPair& g, const Neighborhood& nb,
                                        const Eigen::VectorXd& perm, const Eigen::VectorXd& ktilde) {
    SparsePencil p;
    p.A = assemble_patch(g, nb.cells, perm, Form::Stiffness);
    p.S = assemble_patch(g, nb.cells, ktilde, Form::Mass);
    double tr = 0;
    for (int k = 0; k < p.S.outerSize(); ++k) tr += p.S.coeff(k, k);
    for (int k = 0; k < p.S.outerSize(); ++k) p.S.coeffRef(k, k) += kWeightShift * tr;
    return p;
}

struct SnapshotSpace {
    Eigen::MatrixXd vectors;                  // local nodes x (J * L)
    std::vector<Eigen::VectorXd> eigenvalues; // per parameter sample, ascending
    int per_parameter = 0;
    double max_residual = 0.0;
    double max_orthogonality = 0.0;

    int size() const { return static_cast<int>(vectors.cols()); }
};

inline SnapshotSpace build_snapshot_space(const StructuredGridPair& g, const Neighborhood& nb,
                                          const std::vector<ParameterFields>& samples, int per_parameter) {
    if (samples.empty()) throw ConfigError("snapshot space needs at least one parameter sample");
    if (per_parameter < 1 || per_parameter > nb.size())
        throw ConfigError("snapshots per parameter must lie in [1, " + std::to_string(nb.size()) + "]");
    SnapshotSpace s;
    s.per_parameter = per_parameter;
    s.vectors.resize(nb.size(), static_cast<Eigen::Index>(samples.size()) * per_parameter);
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const LocalPencil p = local_pencil(g, nb, samples[j].perm, samples[j].ktilde);
        EigArtifacts e;
        try {
            e = generalized_symmetric_eig(p.A, p.S, per_parameter);
        } catch (const NumericalError& ex) {
            throw NumericalError("snapshot eigenproblem (neighborhood " + std::to_string(nb.coarse_node_index) +
                                 ", sample " + std::to_string(j) + "): " + ex.what());
        }
        for (int k = 0; k < per_parameter; ++k) fix_sign(e.eigenvectors.col(k));
        s.vectors.middleCols(static_cast<Eigen::Index>(j) * per_parameter, per_parameter) = e.eigenvectors;
        s.eigenvalues.push_back(e.eigenvalues);
        s.max_residual = std::max(s.max_residual, e.residual);
        s.max_orthogonality = std::max(s.max_orthogonality, e.orthogonality);
    }
    return s;
}

struct LocalOffline {
    Eigen::MatrixXd basis;        // local nodes x M_off, S-bar orthonormal
    Eigen::VectorXd eigenvalues;  // ascending
    int snapshot_rank = 0;
    double orthogonality = 0.0;

    int size() const { return static_cast<int>(basis.cols()); }
};

/// Singular values of the mass-scaled snapshot matrix below this fraction of
/// the largest one count as linear dependence.
constexpr double kSnapshotRankTol = 1e-10;

/// Offline compression of one neighborhood's snapshots with the averaged
/// coefficient. The snapshot set is usually rank deficient (each sample
/// contributes the constant mode), so the eigenproblem is solved on an
/// S-bar-orthonormal basis of its span. If M_off exceeds that rank it is
/// reduced and a message is appended to `warnings`.
inline LocalOffline build_offline_space(const StructuredGridPair& g, const Neighborhood& nb,
                                        const SnapshotSpace& snap, const ParameterFields& averaged, int m_off,
                                        std::vector<std::string>* warnings = nullptr) {
    if (m_off < 1 || m_off > snap.size())
        throw ConfigError("offline dimension " + std::to_string(m_off) + " must lie in [1, " +
                          std::to_string(snap.size()) + "]");
    const LocalPencil p = local_pencil(g, nb, averaged.perm, averaged.ktilde);
    Eigen::LLT<Eigen::MatrixXd> llt(p.S);
    if (llt.info() != Eigen::Success) throw NumericalError("offline mass matrix is not positive definite");
    const Eigen::MatrixXd w = llt.matrixU() * snap.vectors;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU);
    const Eigen::VectorXd sv = svd.singularValues();
    int rank = 0;
    for (int k = 0; k < sv.size(); ++k) rank += sv[k] > kSnapshotRankTol * sv[0] ? 1 : 0;
    if (rank == 0) throw NumericalError("snapshot space of neighborhood " + std::to_string(nb.coarse_node_index) + " is empty");
    const Eigen::MatrixXd q = llt.matrixU().solve(svd.matrixU().leftCols(rank));
    Eigen::MatrixXd b = q.transpose() * p.A * q;
    b = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw NumericalError("offline eigensolve failed");

    int m = m_off;
    if (m > rank) {
        if (warnings)
            warnings->push_back("neighborhood " + std::to_string(nb.coarse_node_index) + ": offline dimension " +
                                std::to_string(m_off) + " reduced to snapshot rank " + std::to_string(rank));
        m = rank;
    }
    LocalOffline off;
    off.snapshot_rank = rank;
    off.eigenvalues = es.eigenvalues().head(m);
    off.basis = q * es.eigenvectors().leftCols(m);
    for (int k = 0; k < m; ++k) fix_sign(off.basis.col(k));
    off.orthogonality =
        (off.basis.transpose() * p.S * off.basis - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    return off;
}

struct OfflineSettings {
    int samples = 10;           // J
    int per_sample = 10;        // L_i
    int dimension = 32;         // M_off
    std::uint64_t seed = 20140917;
    std::uint64_t stream = 7;   // substream reserved for snapshot parameters
};

struct OfflineSpace {
    OfflineSettings settings;
    Eigen::MatrixXd parameters;  // N x J snapshot parameter samples
    std::vector<LocalOffline> local;
    std::vector<std::string> warnings;

    int min_dimension() const {
        int m = local.empty() ? 0 : local.front().size();
        for (const auto& l : local) m = std::min(m, l.size());
        return m;
    }
};

inline OfflineSpace build_offline(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                  const KLModel& kl, const OfflineSettings& settings, int workers = 1) {
    if (settings.samples < 1) throw ConfigError("snapshot sample count J must be >= 1");
    OfflineSpace out;
    out.settings = settings;
    out.parameters.resize(kl.size(), settings.samples);
    std::vector<ParameterFields> fields(settings.samples);
    Eigen::VectorXd kbar = Eigen::VectorXd::Zero(g.num_fine_nodes());
    for (int j = 0; j < settings.samples; ++j)
        out.parameters.col(j) = prior_draw(settings.seed, settings.stream, static_cast<std::uint64_t>(j), kl.size());
    parallel_for(settings.samples, workers, [&](int j) {
        fields[j] = parameter_fields(g, nbs, sample_permeability(kl, out.parameters.col(j)));
    });
    for (int j = 0; j < settings.samples; ++j) kbar += fields[j].perm;
    kbar /= settings.samples;
    const ParameterFields averaged = parameter_fields(g, nbs, kbar);

    out.local.resize(nbs.size());
    std::vector<std::vector<std::string>> warn(nbs.size());
    parallel_for(static_cast<int>(nbs.size()), workers, [&](int i) {
        const SnapshotSpace snap = build_snapshot_space(g, nbs[i], fields, settings.per_sample);
        out.local[i] = build_offline_space(g, nbs[i], snap, averaged, settings.dimension, &warn[i]);
    });
    for (auto& w : warn) out.warnings.insert(out.warnings.end(), w.begin(), w.end());
    return out;
}

/// Global multiscale basis for one parameter. Column i * per_neighborhood + k
/// is chi_i times the k-th online eigenfunction of neighborhood i.
struct OnlineSpace {
    int per_neighborhood = 0;
    int num_neighborhoods = 0;
    SparseMatrix R;                             // fine nodes x N_c
    std::vector<Eigen::VectorXd> eigenvalues;   // per neighborhood, ascending

    int size() const { return static_cast<int>(R.cols()); }

    /// Global columns forming the nested subspace with m functions per neighborhood.
    std::vector<int> columns(int m) const {
        if (m < 1 || m > per_neighborhood)
            throw ConfigError("online dimension " + std::to_string(m) + " must lie in [1, " +
                              std::to_string(per_neighborhood) + "]");
        std::vector<int> c;
        c.reserve(static_cast<std::size_t>(m) * num_neighborhoods);
        for (int i = 0; i < num_neighborhoods; ++i)
            for (int k = 0; k < m; ++k) c.push_back(i * per_neighborhood + k);
        return c;
    }
};

inline OnlineSpace build_online_space(const StructuredGridPair& g, const std::vector<Neighborhood>& nbs,
                                      const OfflineSpace& offline, const ParameterFields& fields, int m_on) {
    if (m_on < 1 || m_on > offline.min_dimension())
        throw ConfigError("online dimension " + std::to_string(m_on) + " must lie in [1, " +
                          std::to_string(offline.min_dimension()) + "]");
    OnlineSpace on;
    on.per_neighborhood = m_on;
    on.num_neighborhoods = static_cast<int>(nbs.size());
    std::vector<Triplet> trip;
    for (std::size_t i = 0; i < nbs.size(); ++i) {
        const Neighborhood& nb = nbs[i];
        const Eigen::MatrixXd& roff = offline.local[i].basis;
        const SparsePencil p = local_pencil_sparse(g, nb, fields.perm, fields.ktilde);
        Eigen::MatrixXd a = roff.transpose() * (p.A * roff);
        Eigen::MatrixXd s = roff.transpose() * (p.S * roff);
        a = 0.5 * (a + a.transpose());
        s = 0.5 * (s + s.transpose());
        EigArtifacts e;
        try {
            e = generalized_symmetric_eig(a, s, m_on);
        } catch (const NumericalError& ex) {
            throw NumericalError("online eigenproblem (neighborhood " + std::to_string(nb.coarse_node_index) +
                                 "): " + ex.what());
        }
        on.eigenvalues.push_back(e.eigenvalues);
        Eigen::MatrixXd psi = roff * e.eigenvectors;
        for (int k = 0; k < m_on; ++k) {
            fix_sign(psi.col(k));
            const int col = static_cast<int>(i) * m_on + k;
            for (int r = 0; r < nb.size(); ++r) {
                const double v = fields.pu.chi[i][r] * psi(r, k);
                if (v != 0.0) trip.emplace_back(nb.fine_nodes[r], col, v);
            }
        }
    }
    on.R.resize(g.num_fine_nodes(), static_cast<Eigen::Index>(nbs.size()) * m_on);
    on.R.setFromTriplets(trip.begin(), trip.end());
    return on;
}

/// Coarse Galerkin system for u = lift + R0 c, where R0 is the basis with the
/// Dirichlet rows removed.
struct CoarseSystem {
    SparseMatrix R0;
    Eigen::MatrixXd K;     // R0^T A R0
    Eigen::VectorXd rhs;   // R0^T (F - A lift)
    Eigen::VectorXd lift;
};

inline CoarseSystem coarse_system(const SparseMatrix& basis, const FineSystem& fs) {
    if (basis.rows() != fs.size()) throw ConfigError("basis row count does not match the fine system");
    std::vector<char> fixed(fs.size(), 0);
    for (int p : fs.dirichlet_nodes) fixed[p] = 1;
    CoarseSystem cs;
    cs.R0 = basis;
    cs.R0.prune([&](const Eigen::Index& row, const Eigen::Index&, const double&) { return !fixed[row]; });
    const SparseMatrix ar = fs.stiffness * cs.R0;
    const SparseMatrix k = SparseMatrix(cs.R0.transpose()) * ar;
    cs.K = Eigen::MatrixXd(k);
    cs.K = 0.5 * (cs.K + cs.K.transpose());
    cs.lift = fs.lift;
    cs.rhs = cs.R0.transpose() * (fs.load - fs.stiffness * fs.lift);
    return cs;
}

struct CoarseSolution {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd pressure;  // on fine nodes, lift included
};

/// Solves the coarse problem restricted to the given columns (all when empty).
inline CoarseSolution solve_coarse(const CoarseSystem& cs, const std::vector<int>& cols = {}) {
    const int n = cols.empty() ? static_cast<int>(cs.K.cols()) : static_cast<int>(cols.size());
    Eigen::MatrixXd k(n, n);
    Eigen::VectorXd b(n);
    if (cols.empty()) {
        k = cs.K;
        b = cs.rhs;
    } else {
        for (int c = 0; c < n; ++c) {
            b[c] = cs.rhs[cols[c]];
            for (int r = 0; r < n; ++r) k(r, c) = cs.K(cols[r], cols[c]);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 0.0))
        throw NumericalError("coarse stiffness matrix is singular or indefinite (dimension " + std::to_string(n) + ")");
    CoarseSolution sol;
    sol.coefficients = llt.solve(b);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(cs.K.cols());
    if (cols.empty()) full = sol.coefficients;
    else
        for (int c = 0; c < n; ++c) full[cols[c]] = sol.coefficients[c];
    sol.pressure = cs.lift + cs.R0 * full;
    return sol;
}

inline CoarseSolution solve_coarse(const SparseMatrix& basis, const FineSystem& fs) {
    return solve_coarse(coarse_system(basis, fs));
}

inline CoarseSolution solve_coarse(const OnlineSpace& on, const FineSystem& fs, int m = -1) {
    const CoarseSystem cs = coarse_system(on.R, fs);
    return solve_coarse(cs, m < 0 ? std::vector<int>{} : on.columns(m));
}

/// Identity basis on the interior fine nodes, for checking the coarse
/// machinery against the fine solve.
inline SparseMatrix full_space_basis(const StructuredGridPair& g) {
    std::vector<Triplet> trip;
    int col = 0;
    for (int p = 0; p < g.num_fine_nodes(); ++p)
        if (!g.on_boundary(p)) trip.emplace_back(p, col++, 1.0);
    SparseMatrix id(g.num_fine_nodes(), col);
    id.setFromTriplets(trip.begin(), trip.end());
    return id;
}

struct QoiSpec {
    enum class Kind { Field, Points };
    Kind kind = Kind::Field;
    std::vector<Point> points;

    static QoiSpec field() { return {}; }
    static QoiSpec at_points(std::vector<Point> pts) { return {Kind::Points, std::move(pts)}; }
};

/// Bilinear interpolation operator from fine nodal values to the given points.
inline SparseMatrix point_interpolation(const StructuredGridPair& g, const std::vector<Point>& points) {
    std::vector<Triplet> trip;
    for (std::size_t q = 0; q < points.size(); ++q) {
        const double x = points[q][0], y = points[q][1];
        if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
            throw ConfigError("QoI point (" + std::to_string(x) + ", " + std::to_string(y) + ") lies outside the unit square");
        const int cx = std::min(static_cast<int>(std::floor(x * g.nx_fine())), g.nx_fine() - 1);
        const int cy = std::min(static_cast<int>(std::floor(y * g.ny_fine())), g.ny_fine() - 1);
        const double s = x * g.nx_fine() - cx, t = y * g.ny_fine() - cy;
        const auto ids = cell_nodes(g, cx, cy);
        const double w[4] = {(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t};
        for (int a = 0; a < 4; ++a)
            if (w[a] != 0.0) trip.emplace_back(static_cast<int>(q), ids[a], w[a]);
    }
    SparseMatrix m(static_cast<Eigen::Index>(points.size()), g.num_fine_nodes());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

struct ForwardSettings {
    std::vector<int> level_dims = {4, 8, 16};
    SourceSpec source;
    BoundarySpec boundary;
    QoiSpec qoi;
};

/// Parameter-to-QoI map at every level of the online hierarchy. Levels are
/// indexed from 0 and map to online dimensions level_dims[l]; one online
/// construction at the highest requested level serves all lower levels.
class ForwardModel {
public:
    ForwardModel(StructuredGridPair grid, KLModel kl, OfflineSpace offline, ForwardSettings settings)
        : grid_(std::move(grid)), nbs_(build_neighborhoods(grid_)), kl_(std::move(kl)),
          offline_(std::move(offline)), settings_(std::move(settings)) {
        if (offline_.local.size() != nbs_.size()) throw ConfigError("offline space does not match the grid");
        if (settings_.level_dims.empty()) throw ConfigError("at least one level is required");
        for (std::size_t l = 0; l < settings_.level_dims.size(); ++l) {
            if (l > 0 && settings_.level_dims[l] <= settings_.level_dims[l - 1])
                throw ConfigError("level online dimensions must be strictly increasing");
        }
        if (settings_.level_dims.front() < 1 || settings_.level_dims.back() > offline_.min_dimension())
            throw ConfigError("level dimensions must lie in [1, " + std::to_string(offline_.min_dimension()) + "]");
        if (settings_.qoi.kind == QoiSpec::Kind::Points) interp_ = point_interpolation(grid_, settings_.qoi.points);
    }

    const StructuredGridPair& grid() const { return grid_; }
    const std::vector<Neighborhood>& neighborhoods() const { return nbs_; }
    const KLModel& kl() const { return kl_; }
    const OfflineSpace& offline() const { return offline_; }
    const ForwardSettings& settings() const { return settings_; }
    int num_levels() const { return static_cast<int>(settings_.level_dims.size()); }
    int level_dim(int l) const { return settings_.level_dims.at(static_cast<std::size_t>(l)); }
    int num_parameters() const { return kl_.size(); }

    FineSystem fine_system(const Eigen::VectorXd& perm) const {
        return assemble_fine(grid_, perm, settings_.source, settings_.boundary);
    }

    /// Fine-grid pressures at levels 0..max_level.
    std::vector<Eigen::VectorXd> pressure_levels(const ParameterVector& mu, int max_level) const {
        check_level(max_level);
        ParameterFields f = parameter_fields(grid_, nbs_, sample_permeability(kl_, mu));
        const FineSystem fs = fine_system(f.perm);
        const OnlineSpace on = build_online_space(grid_, nbs_, offline_, f, level_dim(max_level));
        const CoarseSystem cs = coarse_system(on.R, fs);
        std::vector<Eigen::VectorXd> out;
        for (int l = 0; l <= max_level; ++l) out.push_back(solve_coarse(cs, on.columns(level_dim(l))).pressure);
        return out;
    }

    /// QoI at levels 0..max_level.
    std::vector<Eigen::VectorXd> evaluate_levels(const ParameterVector& mu, int max_level) const {
        auto p = pressure_levels(mu, max_level);
        for (auto& v : p) v = qoi(v);
        return p;
    }

    Eigen::VectorXd evaluate(const ParameterVector& mu, int level) const { return evaluate_levels(mu, level).back(); }

    Eigen::VectorXd fine_pressure(const ParameterVector& mu) const {
        return solve_fine(fine_system(sample_permeability(kl_, mu)));
    }

    Eigen::VectorXd evaluate_fine(const ParameterVector& mu) const { return qoi(fine_pressure(mu)); }

    Eigen::VectorXd qoi(const Eigen::VectorXd& pressure) const {
        if (settings_.qoi.kind == QoiSpec::Kind::Field) return pressure;
        return interp_ * pressure;
    }

private:
    void check_level(int l) const {
        if (l < 0 || l >= num_levels())
            throw ConfigError("level " + std::to_string(l) + " outside [0, " + std::to_string(num_levels() - 1) + "]");
    }

    StructuredGridPair grid_;
    std::vector<Neighborhood> nbs_;
    KLModel kl_;
    OfflineSpace offline_;
    ForwardSettings settings_;
    SparseMatrix interp_;
};

} // namespace mlgms
