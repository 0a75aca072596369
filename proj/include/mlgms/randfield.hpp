#pragma once

// Gaussian log-permeability fields: covariance discretization, truncated
// Karhunen-Loeve expansion and the coefficient-to-permeability map.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlgms/errors.hpp"
#include "mlgms/grid.hpp"

namespace mlgms {

using ParameterVector = Eigen::VectorXd;

struct CovarianceSpec {
    double sigma2 = 2.0;
    double l1 = 0.1;
    double l2 = 0.1;

    void validate() const {
        if (!(sigma2 >= 0.0)) throw ConfigError("covariance variance must be >= 0");
        if (!(l1 > 0.0) || !(l2 > 0.0)) throw ConfigError("correlation lengths must be > 0");
    }

    double operator()(const Point& x, const Point& y) const {
        const double dx = x[0] - y[0], dy = x[1] - y[1];
        return sigma2 * std::exp(-dx * dx / (2 * l1 * l1) - dy * dy / (2 * l2 * l2));
    }
};

/// Dense covariance matrix over fine nodes, C[p][q] = R(x_p, x_q).
inline Eigen::MatrixXd assemble_covariance(const StructuredGridPair& g, const CovarianceSpec& spec) {
    spec.validate();
    const auto& xy = g.fine_coordinates();
    const int n = g.num_fine_nodes();
    Eigen::MatrixXd c(n, n);
    for (int q = 0; q < n; ++q) {
        c(q, q) = spec.sigma2;
        for (int p = q + 1; p < n; ++p) c(p, q) = c(q, p) = spec(xy[p], xy[q]);
    }
    return c;
}

namespace detail {

inline Eigen::VectorXd trapezoid_1d(int cells) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(cells + 1, 1.0 / cells);
    w[0] *= 0.5;
    w[cells] *= 0.5;
    return w;
}

struct Spectrum1d {
    Eigen::VectorXd values;     // descending
    Eigen::MatrixXd functions;  // columns, W-orthonormal nodal values
};

// Weighted eigenpairs of the 1D unit-variance Gaussian kernel.
inline Spectrum1d gaussian_spectrum_1d(int cells, double corr_len) {
    const int n = cells + 1;
    const Eigen::VectorXd w = trapezoid_1d(cells);
    const Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = static_cast<double>(i - j) / cells;
            b(i, j) = sw[i] * std::exp(-d * d / (2 * corr_len * corr_len)) * sw[j];
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw NumericalError("1D covariance eigensolve failed");
    Spectrum1d s;
    s.values = es.eigenvalues().reverse();
    s.functions = es.eigenvectors().rowwise().reverse();
    for (int k = 0; k < n; ++k) {
        auto v = s.functions.col(k);
        for (int i = 0; i < n; ++i) {
            if (std::abs(v[i]) > 1e-14) {
                if (v[i] < 0) v *= -1.0;
                break;
            }
        }
        v.array() /= sw.array();
    }
    return s;
}

} // namespace detail

/// Per-node trapezoidal quadrature weights on the unit square (tensor product).
inline Eigen::VectorXd trapezoid_weights(const StructuredGridPair& g) {
    const Eigen::VectorXd wx = detail::trapezoid_1d(g.nx_fine());
    const Eigen::VectorXd wy = detail::trapezoid_1d(g.ny_fine());
    Eigen::VectorXd w(g.num_fine_nodes());
    for (int iy = 0; iy <= g.ny_fine(); ++iy)
        for (int ix = 0; ix <= g.nx_fine(); ++ix) w[g.fine_node(ix, iy)] = wx[ix] * wy[iy];
    return w;
}

struct KLModel {
    CovarianceSpec spec;
    Eigen::VectorXd eigenvalues;      // descending, length N
    Eigen::MatrixXd eigenfunctions;   // fine nodes x N
    Eigen::VectorXd weights;          // quadrature weights per fine node
    double full_trace = 0.0;          // sum_p w_p R(x_p, x_p)
    std::vector<std::pair<int, int>> mode_indices;  // (x-mode, y-mode) of each product mode

    int size() const { return static_cast<int>(eigenvalues.size()); }
};

/// Full spectrum of the weight-symmetrized covariance W^{1/2} C W^{1/2}.
///
/// The Gaussian kernel and the trapezoidal weights are both tensor products,
/// so the operator is sigma2 * (Bx kron By) and its eigenpairs are products of
/// 1D eigenpairs. This is exact, not an approximation, and avoids a dense
/// eigensolve of size (nx+1)(ny+1).
inline KLModel truncated_kle(const StructuredGridPair& g, const CovarianceSpec& spec, int n_terms) {
    spec.validate();
    const int n_nodes = g.num_fine_nodes();
    if (n_terms < 1 || n_terms > n_nodes) {
        throw ConfigError("KLE order " + std::to_string(n_terms) + " must lie in [1, " +
                          std::to_string(n_nodes) + "]");
    }
    const auto sx = detail::gaussian_spectrum_1d(g.nx_fine(), spec.l1);
    const auto sy = detail::gaussian_spectrum_1d(g.ny_fine(), spec.l2);

    struct Mode {
        double value;
        int i, j;
    };
    std::vector<Mode> modes;
    modes.reserve(n_nodes);
    for (int i = 0; i < sx.values.size(); ++i)
        for (int j = 0; j < sy.values.size(); ++j) modes.push_back({spec.sigma2 * sx.values[i] * sy.values[j], i, j});
    std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.i + a.j != b.i + b.j) return a.i + a.j < b.i + b.j;
        return a.i < b.i;
    });
    const double top = modes.front().value;

    KLModel m;
    m.spec = spec;
    m.weights = trapezoid_weights(g);
    m.full_trace = spec.sigma2 * m.weights.sum();
    m.eigenvalues.resize(n_terms);
    m.eigenfunctions.resize(n_nodes, n_terms);
    for (int k = 0; k < n_terms; ++k) {
        double lam = modes[k].value;
        if (lam < 0.0 && std::abs(lam) < 1e-12 * top) lam = 0.0;
        m.eigenvalues[k] = lam;
        m.mode_indices.emplace_back(modes[k].i, modes[k].j);
        for (int iy = 0; iy <= g.ny_fine(); ++iy)
            for (int ix = 0; ix <= g.nx_fine(); ++ix)
                m.eigenfunctions(g.fine_node(ix, iy), k) =
                    sx.functions(ix, modes[k].i) * sy.functions(iy, modes[k].j);
    }
    return m;
}

/// All eigenvalues of the discretized covariance operator, descending.
inline Eigen::VectorXd kle_spectrum(const StructuredGridPair& g, const CovarianceSpec& spec) {
    spec.validate();
    const auto sx = detail::gaussian_spectrum_1d(g.nx_fine(), spec.l1);
    const auto sy = detail::gaussian_spectrum_1d(g.ny_fine(), spec.l2);
    std::vector<double> v;
    v.reserve(g.num_fine_nodes());
    for (int i = 0; i < sx.values.size(); ++i)
        for (int j = 0; j < sy.values.size(); ++j) v.push_back(spec.sigma2 * sx.values[i] * sy.values[j]);
    std::sort(v.begin(), v.end(), std::greater<>());
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Fraction of the total variance captured by the first `n_terms` modes
/// (all stored modes when n_terms < 0).
inline double energy_ratio(const KLModel& model, double full_trace, int n_terms = -1) {
    if (!(full_trace > 0.0)) throw DomainError("energy ratio needs a positive full trace");
    const int n = n_terms < 0 ? model.size() : std::min(n_terms, model.size());
    return model.eigenvalues.head(n).sum() / full_trace;
}

/// max |<Phi_i, Phi_j>_w - delta_ij|
inline double weighted_orthonormality_residual(const KLModel& model) {
    const Eigen::MatrixXd gram =
        model.eigenfunctions.transpose() * model.weights.asDiagonal() * model.eigenfunctions;
    return (gram - Eigen::MatrixXd::Identity(model.size(), model.size())).cwiseAbs().maxCoeff();
}

inline Eigen::VectorXd sample_log_permeability(const KLModel& model, const ParameterVector& eta) {
    if (eta.size() != model.size()) {
        throw ConfigError("parameter vector has length " + std::to_string(eta.size()) + ", KLE order is " +
                          std::to_string(model.size()));
    }
    return model.eigenfunctions * (model.eigenvalues.cwiseSqrt().cwiseProduct(eta));
}

inline Eigen::VectorXd sample_permeability(const KLModel& model, const ParameterVector& eta) {
    return sample_log_permeability(model, eta).array().exp().matrix();
}

} // namespace mlgms
