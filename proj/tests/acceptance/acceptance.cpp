// Acceptance checks. Usage: acceptance <criterion 1..10 | all>
// Prints one PASS/FAIL line per criterion; exit status 1 when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "mlgms/harness/experiments.hpp"

using namespace mlgms;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

const fs::path kConfigDir = MLGMS_CONFIG_DIR;
const fs::path kWorkDir = MLGMS_WORK_DIR;

std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

void info(const std::string& m) { std::cout << "info  " << m << std::endl; }

// Configs from configs/, with outputs and the shared offline cache under the work directory.
ExperimentConfig study_config(const std::string& name) {
    auto c = load_config(kConfigDir / (name + ".cfg"));
    c.out = (kWorkDir / name).string();
    c.cache = (kWorkDir / ("offline-" + detail::hex64(offline_key(c)) + ".bin")).string();
    return c;
}

LogFn progress() {
    return [](const std::string& m) { info(m); };
}

// 1. MLMC against cost-matched MC on the mean pressure, both covariances.
Outcome table1() {
    const std::map<std::string, double> min_ratio{{"table1_iso", 1.2}, {"table1_aniso", 1.1}};
    constexpr double max_e_mlmc = 0.10;
    bool ok = true;
    std::string d;
    for (const auto& [name, bound] : min_ratio) {
        const auto cfg = study_config(name);
        RunManifest m;
        const auto s = run_table1(cfg, cfg.out, m, progress());
        m.write(cfg.out);
        std::string var;
        for (double v : s.level_variance) var += " " + num(v);
        info(name + " level correction variances (replicate 0):" + var);
        const bool pass = s.replicates.size() == 10 && s.m_hat == 24 && s.reference_samples == 5000 &&
                          s.ratio_mean >= bound && s.e_mlmc_mean <= max_e_mlmc;
        ok = ok && pass;
        d += name + " ratio " + num(s.ratio_mean) + "+-" + num(s.ratio_stderr) + " (>= " + num(bound) + ") e_mlmc " +
             num(s.e_mlmc_mean) + " (<= 0.1) e_mc " + num(s.e_mc_mean) + "; ";
    }
    return {ok, d};
}

// 2. Identical forwards at every level collapse the telescoping sum to plain MC.
Outcome telescoping() {
    const auto g = build_grids(10, 10, 2, 2);
    const auto kl = truncated_kle(g, {2.0, 0.1, 0.1}, 5);
    auto level0 = [&](const ParameterVector& e) {
        return solve_fine(assemble_fine(g, sample_permeability(kl, e), SourceSpec::constant(1.0), BoundarySpec::linear_x1()));
    };
    auto same = [&](const ParameterVector& e, int top) { return std::vector<Eigen::VectorXd>(static_cast<std::size_t>(top + 1), level0(e)); };
    const LevelPlan plan{{4, 8, 16}, {128, 32, 8}};
    const SampleSource src{31, 0, 5};
    const auto ml = mlmc_estimate(plan, same, src);
    const auto mc = mc_estimate(level0, 128, src);
    const double rel = (ml.estimate - mc.mean()).norm() / mc.mean().norm();
    return {rel <= 1e-14, "relative difference " + num(rel) + " (<= 1e-14)"};
}

// 3. Partition of unity on the study grid.
Outcome partition() {
    const auto g = build_grids(50, 50, 5, 5);
    const auto nbs = build_neighborhoods(g);
    const auto kl = truncated_kle(g, {2.0, 0.1, 0.1}, 5);
    double worst = 0;
    for (std::uint64_t m = 0; m < 20; ++m) {
        const auto pu = build_partition_of_unity(g, nbs, sample_permeability(kl, prior_draw(41, 0, m, 5)));
        worst = std::max(worst, (partition_sum(g, nbs, pu).array() - 1.0).abs().maxCoeff());
    }
    return {worst <= 1e-12, "max |sum chi - 1| over 20 fields " + num(worst) + " (<= 1e-12)"};
}

// 4. KLE orthonormality, trace identity and the zero-variance case.
Outcome kle() {
    const auto g = build_grids(50, 50, 5, 5);
    const CovarianceSpec spec{2.0, 0.1, 0.1};
    const auto m = truncated_kle(g, spec, 5);
    const double orth = weighted_orthonormality_residual(m);
    const auto w = trapezoid_weights(g);
    const auto c = assemble_covariance(g, spec);
    const double trace = std::abs(kle_spectrum(g, spec).sum() - (w.array() * c.diagonal().array()).sum());
    const auto z = truncated_kle(g, {0.0, 0.1, 0.1}, 5);
    const auto k = sample_permeability(z, Eigen::VectorXd::Constant(5, 1.3));
    const bool unit = (k.array() == 1.0).all();
    return {orth <= 1e-10 && trace <= 1e-8 && unit, "orthonormality " + num(orth) + " (<= 1e-10), trace gap " + num(trace) +
                                                        " (<= 1e-8), sigma2=0 gives k==1: " + (unit ? "yes" : "no")};
}

// L2 error of the bilinear interpolant against an exact function, 3x3 Gauss per cell.
double l2_error(const StructuredGridPair& g, const Eigen::VectorXd& uh, const ScalarField& exact) {
    const double gp[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    double err = 0;
    for (int cy = 0; cy < g.ny_fine(); ++cy)
        for (int cx = 0; cx < g.nx_fine(); ++cx) {
            const auto ids = cell_nodes(g, cx, cy);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    const double s = gp[a], t = gp[b];
                    const double v = uh[ids[0]] * (1 - s) * (1 - t) + uh[ids[1]] * s * (1 - t) + uh[ids[2]] * s * t +
                                     uh[ids[3]] * (1 - s) * t;
                    const double e = v - exact({(cx + s) * g.hx(), (cy + t) * g.hy()});
                    err += gw[a] * gw[b] * g.hx() * g.hy() * e * e;
                }
        }
    return std::sqrt(err);
}

// 5. FEM: linear data reproduced, second-order L2 convergence.
Outcome fem() {
    const auto g = build_grids(50, 50, 5, 5);
    const auto u = solve_fine(assemble_fine(g, Eigen::VectorXd::Ones(g.num_fine_nodes()), SourceSpec::constant(0.0), BoundarySpec::linear_x1()));
    double lin = 0;
    for (int p = 0; p < g.num_fine_nodes(); ++p) lin = std::max(lin, std::abs(u[p] - g.fine_coordinates()[p][0]));
    const double pi = std::numbers::pi;
    const ScalarField exact = [pi](const Point& x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); };
    const SourceSpec src{"mms", [pi](const Point& x) { return 2 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]); }};
    double err[2];
    for (int k = 0; k < 2; ++k) {
        const auto gk = build_grids(16 << k, 16 << k, 1, 1);
        err[k] = l2_error(gk, solve_fine(assemble_fine(gk, Eigen::VectorXd::Ones(gk.num_fine_nodes()), src, BoundarySpec::homogeneous())), exact);
    }
    const double ratio = err[0] / err[1];
    return {lin <= 1e-12 && ratio >= 3.6 && ratio <= 4.4,
            "linear data max error " + num(lin) + " (<= 1e-12), L2 ratio h=1/16 vs 1/32 " + num(ratio) + " (in [3.6, 4.4])"};
}

// 6. Energy error nonincreasing in the online dimension; full space equals the fine solve.
Outcome monotone() {
    const auto cfg = study_config("table1_iso");
    RunManifest man;
    const auto p = prepare_problem(cfg, cfg.out, man, progress());
    constexpr double slack = 1e-12;
    int violations = 0;
    double worst_gap = -1e300;
    for (std::uint64_t m = 0; m < 20; ++m) {
        const auto f = parameter_fields(p.grid, p.nbs, sample_permeability(p.kl, prior_draw(61, 0, m, p.kl.size())));
        const auto fsys = assemble_fine(p.grid, f.perm, SourceSpec::constant(cfg.source), cfg.boundary_spec());
        const auto uf = solve_fine(fsys);
        const auto on = build_online_space(p.grid, p.nbs, p.offline, f, 16);
        const auto cs = coarse_system(on.R, fsys);
        double prev = 0;
        for (int dim : {4, 8, 16}) {
            const double e = energy_norm(fsys.stiffness, uf - solve_coarse(cs, on.columns(dim)).pressure);
            if (dim > 4) {
                worst_gap = std::max(worst_gap, e - prev);
                if (e > prev + slack) ++violations;
            }
            prev = e;
        }
    }
    const auto fsys = assemble_fine(p.grid, sample_permeability(p.kl, prior_draw(61, 1, 0, p.kl.size())), SourceSpec::constant(cfg.source),
                                    cfg.boundary_spec());
    const double full = (solve_coarse(full_space_basis(p.grid), fsys).pressure - solve_fine(fsys)).cwiseAbs().maxCoeff();
    return {violations == 0 && full <= 1e-10, std::to_string(violations) + " violations over 20 fields (largest increase " + num(worst_gap) +
                                                  ", slack 1e-12); full-space vs fine max diff " + num(full) + " (<= 1e-10)"};
}

// 7. Monte Carlo RMSE decays like M^(-1/2): pressure at the centre, one-mode field.
Outcome mc_rate() {
    const auto g = build_grids(16, 16, 1, 1);
    const auto kl = truncated_kle(g, {2.0, 0.1, 0.1}, 1);
    const int centre = g.fine_node(8, 8);
    auto qoi = [&](const ParameterVector& e) {
        const auto u = solve_fine(assemble_fine(g, sample_permeability(kl, e), SourceSpec::constant(1.0), BoundarySpec::linear_x1()));
        return Eigen::VectorXd::Constant(1, u[centre]);
    };
    const double ref = mc_estimate(qoi, 100000, {71, 0, 1}).mean()[0];
    const std::vector<int> Ms{16, 64, 256, 1024};
    constexpr int reps = 200;
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < Ms.size(); ++k) {
        double se = 0;
        for (int r = 0; r < reps; ++r) {
            const double d = mc_estimate(qoi, Ms[k], {71, 1 + 1000 * k + static_cast<std::uint64_t>(r), 1}).mean()[0] - ref;
            se += d * d;
        }
        lx.push_back(std::log(Ms[k]));
        ly.push_back(0.5 * std::log(se / reps));
        info("M " + std::to_string(Ms[k]) + " rmse " + num(std::exp(ly.back())));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 4, my = std::accumulate(ly.begin(), ly.end(), 0.0) / 4;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 4; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope >= -0.65 && slope <= -0.35, "log RMSE vs log M slope " + num(slope) + " (in [-0.65, -0.35]), " + std::to_string(reps) +
                                                  " replicates per M, reference from 1e5 samples"};
}

// 8. Sample allocation on the worked example.
Outcome allocation() {
    const auto m = allocate_samples({0.4, 0.2, 0.1}, 2, 1.0);
    const bool ok = m.size() == 3 && m[1] == 32 && m[2] == 8;
    return {ok, "M = (" + std::to_string(m[0]) + ", " + std::to_string(m[1]) + ", " + std::to_string(m[2]) + "), expected M_2 = 32, M_3 = 8"};
}

// 9. Acceptance rate per level nondecreasing and the funnel invariant, both configurations.
Outcome mlmcmc_structure() {
    bool ok = true;
    std::string d;
    for (const std::string name : {"mlmcmc_iso", "mlmcmc_aniso"}) {
        const auto cfg = study_config(name);
        RunManifest m;
        const auto s = run_mlmcmc_experiment(cfg, cfg.out, m, progress());
        m.write(cfg.out);
        const bool pass = s.P.back() == 1000 && s.rates_nondecreasing() && s.funnel();
        ok = ok && pass;
        d += name + " P=(";
        for (std::size_t i = 0; i < s.P.size(); ++i) d += (i ? "," : "") + std::to_string(s.P[i]);
        d += ") rates";
        for (double r : s.rates) d += " " + num(r);
        d += "; ";
    }
    return {ok, d + "rates must be nondecreasing and P nonincreasing"};
}

// One-parameter toy: F_l(eta) = exp(eta / 2) + c_l sin(2 eta), observed at eta = 0.8.
struct Toy {
    std::vector<double> c{0.3, 0.1, 0.0};
    double value(double e, int l) const { return std::exp(0.5 * e) + c[static_cast<std::size_t>(l)] * std::sin(2.0 * e); }
    std::vector<Eigen::VectorXd> operator()(const ParameterVector& e, int top) const {
        std::vector<Eigen::VectorXd> out;
        for (int l = 0; l <= top; ++l) out.push_back(Eigen::VectorXd::Constant(1, value(e[0], l)));
        return out;
    }
};

// Quadrature oracle: normalised level-l posterior on 101 points of [-4, 4].
std::vector<double> toy_oracle(const Toy& t, const PosteriorSpec& s, int l) {
    std::vector<double> p;
    double z = 0;
    for (int i = 0; i <= 100; ++i) {
        const double e = -4.0 + 0.08 * i;
        p.push_back(std::exp(log_posterior(s, l, Eigen::VectorXd::Constant(1, e), Eigen::VectorXd::Constant(1, t.value(e, l)))));
        z += p.back();
    }
    for (auto& v : p) v /= z;
    return p;
}

// 10. Sampler oracles.
Outcome sampler_oracles() {
    const Toy t;
    // Single-level Metropolis-Hastings against quadrature.
    PosteriorSpec one;
    one.observations = Eigen::VectorXd::Constant(1, t.value(0.8, 0));
    one.sigma = {0.2};
    const auto q = toy_oracle(t, one, 0);
    MhSettings mh;
    mh.proposal.delta = 0.5;
    mh.steps = 100000;
    mh.burn_in = 1000;
    mh.seed = 101;
    const auto chain = metropolis_hastings(
        [&](const ParameterVector& e) { return log_posterior(one, 0, e, Eigen::VectorXd::Constant(1, t.value(e[0], 0))); },
        Eigen::VectorXd::Zero(1), mh);
    std::vector<double> hist(101, 0.0);
    for (const auto& s : chain.states)
        if (const long i = std::lround((s[0] + 4.0) / 0.08); i >= 0 && i <= 100) hist[static_cast<std::size_t>(i)] += 1.0 / static_cast<double>(chain.states.size());
    double tv = 0;
    for (int i = 0; i <= 100; ++i) tv += 0.5 * std::abs(hist[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)]);

    // Three-level estimator against the finest-level quadrature mean.
    PosteriorSpec three;
    three.observations = Eigen::VectorXd::Constant(1, t.value(0.8, 2));
    three.sigma = sigma_schedule(0.2, 3);
    const auto q2 = toy_oracle(t, three, 2);
    double truth = 0;
    for (int i = 0; i <= 100; ++i) truth += q2[static_cast<std::size_t>(i)] * t.value(-4.0 + 0.08 * i, 2);
    MlmcmcSettings ms;
    ms.proposal.delta = 0.5;
    ms.final_accepted = 20000;
    ms.burn_in = 500;
    ms.seed = 103;
    ms.keep_records = false;
    const auto est = mlmcmc_estimate(mlmcmc_screen(three, t, Eigen::VectorXd::Zero(1), ms));
    const double z = std::abs(est.FL[0] - truth) / est.stderr_FL[0];

    // Detailed balance of the screened kernel on 101 enumerable states with an asymmetric proposal.
    FiniteHierarchy h;
    const int n = 101;
    h.q0 = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) h.q0(a, b) = std::exp(-0.5 * std::pow((a - b) / 4.0, 2));
        h.q0.row(a) /= h.q0.row(a).sum();
    }
    for (int l = 0; l < 3; ++l) {
        Eigen::VectorXd p(n);
        for (int a = 0; a < n; ++a) {
            const double e = -4.0 + 0.08 * a;
            const double r = t.value(e, l) - three.observations[0];
            p[a] = std::exp(-0.5 * e * e - r * r / (2 * three.sigma[static_cast<std::size_t>(l)] * three.sigma[static_cast<std::size_t>(l)]));
        }
        h.pi.push_back(p);
    }
    double db = 0;
    for (int l = 0; l < 3; ++l) db = std::max(db, detailed_balance_check(h, l));

    // Log-space screened ratio against the direct density-ratio formula, and against the
    // general form with the previous-level kernel as proposal.
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> u(1e-3, 1.0), lu(-5.0, 5.0);
    double gap = 0;
    for (int k = 0; k < 10000; ++k) {
        const double lo_c = u(rng), lo_p = u(rng), hi_c = u(rng), hi_p = u(rng);
        const double direct = std::min(1.0, (lo_c * hi_p) / (lo_p * hi_c));
        const double logs = std::exp(screened_log_acceptance(std::log(lo_c), std::log(lo_p), std::log(hi_c), std::log(hi_p)));
        gap = std::max(gap, std::abs(direct - logs));
        const double qf = lu(rng), qb = lu(rng), a = lu(rng), b = lu(rng), c = lu(rng), d = lu(rng);
        gap = std::max(gap, std::abs(std::exp(screened_log_acceptance_full(qf, qb, a, b, c, d)) - std::exp(screened_log_acceptance(a, b, c, d))));
    }
    const bool ok = tv <= 0.05 && z <= 3.0 && db <= 1e-10 && gap <= 1e-14;
    return {ok, "MH TV " + num(tv) + " (<= 0.05, 1e5 steps); F_L " + num(est.FL[0]) + " vs oracle " + num(truth) + " = " + num(z) +
                    " SE (<= 3); detailed balance " + num(db) + " (<= 1e-10); acceptance-ratio gap on 1e4 quadruples " + num(gap) +
                    " (<= 1e-14)"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"table1 MLMC vs cost-matched MC", table1},
    {"telescoping collapse", telescoping},
    {"partition of unity", partition},
    {"KLE identities", kle},
    {"FEM exactness and rate", fem},
    {"GMsFEM monotonicity", monotone},
    {"MC rate", mc_rate},
    {"sample allocation", allocation},
    {"MLMCMC acceptance structure", mlmcmc_structure},
    {"sampler oracles", sampler_oracles},
};

} // namespace

int main(int argc, char** argv) {
    const std::string which = argc > 1 ? argv[1] : "all";
    fs::create_directories(kWorkDir);
    bool all_ok = true;
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
        if (which != "all" && which != std::to_string(i + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = kCriteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " (" << kCriteria[i].first << "): " << o.detail << " ["
                  << num(secs) << " s]" << std::endl;
        all_ok = all_ok && o.pass;
    }
    return all_ok ? 0 : 1;
}
