#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlgms/gmsfem.hpp"
#include "mlgms/samplers.hpp"

using namespace mlgms;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

// One-parameter toy hierarchy: F_l(eta) = exp(eta / 2) + c_l sin(2 eta).
struct ToyForward {
    std::vector<double> c{0.3, 0.1, 0.0};
    double value(double eta, int l) const { return std::exp(0.5 * eta) + c[static_cast<std::size_t>(l)] * std::sin(2.0 * eta); }
    std::vector<Eigen::VectorXd> operator()(const ParameterVector& eta, int top) const {
        std::vector<Eigen::VectorXd> out;
        for (int l = 0; l <= top; ++l) out.push_back(scalar(value(eta[0], l)));
        return out;
    }
};

PosteriorSpec toy_spec(const ToyForward& f, int levels) {
    PosteriorSpec s;
    s.observations = scalar(f.value(0.8, levels - 1));
    s.sigma = sigma_schedule(0.2, levels);
    return s;
}

// Normalised posterior of level l on 101 points of [-4, 4].
struct Quadrature {
    std::vector<double> x, p;
};

Quadrature oracle(const ToyForward& f, const PosteriorSpec& s, int l) {
    Quadrature q;
    double z = 0;
    for (int i = 0; i <= 100; ++i) {
        const double e = -4.0 + 0.08 * i;
        const double lp = log_posterior(s, l, scalar(e), scalar(f.value(e, l)));
        q.x.push_back(e);
        q.p.push_back(std::exp(lp));
        z += q.p.back();
    }
    for (auto& v : q.p) v /= z;
    return q;
}

double oracle_mean(const ToyForward& f, const Quadrature& q, int l) {
    double m = 0;
    for (std::size_t i = 0; i < q.x.size(); ++i) m += q.p[i] * f.value(q.x[i], l);
    return m;
}

FiniteHierarchy random_walk_hierarchy(int n, int levels, std::uint64_t seed) {
    FiniteHierarchy h;
    h.q0 = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        // Reflecting nearest-neighbour walk: symmetric.
        h.q0(a, a > 0 ? a - 1 : a) += 0.5;
        h.q0(a, a < n - 1 ? a + 1 : a) += 0.5;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int l = 0; l < levels; ++l) {
        Eigen::VectorXd p(n);
        for (int a = 0; a < n; ++a) p[a] = u(rng);
        h.pi.push_back(p);
    }
    return h;
}

} // namespace

TEST(SigmaSchedule, Kinds) {
    const auto g = sigma_schedule(0.1, 3, SigmaSchedule::Geometric);
    EXPECT_DOUBLE_EQ(g[2], 0.1);
    EXPECT_NEAR(g[1], 0.1 * std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(g[0], 0.2, 1e-15);
    // Precision increments 1/2, 1/4, 1/8 of the total, normalised to 1/sigma_f^2.
    const auto h = sigma_schedule(0.1, 3);
    EXPECT_DOUBLE_EQ(h[2], 0.1);
    EXPECT_NEAR(h[1], 0.1 * std::sqrt(0.875 / 0.75), 1e-15);
    EXPECT_NEAR(h[0], 0.1 * std::sqrt(0.875 / 0.5), 1e-15);
    const double d1 = 1 / (h[1] * h[1]) - 1 / (h[0] * h[0]), d2 = 1 / (h[2] * h[2]) - 1 / (h[1] * h[1]);
    EXPECT_NEAR(d2 / d1, 0.5, 1e-12);
    EXPECT_EQ(sigma_schedule(0.1, 3, SigmaSchedule::Constant), (std::vector<double>{0.1, 0.1, 0.1}));
    EXPECT_EQ(sigma_schedule(0.1, 1), (std::vector<double>{0.1}));
    EXPECT_EQ(parse_sigma_schedule("halving_precision"), SigmaSchedule::HalvingPrecision);
    EXPECT_THROW(parse_sigma_schedule("x"), ConfigError);
    EXPECT_THROW(sigma_schedule(0.0, 3), ConfigError);
    Eigen::VectorXd obs = Eigen::VectorXd::Constant(9, 2.0);
    EXPECT_NEAR(default_sigma_f(obs), 0.05 * 6.0 / 3.0, 1e-15);
    EXPECT_EQ(default_measurement_points().size(), 9u);
}

TEST(PosteriorSpecTest, Validation) {
    PosteriorSpec s;
    s.observations = Eigen::VectorXd::Ones(2);
    s.sigma = {0.1, 0.2};
    EXPECT_THROW(s.validate(), ConfigError);
    s.sigma = {0.2, 0.1};
    s.points = {{0.5, 0.5}, {1.0, 0.5}};
    EXPECT_THROW(s.validate(), ConfigError);
    s.points = {{0.5, 0.5}, {0.25, 0.5}};
    EXPECT_NO_THROW(s.validate());
}

TEST(LogPosterior, PriorModeAndSigmaScaling) {
    PosteriorSpec s;
    s.observations = scalar(1.0);
    s.sigma = {0.5};
    auto fwd_exact = [](const ParameterVector&, int) { return scalar(1.0); };
    const double at0 = log_posterior(0, Eigen::VectorXd::Zero(3), s, fwd_exact);
    EXPECT_DOUBLE_EQ(at0, 0.0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd e(3);
        for (int i = 0; i < 3; ++i) e[i] = n(rng);
        EXPECT_LT(log_posterior(0, e, s, fwd_exact), at0);
    }
    auto fwd = [](const ParameterVector&, int) { return scalar(1.3); };
    const double m1 = log_likelihood(s, 0, fwd(Eigen::VectorXd(), 0));
    s.sigma = {1.0};
    const double m2 = log_likelihood(s, 0, fwd(Eigen::VectorXd(), 0));
    EXPECT_NEAR(m2, m1 / 4.0, 1e-15);
}

TEST(LogPosterior, DensityRatioOnPdeToy) {
    const auto g = build_grids(10, 10, 2, 2);
    const auto kl = truncated_kle(g, {2.0, 0.2, 0.2}, 1);
    const auto interp = point_interpolation(g, {{0.5, 0.5}, {0.3, 0.7}});
    auto forward = [&](const ParameterVector& eta, int) {
        const Eigen::VectorXd p = solve_fine(assemble_fine(g, sample_permeability(kl, eta), SourceSpec::constant(1.0),
                                                           BoundarySpec::linear_x1()));
        return Eigen::VectorXd(interp * p);
    };
    PosteriorSpec s;
    s.observations = forward(scalar(0.4), 0);
    s.sigma = {0.01};
    const ParameterVector a = scalar(-0.3), b = scalar(0.9);
    const double ratio = std::exp(log_posterior(0, a, s, forward) - log_posterior(0, b, s, forward));
    auto density = [&](const ParameterVector& e) {
        const Eigen::VectorXd r = s.observations - forward(e, 0);
        return std::exp(-r.dot(r) / (2 * 0.01 * 0.01)) * std::exp(-0.5 * e[0] * e[0]);
    };
    EXPECT_NEAR(ratio, density(a) / density(b), 1e-12 * ratio);
}

TEST(Acceptance, IdentityAndLogSpace) {
    EXPECT_DOUBLE_EQ(mh_log_acceptance(-3.0, -3.0), 0.0);
    EXPECT_DOUBLE_EQ(mh_log_acceptance(-3.0, -1.0), 0.0);
    EXPECT_NEAR(mh_log_acceptance(-1.0, -3.0), -2.0, 1e-15);
    // Misfits of order 1e6 stay finite.
    const double la = mh_log_acceptance(-1e6, -2e6);
    EXPECT_TRUE(std::isfinite(la));
    EXPECT_EQ(std::exp(la), 0.0);
}

TEST(Acceptance, ScreenedExample) {
    // pi_l(k^m) = 0.5, pi_l(k) = 1.0, pi_{l+1}(k^m) = 0.6, pi_{l+1}(k) = 0.9.
    const double r = std::exp(screened_log_acceptance(std::log(0.5), std::log(1.0), std::log(0.6), std::log(0.9)));
    EXPECT_NEAR(r, 0.75, 1e-15);
    // Equal level densities give acceptance one.
    EXPECT_EQ(screened_log_acceptance(-1.0, -2.0, -1.0, -2.0), 0.0);
}

TEST(Acceptance, ScreenedEqualsComposedKernelBothBranches) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    int branch_a = 0, branch_b = 0;
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
        const double qf = u(rng), qb = u(rng), lc = u(rng), lp = u(rng), hc = u(rng), hp = u(rng);
        (qb + lp > qf + lc ? branch_a : branch_b)++;
        const double full = screened_log_acceptance_full(qf, qb, lc, lp, hc, hp);
        const double simple = screened_log_acceptance(lc, lp, hc, hp);
        worst = std::max(worst, std::abs(std::exp(full) - std::exp(simple)));
    }
    EXPECT_GT(branch_a, 1000);
    EXPECT_GT(branch_b, 1000);
    EXPECT_LE(worst, 1e-14);
}

TEST(MetropolisHastings, PriorOnlyAcceptsOften) {
    MhSettings s;
    s.steps = 10000;
    s.seed = 3;
    const auto c = metropolis_hastings([](const ParameterVector& e) { return log_prior(e); }, Eigen::VectorXd::Zero(5), s);
    EXPECT_EQ(c.steps, 10000);
    EXPECT_GT(c.acceptance_rate(), 0.5);
    EXPECT_EQ(c.states.size(), 10000u);
}

TEST(MetropolisHastings, DeterministicAndAcceptTarget) {
    MhSettings s;
    s.target_accepted = 50;
    s.burn_in = 10;
    s.seed = 8;
    auto t = [](const ParameterVector& e) { return log_prior(e); };
    const auto a = metropolis_hastings(t, Eigen::VectorXd::Zero(2), s);
    const auto b = metropolis_hastings(t, Eigen::VectorXd::Zero(2), s);
    EXPECT_EQ(a.accepted, 50);
    EXPECT_EQ(a.states.size(), b.states.size());
    EXPECT_EQ(a.states.back(), b.states.back());
}

TEST(MetropolisHastings, MatchesQuadratureLawOnToy) {
    const ToyForward f;
    const auto spec = toy_spec(f, 1);
    const auto q = oracle(f, spec, 0);
    MhSettings s;
    s.proposal.delta = 0.5;
    s.steps = 100000;
    s.burn_in = 1000;
    s.seed = 11;
    const auto c = metropolis_hastings(
        [&](const ParameterVector& e) { return log_posterior(spec, 0, e, scalar(f.value(e[0], 0))); }, scalar(0.0), s);
    std::vector<double> hist(101, 0.0);
    for (const auto& e : c.states) {
        const long i = std::lround((e[0] + 4.0) / 0.08);
        if (i >= 0 && i <= 100) hist[static_cast<std::size_t>(i)] += 1.0;
    }
    double tv = 0;
    for (int i = 0; i <= 100; ++i) tv += std::abs(hist[static_cast<std::size_t>(i)] / c.states.size() - q.p[static_cast<std::size_t>(i)]);
    EXPECT_LE(0.5 * tv, 0.05);
}

TEST(DetailedBalance, FiveStateSymmetric) {
    const auto h = random_walk_hierarchy(5, 1, 3);
    EXPECT_LE(detailed_balance_check(h, 0), 1e-12);
}

TEST(DetailedBalance, UniformTargetGivesSymmetricKernel) {
    auto h = random_walk_hierarchy(6, 1, 4);
    h.pi[0] = Eigen::VectorXd::Ones(6);
    const auto K = screened_kernel(h, 0);
    EXPECT_EQ((K - K.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(detailed_balance_check(h, 0), 0.0);
}

TEST(DetailedBalance, ScreenedLevelOfHundredOneStates) {
    FiniteHierarchy h;
    const int n = 101;
    h.q0 = Eigen::MatrixXd::Zero(n, n);
    // Asymmetric proposal: row-normalised Gaussian kernel.
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) h.q0(a, b) = std::exp(-0.5 * std::pow((a - b) / 4.0, 2));
        h.q0.row(a) /= h.q0.row(a).sum();
    }
    for (int l = 0; l < 2; ++l) {
        Eigen::VectorXd p(n);
        for (int a = 0; a < n; ++a) {
            const double x = -4.0 + 0.08 * a;
            p[a] = std::exp(-0.5 * x * x - std::pow(std::exp(0.5 * x) + 0.2 * (1 - l) * std::sin(2 * x) - 1.5, 2) / (2 * 0.1 * (2 - l)));
        }
        h.pi.push_back(p);
    }
    EXPECT_LE(detailed_balance_check(h, 1), 1e-10);
    // pi_1 is stationary for the level-1 kernel.
    const auto K = screened_kernel(h, 1);
    const Eigen::VectorXd p = h.pi[1] / h.pi[1].sum();
    EXPECT_LE((K.transpose() * p - p).cwiseAbs().maxCoeff(), 1e-12);
    // Rows stay stochastic.
    EXPECT_LE((K.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(DetailedBalance, ScreenedKernelUsesSimplifiedRatio) {
    // Off-diagonal level-1 entries equal the simplified ratio times the level-0 kernel.
    const auto h = random_walk_hierarchy(7, 2, 9);
    const auto K0 = screened_kernel(h, 0);
    const auto K1 = screened_kernel(h, 1);
    for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b) {
            if (a == b || K0(a, b) == 0.0) continue;
            const double rho = std::exp(screened_log_acceptance(std::log(h.pi[0][a]), std::log(h.pi[0][b]),
                                                                std::log(h.pi[1][a]), std::log(h.pi[1][b])));
            EXPECT_NEAR(K1(a, b), rho * K0(a, b), 1e-15);
        }
}

TEST(Mlmcmc, EqualLevelsPassEverySurvivor) {
    ToyForward f;
    f.c = {0.0, 0.0, 0.0};
    auto spec = toy_spec(f, 3);
    spec.sigma = {0.2, 0.2, 0.2};
    MlmcmcSettings s;
    s.proposal.delta = 0.5;
    s.final_accepted = 300;
    s.burn_in = 50;
    s.seed = 5;
    const auto c = mlmcmc_screen(spec, f, scalar(0.0), s);
    EXPECT_EQ(c.P[1], c.P[2]);
    EXPECT_EQ(c.P[2], c.P[3]);
    EXPECT_EQ(c.P[3], 300);
    const auto e = mlmcmc_estimate(c);
    for (const auto& q : e.Q) EXPECT_EQ(q[0], 0.0);
    EXPECT_EQ(e.FL, e.F0);
}

TEST(Mlmcmc, FunnelAndRecords) {
    const ToyForward f;
    const auto spec = toy_spec(f, 3);
    MlmcmcSettings s;
    s.proposal.delta = 0.5;
    s.final_accepted = 400;
    s.burn_in = 100;
    s.seed = 6;
    const auto c = mlmcmc_screen(spec, f, scalar(0.0), s);
    for (std::size_t l = 1; l < c.P.size(); ++l) EXPECT_GE(c.P[l - 1], c.P[l]);
    EXPECT_EQ(c.P[0], c.iterations);
    EXPECT_EQ(c.P[3], 400);
    EXPECT_EQ(static_cast<long>(c.records.size()), c.iterations);
    EXPECT_EQ(static_cast<long>(c.stores[0].size()), c.iterations - c.burn_in_iterations);
    EXPECT_EQ(c.finest_accepted.size(), 300u);
    for (double r : c.acceptance_rates()) {
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
    long accepted = 0;
    for (const auto& r : c.records) {
        accepted += r.accepted;
        EXPECT_TRUE(std::isfinite(r.log_posterior[0]));
        if (r.stages_passed >= 1) {
            EXPECT_TRUE(std::isfinite(r.log_posterior[1]));
        }
    }
    EXPECT_EQ(accepted, 400);
}

TEST(Mlmcmc, SingleLevelIsMetropolisHastings) {
    const ToyForward f;
    const auto spec = toy_spec(f, 1);
    MlmcmcSettings s;
    s.proposal.delta = 0.5;
    s.final_accepted = 200;
    s.burn_in = 0;
    s.seed = 21;
    const auto c = mlmcmc_screen(spec, f, scalar(0.0), s);
    MhSettings m;
    m.proposal.delta = 0.5;
    m.steps = c.iterations;
    m.seed = 21;
    const auto h = metropolis_hastings([&](const ParameterVector& e) { return log_posterior(spec, 0, e, scalar(f.value(e[0], 0))); },
                                       scalar(0.0), m);
    ASSERT_EQ(h.states.size(), c.stores[0].size());
    double mean = 0;
    for (std::size_t i = 0; i < h.states.size(); ++i) {
        EXPECT_EQ(c.stores[0][i][0], f.value(h.states[i][0], 0));
        mean += f.value(h.states[i][0], 0);
    }
    EXPECT_NEAR(mlmcmc_estimate(c).FL[0], mean / h.states.size(), 1e-13);
}

TEST(Mlmcmc, Reproducible) {
    const ToyForward f;
    const auto spec = toy_spec(f, 3);
    MlmcmcSettings s;
    s.final_accepted = 100;
    s.burn_in = 10;
    s.seed = 2;
    const auto a = mlmcmc_screen(spec, f, scalar(0.0), s);
    const auto b = mlmcmc_screen(spec, f, scalar(0.0), s);
    EXPECT_EQ(a.P, b.P);
    EXPECT_EQ(a.error_trace, b.error_trace);
}

TEST(Mlmcmc, EstimatorAndPerLevelChainsMatchQuadrature) {
    const ToyForward f;
    const auto spec = toy_spec(f, 3);
    MlmcmcSettings s;
    s.proposal.delta = 0.5;
    s.final_accepted = 20000;
    s.burn_in = 500;
    s.seed = 13;
    s.keep_records = false;
    const auto c = mlmcmc_screen(spec, f, scalar(0.0), s);
    const auto e = mlmcmc_estimate(c);
    const double truth = oracle_mean(f, oracle(f, spec, 2), 2);
    EXPECT_LE(std::abs(e.FL[0] - truth), 3.0 * e.stderr_FL[0]) << "FL " << e.FL[0] << " truth " << truth;
    // Each level's chain samples its own posterior.
    for (int l = 0; l < 2; ++l) {
        std::vector<double> xs;
        for (const auto& v : c.stores[static_cast<std::size_t>(l)]) xs.push_back(v[0]);
        double m = 0;
        for (double v : xs) m += v;
        m /= static_cast<double>(xs.size());
        const double t = oracle_mean(f, oracle(f, spec, l), l);
        EXPECT_LE(std::abs(m - t), 3.0 * batch_means_stderr(xs)) << "level " << l;
    }
}

TEST(Mlmcmc, ZeroNoiseStartHasZeroError) {
    const ToyForward f;
    PosteriorSpec spec;
    spec.observations = scalar(f.value(0.0, 2));
    spec.sigma = sigma_schedule(0.2, 3);
    MlmcmcSettings s;
    s.final_accepted = 5;
    s.burn_in = 1;
    const auto c = mlmcmc_screen(spec, f, scalar(0.0), s);
    ASSERT_EQ(static_cast<long>(c.error_trace.size()), c.iterations + 1);
    EXPECT_EQ(c.error_trace[0], 0.0);
    EXPECT_GT(c.error_trace.back(), 0.0);
}

TEST(Mlmcmc, RejectsBadSettingsAndEmptyStores) {
    const ToyForward f;
    const auto spec = toy_spec(f, 2);
    MlmcmcSettings s;
    s.final_accepted = 10;
    s.burn_in = 10;
    EXPECT_THROW(mlmcmc_screen(spec, f, scalar(0.0), s), ConfigError);
    EXPECT_THROW(mlmcmc_estimate(std::vector<std::vector<Eigen::VectorXd>>{}), ConfigError);
    EXPECT_THROW(mlmcmc_estimate(std::vector<std::vector<Eigen::VectorXd>>{{scalar(1.0)}, {}}), ConfigError);
}
