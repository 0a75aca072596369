#pragma once

// Bayesian posterior over the KLE coefficients, random-walk Metropolis-Hastings,
// and the multilevel screened sampler.
//
// The multilevel sampler runs one chain per level. Chain j targets pi_j with a
// delayed-acceptance kernel: a random-walk proposal is screened through levels
// 0..j in turn using the two-level acceptance ratio, and chain j moves only if
// every stage passes. All chains share the Gaussian increment and the stage
// uniforms of an iteration, and proposals of chains sitting at different
// states are tied by a reflection-maximal coupling, so coupled chains see the
// same proposal and the same decisions. While the chains coincide this is a
// single proposal ascending the levels and stopping at the first rejection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlgms/errors.hpp"
#include "mlgms/grid.hpp"
#include "mlgms/randfield.hpp"
#include "mlgms/rng.hpp"

namespace mlgms {

/// How likelihood widths relax from the finest level (sigma_f) to coarser ones.
///  geometric:          sigma_l = 2^{(L-1-l)/2} sigma_f
///  halving_precision:  1/sigma_l^2 = (1 - 2^{-(l+1)}) / (1 - 2^{-L}) / sigma_f^2, so the
///                      precision added at each level halves from one level to the next
///  constant:           sigma_l = sigma_f
enum class SigmaSchedule { Geometric, HalvingPrecision, Constant };

inline SigmaSchedule parse_sigma_schedule(const std::string& s) {
    if (s == "geometric") return SigmaSchedule::Geometric;
    if (s == "halving_precision") return SigmaSchedule::HalvingPrecision;
    if (s == "constant") return SigmaSchedule::Constant;
    throw ConfigError("unknown sigma schedule '" + s + "' (expected geometric, halving_precision or constant)");
}

inline std::string to_string(SigmaSchedule k) {
    switch (k) {
    case SigmaSchedule::Geometric: return "geometric";
    case SigmaSchedule::HalvingPrecision: return "halving_precision";
    case SigmaSchedule::Constant: return "constant";
    }
    return "?";
}

/// Likelihood widths for levels l = 0..L-1, coarsest first, ending at sigma_f.
inline std::vector<double> sigma_schedule(double sigma_f, int levels, SigmaSchedule kind = SigmaSchedule::HalvingPrecision) {
    if (!(sigma_f > 0.0)) throw ConfigError("sigma_f must be positive");
    if (levels < 1) throw ConfigError("sigma schedule needs at least one level");
    std::vector<double> s(static_cast<std::size_t>(levels));
    const double top = 1.0 - std::pow(0.5, levels);
    for (int l = 0; l < levels; ++l) {
        double v = sigma_f;
        if (kind == SigmaSchedule::Geometric) v = std::pow(2.0, 0.5 * (levels - 1 - l)) * sigma_f;
        if (kind == SigmaSchedule::HalvingPrecision) v = sigma_f * std::sqrt(top / (1.0 - std::pow(0.5, l + 1)));
        s[static_cast<std::size_t>(l)] = v;
    }
    s.back() = sigma_f;
    return s;
}

/// 0.05 ||F_obs|| / sqrt(#observations).
inline double default_sigma_f(const Eigen::VectorXd& observations) {
    if (observations.size() == 0) throw ConfigError("no observations");
    return 0.05 * observations.norm() / std::sqrt(static_cast<double>(observations.size()));
}

/// The 3x3 tensor grid {0.25, 0.5, 0.75}^2, x fastest.
inline std::vector<Point> default_measurement_points() {
    std::vector<Point> p;
    for (double y : {0.25, 0.5, 0.75})
        for (double x : {0.25, 0.5, 0.75}) p.push_back({x, y});
    return p;
}

struct PosteriorSpec {
    Eigen::VectorXd observations;
    std::vector<double> sigma;  // per level, coarsest first
    std::vector<Point> points;  // measurement locations; may be empty for non-spatial toys

    int levels() const { return static_cast<int>(sigma.size()); }

    void validate() const {
        if (observations.size() == 0) throw ConfigError("posterior has no observations");
        if (sigma.empty()) throw ConfigError("posterior needs at least one sigma");
        for (std::size_t l = 0; l < sigma.size(); ++l) {
            if (!(sigma[l] > 0.0) || !std::isfinite(sigma[l])) throw ConfigError("sigma values must be positive and finite");
            if (l > 0 && sigma[l] > sigma[l - 1]) throw ConfigError("sigma must be nonincreasing from coarse to fine");
        }
        if (!points.empty() && static_cast<Eigen::Index>(points.size()) != observations.size())
            throw ConfigError("number of measurement points does not match observations");
        for (const auto& p : points)
            if (!(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0))
                throw ConfigError("measurement points must lie strictly inside the unit square");
    }
};

inline double log_prior(const ParameterVector& eta) { return -0.5 * eta.squaredNorm(); }

inline double log_likelihood(const PosteriorSpec& spec, int level, const Eigen::VectorXd& qoi) {
    if (qoi.size() != spec.observations.size()) throw ConfigError("forward output does not match observations");
    const double s = spec.sigma.at(static_cast<std::size_t>(level));
    return -(spec.observations - qoi).squaredNorm() / (2.0 * s * s);
}

/// log pi_l(eta) up to an additive constant, given F_l(eta).
inline double log_posterior(const PosteriorSpec& spec, int level, const ParameterVector& eta, const Eigen::VectorXd& qoi) {
    return log_likelihood(spec, level, qoi) + log_prior(eta);
}

/// log pi_l(eta) with `forward(eta, level)` returning F_l(eta).
template <class Forward>
double log_posterior(int level, const ParameterVector& eta, const PosteriorSpec& spec, Forward&& forward) {
    return log_posterior(spec, level, eta, forward(eta, level));
}

// Acceptance probabilities, all in log space.

/// log min{1, q(cur|prop) pi(prop) / (q(prop|cur) pi(cur))}.
inline double mh_log_acceptance(double log_pi_cur, double log_pi_prop, double log_q_fwd = 0.0, double log_q_bwd = 0.0) {
    if (log_pi_prop == -std::numeric_limits<double>::infinity()) return log_pi_prop;
    const double r = log_q_bwd + log_pi_prop - log_q_fwd - log_pi_cur;
    return std::min(0.0, r);
}

/// log min{1, pi_l(cur) pi_{l+1}(prop) / (pi_l(prop) pi_{l+1}(cur))}.
inline double screened_log_acceptance(double lo_cur, double lo_prop, double hi_cur, double hi_prop) {
    return std::min(0.0, lo_cur + hi_prop - lo_prop - hi_cur);
}

/// Level l+1 acceptance from the screened proposal of level l built on a
/// level-(l-1) proposal density q: composes both directions of the level-l
/// acceptance with q before forming the Metropolis-Hastings ratio.
inline double screened_log_acceptance_full(double log_q_fwd, double log_q_bwd, double lo_cur, double lo_prop,
                                           double hi_cur, double hi_prop) {
    const double rho_fwd = mh_log_acceptance(lo_cur, lo_prop, log_q_fwd, log_q_bwd);
    const double rho_bwd = mh_log_acceptance(lo_prop, lo_cur, log_q_bwd, log_q_fwd);
    const double q_fwd = rho_fwd + log_q_fwd;  // screened proposal density cur -> prop
    const double q_bwd = rho_bwd + log_q_bwd;
    return mh_log_acceptance(hi_cur, hi_prop, q_fwd, q_bwd);
}

// Single-level random-walk Metropolis-Hastings.

struct ProposalSpec {
    double delta = 0.2;

    void validate() const {
        if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("proposal step delta must be positive");
    }
};

struct MhSettings {
    ProposalSpec proposal;
    long steps = 10000;         // total iterations, ignored when target_accepted > 0
    long target_accepted = 0;   // stop after this many acceptances when positive
    long burn_in = 0;           // iterations (or acceptances, with target_accepted) discarded
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    long max_steps = 100'000'000;
};

struct MhChain {
    std::vector<ParameterVector> states;  // chain state after every retained iteration
    std::vector<double> log_density;
    long steps = 0;
    long accepted = 0;

    double acceptance_rate() const { return steps == 0 ? 0.0 : static_cast<double>(accepted) / steps; }
};

/// Random-walk chain eta' = eta + delta * xi with xi standard normal, accepting
/// when u < min{1, pi(eta') / pi(eta)}. Iteration m draws from substream
/// (seed, stream, m).
template <class LogTarget>
MhChain metropolis_hastings(LogTarget&& log_target, const ParameterVector& start, const MhSettings& s) {
    s.proposal.validate();
    if (s.target_accepted <= 0 && s.steps < 1) throw ConfigError("MH needs steps >= 1 or a positive accept target");
    if (s.burn_in < 0) throw ConfigError("burn-in must be >= 0");
    MhChain c;
    ParameterVector x = start;
    double lx = log_target(x);
    if (!std::isfinite(lx)) throw DomainError("MH start state has zero target density");
    const bool by_accepts = s.target_accepted > 0;
    for (long m = 0;; ++m) {
        if (by_accepts ? c.accepted >= s.target_accepted : m >= s.steps) break;
        if (m >= s.max_steps) throw NumericalError("MH did not reach its accept target within max_steps");
        RandomStream rs(s.seed, s.stream, static_cast<std::uint64_t>(m));
        const ParameterVector y = x + s.proposal.delta * rs.normal_vector(static_cast<int>(x.size()));
        const double ly = log_target(y);
        if (std::log(rs.uniform()) < mh_log_acceptance(lx, ly)) {
            x = y;
            lx = ly;
            ++c.accepted;
        }
        ++c.steps;
        const bool past = by_accepts ? c.accepted > s.burn_in : c.steps > s.burn_in;
        if (past) {
            c.states.push_back(x);
            c.log_density.push_back(lx);
        }
    }
    return c;
}

// Multilevel screened sampler.

struct MlmcmcSettings {
    ProposalSpec proposal;
    long final_accepted = 1000;  // acceptances of the finest chain, burn-in included
    long burn_in = 300;          // finest-chain acceptances discarded
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    long max_iterations = 10'000'000;
    bool keep_records = true;

    void validate() const {
        proposal.validate();
        if (final_accepted < 1) throw ConfigError("final accept target must be >= 1");
        if (burn_in < 0 || burn_in >= final_accepted) throw ConfigError("burn-in must lie in [0, final accept target)");
    }
};

/// One iteration as seen by the finest chain.
struct MlmcmcRecord {
    long iteration = 0;
    int stages_passed = 0;                // levels the proposal survived
    bool accepted = false;                // survived every level
    std::vector<double> log_posterior;    // of the proposal; NaN where not evaluated
    ParameterVector proposal;
    double error = 0.0;                   // ||F_obs - F_{L-1}(state)|| after the iteration
};

struct MlmcmcChains {
    int levels = 0;
    /// P[0] proposals of the finest chain; P[l+1] proposals that passed level l.
    std::vector<long> P;
    std::vector<long> chain_accepts;       // acceptances per chain
    long iterations = 0;
    long burn_in_iterations = 0;           // iterations before storage started
    long forward_calls = 0;
    /// stores[l][m] = F_l(x_l^m), the level-l chain state after retained iteration m.
    std::vector<std::vector<Eigen::VectorXd>> stores;
    std::vector<ParameterVector> finest_accepted;  // accepted states of the finest chain after burn-in
    std::vector<double> error_trace;               // finest chain: start state, then after each iteration
    std::vector<MlmcmcRecord> records;

    /// P[l+1] / P[l] for l = 0..L-1.
    std::vector<double> acceptance_rates() const {
        std::vector<double> r;
        for (std::size_t l = 0; l + 1 < P.size(); ++l)
            r.push_back(P[l] == 0 ? 0.0 : static_cast<double>(P[l + 1]) / static_cast<double>(P[l]));
        return r;
    }
};

namespace detail {

struct ChainState {
    ParameterVector eta;
    std::vector<double> log_pi;       // levels 0..j
    std::vector<Eigen::VectorXd> qoi; // levels 0..j
};

struct Candidate {
    ParameterVector eta;
    int top = 0;                      // highest chain index using this proposal
    std::vector<double> log_pi;       // evaluated levels
    std::vector<Eigen::VectorXd> qoi;
};

} // namespace detail

/// Runs the coupled per-level chains until the finest chain has accepted
/// `final_accepted` proposals. `forward(eta, max_level)` returns F_0..F_max at
/// the measurement points.
template <class Forward>
MlmcmcChains mlmcmc_screen(const PosteriorSpec& spec, Forward&& forward, const ParameterVector& start,
                           const MlmcmcSettings& s) {
    spec.validate();
    s.validate();
    const int L = spec.levels();
    const int n = static_cast<int>(start.size());
    const double delta = s.proposal.delta;
    MlmcmcChains out;
    out.levels = L;
    out.P.assign(static_cast<std::size_t>(L + 1), 0);
    out.chain_accepts.assign(static_cast<std::size_t>(L), 0);
    out.stores.resize(static_cast<std::size_t>(L));

    auto evaluate = [&](detail::Candidate& c, int level) {
        if (static_cast<int>(c.qoi.size()) > level) return;
        const int upto = level == 0 ? 0 : c.top;
        auto f = forward(c.eta, upto);
        ++out.forward_calls;
        if (static_cast<int>(f.size()) != upto + 1) throw ConfigError("forward returned the wrong number of levels");
        c.qoi = std::move(f);
        c.log_pi.resize(c.qoi.size());
        for (int l = 0; l <= upto; ++l) c.log_pi[static_cast<std::size_t>(l)] = log_posterior(spec, l, c.eta, c.qoi[static_cast<std::size_t>(l)]);
    };

    std::vector<detail::ChainState> chains(static_cast<std::size_t>(L));
    {
        detail::Candidate c{start, L - 1, {}, {}};
        evaluate(c, L - 1);
        for (int j = 0; j < L; ++j) {
            auto& ch = chains[static_cast<std::size_t>(j)];
            ch.eta = start;
            ch.log_pi.assign(c.log_pi.begin(), c.log_pi.begin() + j + 1);
            ch.qoi.assign(c.qoi.begin(), c.qoi.begin() + j + 1);
        }
        if (!std::isfinite(c.log_pi.back())) throw DomainError("start state has zero posterior density");
    }

    const std::size_t top = static_cast<std::size_t>(L - 1);
    out.error_trace.push_back((spec.observations - chains[top].qoi.back()).norm());
    bool storing = s.burn_in == 0;
    for (long m = 0; out.chain_accepts[top] < s.final_accepted; ++m) {
        if (m >= s.max_iterations) throw NumericalError("multilevel sampler did not reach its accept target within max_iterations");
        RandomStream rs(s.seed, s.stream, static_cast<std::uint64_t>(m));
        const Eigen::VectorXd xi = rs.normal_vector(n);
        std::vector<double> log_u(static_cast<std::size_t>(L));
        for (auto& u : log_u) u = std::log(rs.uniform());
        const double log_v = std::log(rs.uniform());

        // Proposals: the finest chain moves by delta * xi, the others are
        // reflection-maximally coupled to it.
        const ParameterVector& a = chains[top].eta;
        const ParameterVector x_lead = a + delta * xi;
        std::vector<detail::Candidate> cands;
        std::vector<int> cand_of(static_cast<std::size_t>(L));
        for (int j = L - 1; j >= 0; --j) {
            const ParameterVector& b = chains[static_cast<std::size_t>(j)].eta;
            ParameterVector y;
            if (b == a) {
                y = x_lead;
            } else {
                const Eigen::VectorXd z = (a - b) / delta;
                const double log_ratio = -0.5 * ((xi + z).squaredNorm() - xi.squaredNorm());
                if (log_v <= log_ratio) {
                    y = x_lead;
                } else {
                    const Eigen::VectorXd e = z / z.norm();
                    y = b + delta * (xi - 2.0 * e.dot(xi) * e);
                }
            }
            int k = -1;
            for (std::size_t c = 0; c < cands.size(); ++c)
                if (cands[c].eta == y) k = static_cast<int>(c);
            if (k < 0) {
                cands.push_back({y, j, {}, {}});
                k = static_cast<int>(cands.size()) - 1;
            }
            cand_of[static_cast<std::size_t>(j)] = k;
        }

        MlmcmcRecord rec;
        rec.iteration = m;
        for (int j = L - 1; j >= 0; --j) {
            auto& ch = chains[static_cast<std::size_t>(j)];
            auto& c = cands[static_cast<std::size_t>(cand_of[static_cast<std::size_t>(j)])];
            int passed = 0;
            for (int l = 0; l <= j; ++l) {
                evaluate(c, l);
                const auto ul = static_cast<std::size_t>(l);
                const double lr = l == 0 ? mh_log_acceptance(ch.log_pi[0], c.log_pi[0])
                                         : screened_log_acceptance(ch.log_pi[ul - 1], c.log_pi[ul - 1], ch.log_pi[ul], c.log_pi[ul]);
                if (!(log_u[ul] < lr)) break;
                ++passed;
            }
            if (j == L - 1) {
                for (int l = 0; l <= passed; ++l) ++out.P[static_cast<std::size_t>(l)];
                rec.stages_passed = passed;
                rec.accepted = passed == L;
                if (s.keep_records) {
                    rec.proposal = c.eta;
                    rec.log_posterior.assign(static_cast<std::size_t>(L), std::numeric_limits<double>::quiet_NaN());
                    std::copy(c.log_pi.begin(), c.log_pi.end(), rec.log_posterior.begin());
                }
            }
            if (passed == j + 1) {
                ch.eta = c.eta;
                ch.log_pi.assign(c.log_pi.begin(), c.log_pi.begin() + j + 1);
                ch.qoi.assign(c.qoi.begin(), c.qoi.begin() + j + 1);
                ++out.chain_accepts[static_cast<std::size_t>(j)];
            }
        }
        ++out.iterations;
        const double err = (spec.observations - chains[top].qoi.back()).norm();
        rec.error = err;
        const bool lead_accepted = rec.accepted;
        out.error_trace.push_back(err);
        if (s.keep_records) out.records.push_back(std::move(rec));

        if (storing) {
            for (int l = 0; l < L; ++l) out.stores[static_cast<std::size_t>(l)].push_back(chains[static_cast<std::size_t>(l)].qoi.back());
            if (lead_accepted) out.finest_accepted.push_back(chains[top].eta);
        } else if (out.chain_accepts[top] >= s.burn_in) {
            storing = true;
            out.burn_in_iterations = out.iterations;
        }
    }
    return out;
}

struct MultilevelPosteriorEstimate {
    Eigen::VectorXd F0;                // initial-level mean
    std::vector<Eigen::VectorXd> Q;    // Q[l-1] is the level-l correction, l = 1..L-1
    std::vector<long> samples;         // M_l
    Eigen::VectorXd FL;                // F0 + sum of corrections
    Eigen::VectorXd stderr_FL;         // batch-means standard error per component
};

/// Batch-means standard error of the mean of a scalar series.
inline double batch_means_stderr(const std::vector<double>& x, int batches = 20) {
    const long n = static_cast<long>(x.size());
    if (n < 2 * batches) batches = std::max<long>(1, n / 2);
    if (batches < 2) return std::numeric_limits<double>::infinity();
    const long b = n / batches;
    std::vector<double> means(static_cast<std::size_t>(batches));
    for (int k = 0; k < batches; ++k) {
        double s = 0;
        for (long i = k * b; i < (k + 1) * b; ++i) s += x[static_cast<std::size_t>(i)];
        means[static_cast<std::size_t>(k)] = s / b;
    }
    double mu = 0;
    for (double v : means) mu += v;
    mu /= batches;
    double var = 0;
    for (double v : means) var += (v - mu) * (v - mu);
    var /= (batches - 1);
    return std::sqrt(var / batches);
}

/// F0 from the level-0 store, Q_l = mean(F_l(x_l^m) - F_{l-1}(y_l^m)) with
/// y_l^m the level-(l-1) state of the same iteration, and FL = F0 + sum Q_l.
inline MultilevelPosteriorEstimate mlmcmc_estimate(const std::vector<std::vector<Eigen::VectorXd>>& stores) {
    if (stores.empty() || stores[0].empty()) throw ConfigError("multilevel posterior estimate needs a nonempty level-0 store");
    MultilevelPosteriorEstimate e;
    auto mean_of = [](const std::vector<Eigen::VectorXd>& v) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(v.front().size());
        for (const auto& x : v) s += x;
        return Eigen::VectorXd(s / static_cast<double>(v.size()));
    };
    e.F0 = mean_of(stores[0]);
    e.samples.push_back(static_cast<long>(stores[0].size()));
    e.FL = e.F0;
    for (std::size_t l = 1; l < stores.size(); ++l) {
        const auto& x = stores[l];
        const auto& y = stores[l - 1];
        if (x.empty()) throw ConfigError("empty store at level " + std::to_string(l));
        if (y.size() < x.size()) throw ConfigError("store at level " + std::to_string(l - 1) + " is shorter than level " + std::to_string(l));
        std::vector<Eigen::VectorXd> d;
        d.reserve(x.size());
        for (std::size_t m = 0; m < x.size(); ++m) d.push_back(x[m] - y[m]);
        e.Q.push_back(mean_of(d));
        e.samples.push_back(static_cast<long>(x.size()));
        e.FL += e.Q.back();
    }
    // Standard error from the per-iteration telescoped series.
    const std::size_t M = stores.back().size();
    e.stderr_FL.resize(e.FL.size());
    for (Eigen::Index c = 0; c < e.FL.size(); ++c) {
        std::vector<double> series(M);
        for (std::size_t m = 0; m < M; ++m) {
            double v = stores[0][m][c];
            for (std::size_t l = 1; l < stores.size(); ++l) v += stores[l][m][c] - stores[l - 1][m][c];
            series[m] = v;
        }
        e.stderr_FL[c] = batch_means_stderr(series);
    }
    return e;
}

inline MultilevelPosteriorEstimate mlmcmc_estimate(const MlmcmcChains& chains) { return mlmcmc_estimate(chains.stores); }

// Finite state spaces: exact kernels of the screened hierarchy.

/// q0(a, b) = probability of proposing b from a (rows sum to one), and the
/// unnormalised level densities pi[l](a).
struct FiniteHierarchy {
    Eigen::MatrixXd q0;
    std::vector<Eigen::VectorXd> pi;

    void validate() const {
        if (q0.rows() != q0.cols() || q0.rows() == 0) throw ConfigError("q0 must be square and nonempty");
        for (Eigen::Index a = 0; a < q0.rows(); ++a)
            if (std::abs(q0.row(a).sum() - 1.0) > 1e-12 || q0.row(a).minCoeff() < 0.0)
                throw ConfigError("q0 rows must be probability vectors");
        if (pi.empty()) throw ConfigError("hierarchy needs at least one level");
        for (const auto& p : pi)
            if (p.size() != q0.rows() || p.minCoeff() <= 0.0) throw ConfigError("level densities must be positive on every state");
    }
};

/// Transition matrix of the level-`level` chain: level 0 is Metropolis-Hastings
/// with q0; level l uses the level-(l-1) kernel as its proposal with the
/// general Metropolis-Hastings ratio.
inline Eigen::MatrixXd screened_kernel(const FiniteHierarchy& h, int level) {
    h.validate();
    if (level < 0 || level >= static_cast<int>(h.pi.size())) throw ConfigError("level out of range");
    const Eigen::Index n = h.q0.rows();
    Eigen::MatrixXd q = h.q0;
    Eigen::MatrixXd K(n, n);
    for (int l = 0; l <= level; ++l) {
        const Eigen::VectorXd& p = h.pi[static_cast<std::size_t>(l)];
        K.setZero();
        for (Eigen::Index a = 0; a < n; ++a) {
            double off = 0;
            for (Eigen::Index b = 0; b < n; ++b) {
                if (a == b || q(a, b) == 0.0) continue;
                const double rho = q(b, a) == 0.0 ? 0.0 : std::min(1.0, q(b, a) * p[b] / (q(a, b) * p[a]));
                K(a, b) = rho * q(a, b);
                off += K(a, b);
            }
            K(a, a) = 1.0 - off;
        }
        q = K;
    }
    return K;
}

/// max_{a,b} |pi_l(a) Q_l(a,b) - pi_l(b) Q_l(b,a)| with pi_l normalised.
inline double detailed_balance_check(const FiniteHierarchy& h, int level) {
    const Eigen::MatrixXd K = screened_kernel(h, level);
    const Eigen::VectorXd p = h.pi[static_cast<std::size_t>(level)] / h.pi[static_cast<std::size_t>(level)].sum();
    double worst = 0;
    for (Eigen::Index a = 0; a < K.rows(); ++a)
        for (Eigen::Index b = 0; b < K.cols(); ++b) worst = std::max(worst, std::abs(p[a] * K(a, b) - p[b] * K(b, a)));
    return worst;
}

} // namespace mlgms
