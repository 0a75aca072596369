#pragma once

// End-to-end experiments: problem setup with the offline cache, the
// MLMC-versus-MC comparison, and the multilevel MCMC run.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "mlgms/estimators.hpp"
#include "mlgms/gmsfem.hpp"
#include "mlgms/harness/cache.hpp"
#include "mlgms/harness/config.hpp"
#include "mlgms/harness/io.hpp"
#include "mlgms/samplers.hpp"

namespace mlgms {

using LogFn = std::function<void(const std::string&)>;

inline LogFn stderr_log() {
    return [](const std::string& m) { std::cerr << "[mlgms] " << m << '\n'; };
}

// Substreams of the experiment seeds.
constexpr std::uint64_t kReferenceStream = 1000;
constexpr std::uint64_t kMlmcStream = 2000;
constexpr std::uint64_t kMcStream = 3000;
constexpr std::uint64_t kTruthStream = 4000;
constexpr std::uint64_t kNoiseStream = 4001;
constexpr std::uint64_t kChainStream = 5000;

struct Problem {
    ExperimentConfig cfg;
    StructuredGridPair grid;
    std::vector<Neighborhood> nbs;
    KLModel kl;
    OfflineSpace offline;
    std::filesystem::path cache_path;
    bool loaded_from_cache = false;
};

inline std::filesystem::path default_cache_path(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    if (!cfg.cache.empty()) {
        const std::filesystem::path p(cfg.cache);
        if (p.is_absolute()) return p;
        return (cfg.source_path.empty() ? std::filesystem::path(".") : cfg.source_path.parent_path()) / p;
    }
    return out_dir / ("offline-" + detail::hex64(offline_key(cfg)) + ".bin");
}

inline CacheHeader cache_header(const ExperimentConfig& cfg, const StructuredGridPair& g) {
    CacheHeader h;
    h.key = offline_key(cfg);
    h.grid_hash = g.hash();
    h.kle_terms = cfg.kle_terms;
    h.settings = cfg.offline;
    h.neighborhoods = g.num_coarse_nodes();
    return h;
}

/// Grid, KLE and offline space. The offline space is read from the cache when
/// present and otherwise built and written there.
inline Problem prepare_problem(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest,
                               const LogFn& log, bool rebuild = false) {
    Problem p{cfg, cfg.grid(), {}, {}, {}, {}, false};
    p.nbs = build_neighborhoods(p.grid);
    {
        StageTimer t(manifest, "kle");
        p.kl = truncated_kle(p.grid, cfg.covariance, cfg.kle_terms);
    }
    p.cache_path = default_cache_path(cfg, out_dir);
    const CacheHeader h = cache_header(cfg, p.grid);
    StageTimer t(manifest, "offline");
    if (!rebuild && std::filesystem::exists(p.cache_path)) {
        p.offline = read_offline_cache(p.cache_path, h);
        p.loaded_from_cache = true;
        log("offline space loaded from " + p.cache_path.string());
    } else {
        log("building offline space (" + std::to_string(p.nbs.size()) + " neighborhoods)");
        p.offline = build_offline(p.grid, p.nbs, p.kl, cfg.offline, cfg.workers);
        write_offline_cache(p.cache_path, h, p.offline);
        log("offline space written to " + p.cache_path.string());
    }
    for (const auto& w : p.offline.warnings) log("warning: " + w);
    return p;
}

inline ForwardModel make_forward(const Problem& p, const std::vector<int>& dims, QoiSpec qoi) {
    ForwardSettings fs;
    fs.level_dims = dims;
    fs.source = SourceSpec::constant(p.cfg.source);
    fs.boundary = p.cfg.boundary_spec();
    fs.qoi = std::move(qoi);
    return ForwardModel(p.grid, p.kl, p.offline, fs);
}

/// Weighted L2(D) norm of a nodal field.
inline double l2_norm(const Eigen::VectorXd& w, const Eigen::VectorXd& v) { return std::sqrt((w.array() * v.array().square()).sum()); }

struct Table1Replicate {
    double e_mlmc = 0, e_mc = 0, ratio = 0;
};

struct Table1Summary {
    std::string name;
    LevelPlan plan;
    int m_hat = 0;
    int reference_samples = 0;
    std::vector<Table1Replicate> replicates;
    std::vector<double> level_variance;  // first replicate, weighted total variance of X_l - X_{l-1}
    double ratio_mean = 0, ratio_stderr = 0, e_mlmc_mean = 0, e_mc_mean = 0;
};

inline void summarize(Table1Summary& s) {
    const double R = static_cast<double>(s.replicates.size());
    for (const auto& r : s.replicates) {
        s.ratio_mean += r.ratio / R;
        s.e_mlmc_mean += r.e_mlmc / R;
        s.e_mc_mean += r.e_mc / R;
    }
    double var = 0;
    for (const auto& r : s.replicates) var += (r.ratio - s.ratio_mean) * (r.ratio - s.ratio_mean);
    s.ratio_stderr = s.replicates.size() > 1 ? std::sqrt(var / (R - 1) / R) : 0.0;
}

/// Reference mean from M_ref finest-level samples, then R replicates of the
/// multilevel estimate and of cost-matched finest-level Monte Carlo.
inline Table1Summary run_table1(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest,
                                const LogFn& log, int replicates = -1) {
    const Problem p = prepare_problem(cfg, out_dir, manifest, log);
    const ForwardModel fm = make_forward(p, cfg.level_dims, QoiSpec::field());
    const int L = static_cast<int>(cfg.level_dims.size());
    const int n = p.kl.size();
    const Eigen::VectorXd w = trapezoid_weights(p.grid);
    Table1Summary s;
    s.name = cfg.name;
    s.plan = cfg.plan();
    s.m_hat = cost_matched_mc_samples(s.plan);
    s.reference_samples = cfg.reference_samples;
    const int R = replicates > 0 ? replicates : cfg.replicates;

    auto finest = [&](const ParameterVector& e) { return fm.evaluate(e, L - 1); };
    Eigen::VectorXd ref;
    {
        StageTimer t(manifest, "reference");
        log("reference: " + std::to_string(cfg.reference_samples) + " samples at N=" + std::to_string(cfg.level_dims.back()));
        ref = mc_estimate(finest, cfg.reference_samples, {cfg.mlmc_seed, kReferenceStream, n}, cfg.workers).mean();
    }

    std::filesystem::create_directories(out_dir);
    CsvWriter levels(out_dir / "table1_levels.csv", {"replicate", "level", "N_l", "M_l", "mean_norm", "variance", "cost_units"});
    CsvWriter reps(out_dir / "table1_replicates.csv", {"replicate", "e_mlmc", "e_mc", "ratio"});
    Eigen::VectorXd first_mlmc, first_mc;
    {
        StageTimer t(manifest, "replicates");
        for (int r = 0; r < R; ++r) {
            const auto ml = mlmc_estimate(
                s.plan, [&](const ParameterVector& e, int top) { return fm.evaluate_levels(e, top); },
                {cfg.mlmc_seed, kMlmcStream + static_cast<std::uint64_t>(r), n}, cfg.workers);
            // Same draws as the multilevel replicate, so a one-level plan reproduces MC exactly.
            const auto mc = mc_estimate(finest, s.m_hat, {cfg.mlmc_seed, kMlmcStream + static_cast<std::uint64_t>(r), n}, cfg.workers);
            Table1Replicate rep;
            rep.e_mlmc = relative_l2_error(ml.estimate, ref, w);
            rep.e_mc = relative_l2_error(mc.mean(), ref, w);
            rep.ratio = rep.e_mc / rep.e_mlmc;
            s.replicates.push_back(rep);
            reps.row({r, rep.e_mlmc, rep.e_mc, rep.ratio});
            for (int l = 0; l < L; ++l) {
                const auto& lv = ml.levels[static_cast<std::size_t>(l)];
                const double var = lv.correction.count > 1 ? w.dot(lv.correction.m2) / static_cast<double>(lv.correction.count - 1) : 0.0;
                if (r == 0) s.level_variance.push_back(var);
                levels.row({r, l, lv.dim, lv.samples, l2_norm(w, lv.correction.mean), var, lv.cost_units});
            }
            if (r == 0) {
                first_mlmc = ml.estimate;
                first_mc = mc.mean();
            }
            log("replicate " + std::to_string(r) + ": e_mlmc=" + format_double(rep.e_mlmc) + " e_mc=" + format_double(rep.e_mc) +
                " ratio=" + format_double(rep.ratio));
        }
    }
    summarize(s);
    {
        CsvWriter sum(out_dir / "table1_summary.csv",
                      {"case", "N", "M", "M_hat", "M_ref", "replicates", "e_mlmc_mean", "e_mc_mean", "ratio_mean", "ratio_stderr"});
        std::string ns, ms;
        for (int l = 0; l < L; ++l) {
            ns += (l ? " " : "") + std::to_string(cfg.level_dims[static_cast<std::size_t>(l)]);
            ms += (l ? " " : "") + std::to_string(cfg.level_samples[static_cast<std::size_t>(l)]);
        }
        sum.row({cfg.name, ns, ms, s.m_hat, cfg.reference_samples, R, s.e_mlmc_mean, s.e_mc_mean, s.ratio_mean, s.ratio_stderr});
    }
    {
        CsvWriter f(out_dir / "table1_fields.csv", {"node", "x", "y", "reference", "mlmc", "mc"});
        const auto& xy = p.grid.fine_coordinates();
        for (int i = 0; i < p.grid.num_fine_nodes(); ++i) f.row({i, xy[i][0], xy[i][1], ref[i], first_mlmc[i], first_mc[i]});
    }
    for (const char* f : {"table1_levels.csv", "table1_replicates.csv", "table1_summary.csv", "table1_fields.csv"})
        manifest.add_file(out_dir, out_dir / f);
    manifest.results["table1"] = {{"ratio_mean", s.ratio_mean},   {"ratio_stderr", s.ratio_stderr}, {"e_mlmc_mean", s.e_mlmc_mean},
                                  {"e_mc_mean", s.e_mc_mean},     {"M_hat", s.m_hat},               {"replicates", R}};
    return s;
}

struct MlmcmcSummary {
    std::vector<int> dims;
    std::vector<double> sigma;
    std::vector<long> P;
    std::vector<double> rates;
    long iterations = 0;
    long forward_calls = 0;
    double start_error = 0;
    MultilevelPosteriorEstimate estimate;
    Eigen::VectorXd observations;

    bool rates_nondecreasing() const {
        for (std::size_t l = 1; l < rates.size(); ++l)
            if (rates[l] < rates[l - 1]) return false;
        return true;
    }
    bool funnel() const {
        for (std::size_t l = 1; l < P.size(); ++l)
            if (P[l] > P[l - 1]) return false;
        return true;
    }
};

inline MlmcmcSummary run_mlmcmc_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                           RunManifest& manifest, const LogFn& log) {
    const Problem p = prepare_problem(cfg, out_dir, manifest, log);
    const ForwardModel fm = make_forward(p, cfg.chain_dims, QoiSpec::at_points(cfg.points));
    const int L = static_cast<int>(cfg.chain_dims.size());
    const int n = p.kl.size();

    const ParameterVector truth =
        cfg.reference == "zero" ? ParameterVector(Eigen::VectorXd::Zero(n)) : prior_draw(cfg.reference_seed, kTruthStream, 0, n);
    PosteriorSpec spec;
    spec.points = cfg.points;
    spec.observations = fm.evaluate(truth, L - 1);
    if (cfg.noise > 0) {
        RandomStream rs(cfg.reference_seed, kNoiseStream, 0);
        const double scale = spec.observations.norm() / std::sqrt(static_cast<double>(spec.observations.size()));
        spec.observations += cfg.noise * scale * rs.normal_vector(static_cast<int>(spec.observations.size()));
    }
    const double sigma_f = cfg.sigma_f > 0 ? cfg.sigma_f : default_sigma_f(spec.observations);
    spec.sigma = sigma_schedule(sigma_f, L, cfg.sigma_schedule);
    std::string sig;
    for (double v : spec.sigma) sig += " " + format_double(v);
    log("sigma (" + to_string(cfg.sigma_schedule) + "):" + sig);

    MlmcmcSettings st;
    st.proposal.delta = cfg.delta;
    st.final_accepted = cfg.final_accepted;
    st.burn_in = cfg.burn_in;
    st.seed = cfg.chain_seed;
    st.stream = kChainStream;
    const ParameterVector start = cfg.start == "reference" ? truth : ParameterVector(Eigen::VectorXd::Zero(n));
    MlmcmcChains chains;
    {
        StageTimer t(manifest, "mlmcmc");
        chains = mlmcmc_screen(spec, [&](const ParameterVector& e, int top) { return fm.evaluate_levels(e, top); }, start, st);
    }
    MlmcmcSummary s;
    s.dims = cfg.chain_dims;
    s.sigma = spec.sigma;
    s.P = chains.P;
    s.rates = chains.acceptance_rates();
    s.iterations = chains.iterations;
    s.forward_calls = chains.forward_calls;
    s.start_error = chains.error_trace.front();
    s.estimate = mlmcmc_estimate(chains);
    s.observations = spec.observations;

    std::filesystem::create_directories(out_dir);
    {
        std::vector<std::string> h{"iteration", "stages_passed", "accepted"};
        for (int l = 0; l < L; ++l) h.push_back("log_post_" + std::to_string(l));
        for (int k = 0; k < n; ++k) h.push_back("eta_" + std::to_string(k));
        CsvWriter c(out_dir / "mlmcmc_chain.csv", h);
        for (const auto& r : chains.records) {
            std::vector<CsvWriter::Cell> row{r.iteration, r.stages_passed, r.accepted};
            for (double v : r.log_posterior) row.emplace_back(std::isnan(v) ? std::string("") : format_double(v));
            for (int k = 0; k < n; ++k) row.emplace_back(r.proposal[k]);
            c.row(row);
        }
    }
    {
        CsvWriter d(out_dir / "mlmcmc_diagnostics.csv", {"level", "N_l", "sigma_l", "P_in", "P_out", "acceptance_rate", "chain_accepts"});
        for (int l = 0; l < L; ++l) {
            const auto ul = static_cast<std::size_t>(l);
            d.row({l, cfg.chain_dims[ul], spec.sigma[ul], chains.P[ul], chains.P[ul + 1], s.rates[ul], chains.chain_accepts[ul]});
        }
    }
    {
        CsvWriter e(out_dir / "mlmcmc_error_trace.csv", {"iteration", "error"});
        for (std::size_t i = 0; i < chains.error_trace.size(); ++i) e.row({static_cast<long>(i), chains.error_trace[i]});
    }
    {
        std::vector<std::string> h{"point", "x", "y", "observed", "F0"};
        for (int l = 1; l < L; ++l) h.push_back("Q" + std::to_string(l));
        h.insert(h.end(), {"FL", "stderr"});
        CsvWriter e(out_dir / "mlmcmc_estimate.csv", h);
        for (int i = 0; i < spec.observations.size(); ++i) {
            std::vector<CsvWriter::Cell> row{i, cfg.points[static_cast<std::size_t>(i)][0], cfg.points[static_cast<std::size_t>(i)][1],
                                             spec.observations[i], s.estimate.F0[i]};
            for (const auto& q : s.estimate.Q) row.emplace_back(q[i]);
            row.emplace_back(s.estimate.FL[i]);
            row.emplace_back(s.estimate.stderr_FL[i]);
            e.row(row);
        }
    }
    {
        // Reference field and a few accepted finest-level fields spread over the run.
        const auto& acc = chains.finest_accepted;
        std::vector<std::size_t> picks;
        for (int k = 1; k <= 4 && !acc.empty(); ++k) picks.push_back(std::min(acc.size() - 1, k * acc.size() / 4 - (k == 4 ? 1 : 0)));
        std::vector<std::string> h{"node", "x", "y", "reference_logk"};
        for (std::size_t k = 0; k < picks.size(); ++k) h.push_back("accepted_" + std::to_string(picks[k]) + "_logk");
        CsvWriter f(out_dir / "mlmcmc_fields.csv", h);
        const Eigen::VectorXd ref = sample_log_permeability(p.kl, truth);
        std::vector<Eigen::VectorXd> snaps;
        for (auto k : picks) snaps.push_back(sample_log_permeability(p.kl, acc[k]));
        const auto& xy = p.grid.fine_coordinates();
        for (int i = 0; i < p.grid.num_fine_nodes(); ++i) {
            std::vector<CsvWriter::Cell> row{i, xy[i][0], xy[i][1], ref[i]};
            for (const auto& v : snaps) row.emplace_back(v[i]);
            f.row(row);
        }
    }
    for (const char* f : {"mlmcmc_chain.csv", "mlmcmc_diagnostics.csv", "mlmcmc_error_trace.csv", "mlmcmc_estimate.csv", "mlmcmc_fields.csv"})
        manifest.add_file(out_dir, out_dir / f);
    manifest.results["mlmcmc"] = {{"P", s.P},
                                  {"acceptance_rates", s.rates},
                                  {"sigma", s.sigma},
                                  {"iterations", s.iterations},
                                  {"forward_calls", s.forward_calls},
                                  {"rates_nondecreasing", s.rates_nondecreasing()}};
    std::string rs;
    for (double r : s.rates) rs += " " + format_double(r);
    log("acceptance rates:" + rs + " after " + std::to_string(s.iterations) + " iterations");
    return s;
}

/// Eigenvalue table and energy ratio of the truncated expansion.
inline double run_kle(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest) {
    const auto g = cfg.grid();
    StageTimer t(manifest, "kle");
    const KLModel kl = truncated_kle(g, cfg.covariance, cfg.kle_terms);
    const Eigen::VectorXd all = kle_spectrum(g, cfg.covariance);
    const double trace = kl.full_trace;
    CsvWriter c(out_dir / "kle_eigenvalues.csv", {"index", "mode_x", "mode_y", "eigenvalue", "cumulative_energy"});
    double cum = 0;
    for (int k = 0; k < kl.size(); ++k) {
        cum += kl.eigenvalues[k];
        c.row({k, kl.mode_indices[static_cast<std::size_t>(k)].first, kl.mode_indices[static_cast<std::size_t>(k)].second,
               kl.eigenvalues[k], trace > 0 ? cum / trace : 0.0});
    }
    manifest.add_file(out_dir, c.path());
    const double ratio = trace > 0 ? energy_ratio(kl, trace) : 1.0;
    manifest.results["kle"] = {{"energy_ratio", ratio}, {"terms", kl.size()}, {"spectrum_sum", all.sum()}, {"trace", trace}};
    return ratio;
}

/// Pressure at every GMsFEM level and the fine solution for one parameter vector.
inline void run_forward(const ExperimentConfig& cfg, const ParameterVector& eta, const std::filesystem::path& out_dir,
                        RunManifest& manifest, const LogFn& log) {
    const Problem p = prepare_problem(cfg, out_dir, manifest, log);
    const ForwardModel fm = make_forward(p, cfg.level_dims, QoiSpec::field());
    if (eta.size() != p.kl.size())
        throw ConfigError("parameter vector has " + std::to_string(eta.size()) + " entries, KLE order is " + std::to_string(p.kl.size()));
    StageTimer t(manifest, "forward");
    const auto levels = fm.pressure_levels(eta, fm.num_levels() - 1);
    const Eigen::VectorXd fine = fm.fine_pressure(eta);
    const Eigen::VectorXd logk = sample_log_permeability(p.kl, eta);
    const Eigen::VectorXd w = trapezoid_weights(p.grid);
    std::vector<std::string> h{"node", "x", "y", "log_k", "fine"};
    for (int d : cfg.level_dims) h.push_back("gmsfem_" + std::to_string(d));
    CsvWriter c(out_dir / "forward.csv", h);
    const auto& xy = p.grid.fine_coordinates();
    for (int i = 0; i < p.grid.num_fine_nodes(); ++i) {
        std::vector<CsvWriter::Cell> row{i, xy[i][0], xy[i][1], logk[i], fine[i]};
        for (const auto& v : levels) row.emplace_back(v[i]);
        c.row(row);
    }
    manifest.add_file(out_dir, c.path());
    nlohmann::json errs = nlohmann::json::array();
    for (const auto& v : levels) errs.push_back(relative_l2_error(v, fine, w));
    manifest.results["forward"] = {{"relative_l2_vs_fine", errs}};
}

/// Plain Monte Carlo mean of the pressure field at one level.
inline Eigen::VectorXd run_mc(const ExperimentConfig& cfg, int level, int samples, const std::filesystem::path& out_dir,
                              RunManifest& manifest, const LogFn& log) {
    const Problem p = prepare_problem(cfg, out_dir, manifest, log);
    const ForwardModel fm = make_forward(p, cfg.level_dims, QoiSpec::field());
    if (level < 0 || level >= fm.num_levels()) throw ConfigError("level must lie in [0, " + std::to_string(fm.num_levels() - 1) + "]");
    StageTimer t(manifest, "mc");
    const auto r = mc_estimate([&](const ParameterVector& e) { return fm.evaluate(e, level); }, samples,
                               {cfg.mlmc_seed, kMcStream, p.kl.size()}, cfg.workers);
    CsvWriter c(out_dir / "mc_mean.csv", {"node", "x", "y", "mean", "variance"});
    const auto var = r.stats.variance();
    const auto& xy = p.grid.fine_coordinates();
    for (int i = 0; i < p.grid.num_fine_nodes(); ++i) c.row({i, xy[i][0], xy[i][1], r.mean()[i], var[i]});
    manifest.add_file(out_dir, c.path());
    return r.mean();
}

/// One-parameter diagnostic problem: the posterior of F(eta) = exp(eta / 2) + c_l sin(2 eta)
/// tabulated on 101 points next to single-level and multilevel chain histograms.
inline void run_toy(std::uint64_t seed, long steps, const std::filesystem::path& out_dir, RunManifest& manifest) {
    const std::vector<double> c{0.3, 0.1, 0.0};
    auto value = [&](double e, int l) { return std::exp(0.5 * e) + c[static_cast<std::size_t>(l)] * std::sin(2.0 * e); };
    auto fwd = [&](const ParameterVector& e, int top) {
        std::vector<Eigen::VectorXd> out;
        for (int l = 0; l <= top; ++l) out.push_back(Eigen::VectorXd::Constant(1, value(e[0], l)));
        return out;
    };
    PosteriorSpec spec;
    spec.observations = Eigen::VectorXd::Constant(1, value(0.8, 2));
    spec.sigma = sigma_schedule(0.2, 3, SigmaSchedule::Geometric);
    StageTimer t(manifest, "toy");
    MhSettings mh;
    mh.proposal.delta = 0.5;
    mh.steps = steps;
    mh.seed = seed;
    const auto chain = metropolis_hastings(
        [&](const ParameterVector& e) { return log_posterior(spec, 2, e, Eigen::VectorXd::Constant(1, value(e[0], 2))); },
        Eigen::VectorXd::Zero(1), mh);
    MlmcmcSettings ms;
    ms.proposal.delta = 0.5;
    ms.final_accepted = std::max<long>(steps / 4, 2);
    ms.burn_in = ms.final_accepted / 20;
    ms.seed = seed;
    ms.keep_records = false;
    const auto ml = mlmcmc_screen(spec, fwd, Eigen::VectorXd::Zero(1), ms);
    std::vector<double> h_mh(101, 0.0), h_ml(101, 0.0), dens(101, 0.0);
    double z = 0;
    for (int i = 0; i <= 100; ++i) {
        const double e = -4.0 + 0.08 * i;
        dens[static_cast<std::size_t>(i)] = std::exp(log_posterior(spec, 2, Eigen::VectorXd::Constant(1, e), Eigen::VectorXd::Constant(1, value(e, 2))));
        z += dens[static_cast<std::size_t>(i)];
    }
    auto bin = [](double e) { return std::lround((e + 4.0) / 0.08); };
    for (const auto& s : chain.states)
        if (const long b = bin(s[0]); b >= 0 && b <= 100) h_mh[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(chain.states.size());
    // Stores hold QoI values, not states, so the multilevel histogram is built from accepted states.
    for (const auto& s : ml.finest_accepted)
        if (const long b = bin(s[0]); b >= 0 && b <= 100) h_ml[static_cast<std::size_t>(b)] += 1.0 / static_cast<double>(ml.finest_accepted.size());
    CsvWriter out(out_dir / "toy_posterior.csv", {"eta", "quadrature", "mh_histogram", "mlmcmc_accepted_histogram"});
    for (int i = 0; i <= 100; ++i)
        out.row({-4.0 + 0.08 * i, dens[static_cast<std::size_t>(i)] / z, h_mh[static_cast<std::size_t>(i)], h_ml[static_cast<std::size_t>(i)]});
    manifest.add_file(out_dir, out.path());
    manifest.results["toy"] = {{"mh_acceptance", chain.acceptance_rate()}, {"mlmcmc_rates", ml.acceptance_rates()}};
}

} // namespace mlgms
