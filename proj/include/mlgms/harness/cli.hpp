#pragma once

// Command-line front end. Exit codes: 0 success, 2 configuration, domain,
// usage or integrity errors, 3 numerical and other failures.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mlgms/harness/experiments.hpp"

namespace mlgms {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CliOptions {
    std::string config;
    long long seed = -1;
    int workers = 0;
    std::string out;
    bool rebuild = false;
    std::vector<double> eta;
    long long draw = -1;
    int level = -1;
    int samples = 0;
    int replicates = 0;
    long toy_steps = 20000;
};

inline ExperimentConfig resolve_config(const CliOptions& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed >= 0) {
        cfg.mlmc_seed = static_cast<std::uint64_t>(o.seed);
        cfg.chain_seed = static_cast<std::uint64_t>(o.seed);
    }
    if (o.workers > 0) cfg.workers = o.workers;
    if (!o.out.empty()) cfg.out = o.out;
    cfg.validate();
    return cfg;
}

inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Multilevel GMsFEM sampling for log-normal Darcy flow"};
    app.require_subcommand(1);
    app.fallthrough();
    CliOptions o;
    app.add_option("-c,--config", o.config, "INI experiment configuration");
    app.add_option("--seed", o.seed, "override the MLMC and chain seeds");
    app.add_option("--workers", o.workers, "worker threads");
    app.add_option("-o,--out", o.out, "output directory");

    auto* kle = app.add_subcommand("kle", "KLE eigenvalues and captured energy");
    auto* offline = app.add_subcommand("offline", "build (or verify) the cached offline space");
    offline->add_flag("--rebuild", o.rebuild, "ignore an existing cache");
    auto* forward = app.add_subcommand("forward", "pressure at every GMsFEM level and on the fine grid");
    forward->add_option("--eta", o.eta, "KLE coefficients")->delimiter(',');
    forward->add_option("--draw", o.draw, "use prior draw with this index instead of --eta");
    auto* mc = app.add_subcommand("mc", "Monte Carlo mean at one level");
    mc->add_option("--level", o.level, "level index (default: finest)");
    mc->add_option("--samples", o.samples, "sample count")->required();
    auto* mlmc = app.add_subcommand("mlmc", "one multilevel Monte Carlo estimate of the mean pressure");
    auto* table1 = app.add_subcommand("table1", "MLMC against cost-matched MC over replicates");
    table1->add_option("--replicates", o.replicates, "override the replicate count");
    auto* mlmcmc = app.add_subcommand("mlmcmc", "multilevel MCMC with GMsFEM screening");
    auto* toy = app.add_subcommand("toy", "one-parameter posterior against quadrature");
    toy->add_option("--steps", o.toy_steps, "MH iterations");
    auto* verify = app.add_subcommand("verify-manifest", "recheck the files listed in <out>/manifest.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const LogFn log = [&err](const std::string& m) { err << "[mlgms] " << m << '\n'; };
    try {
        if (verify->parsed()) {
            std::filesystem::path dir = o.out;
            if (dir.empty()) dir = o.config.empty() ? std::filesystem::path("results") : std::filesystem::path(load_config(o.config).out);
            const auto bad = verify_manifest(dir);
            for (const auto& b : bad) err << "mismatch: " << b << '\n';
            if (!bad.empty()) throw IntegrityError(std::to_string(bad.size()) + " file(s) differ from the manifest");
            out << "manifest ok\n";
            return kExitOk;
        }
        const ExperimentConfig cfg = resolve_config(o);
        const std::filesystem::path dir(cfg.out);
        std::filesystem::create_directories(dir);
        RunManifest manifest;
        manifest.config_hash = detail::hex64(config_hash(cfg));
        manifest.config_path = o.config;
        for (int i = 0; i < argc; ++i) manifest.command += (i ? " " : "") + std::string(argv[i]);

        if (kle->parsed()) {
            const double r = run_kle(cfg, dir, manifest);
            out << "energy ratio " << format_double(r) << '\n';
        } else if (offline->parsed()) {
            const Problem p = prepare_problem(cfg, dir, manifest, log, o.rebuild);
            manifest.results["offline"] = {{"cache", p.cache_path.string()},
                                           {"loaded", p.loaded_from_cache},
                                           {"min_dimension", p.offline.min_dimension()},
                                           {"warnings", p.offline.warnings}};
            out << "offline space: " << p.cache_path.string() << " (min dimension " << p.offline.min_dimension() << ")\n";
        } else if (forward->parsed()) {
            const int n = cfg.kle_terms;
            ParameterVector eta = Eigen::VectorXd::Zero(n);
            if (o.draw >= 0)
                eta = prior_draw(cfg.mlmc_seed, kReferenceStream, static_cast<std::uint64_t>(o.draw), n);
            else if (!o.eta.empty())
                eta = Eigen::Map<const Eigen::VectorXd>(o.eta.data(), static_cast<Eigen::Index>(o.eta.size()));
            run_forward(cfg, eta, dir, manifest, log);
            out << "forward.csv written\n";
        } else if (mc->parsed()) {
            const int level = o.level >= 0 ? o.level : static_cast<int>(cfg.level_dims.size()) - 1;
            run_mc(cfg, level, o.samples, dir, manifest, log);
            out << "mc_mean.csv written\n";
        } else if (mlmc->parsed()) {
            const Problem p = prepare_problem(cfg, dir, manifest, log);
            const ForwardModel fm = make_forward(p, cfg.level_dims, QoiSpec::field());
            StageTimer t(manifest, "mlmc");
            const auto est = mlmc_estimate(
                cfg.plan(), [&](const ParameterVector& e, int top) { return fm.evaluate_levels(e, top); },
                {cfg.mlmc_seed, kMlmcStream, p.kl.size()}, cfg.workers);
            CsvWriter c(dir / "mlmc_mean.csv", {"node", "x", "y", "mean"});
            const auto& xy = p.grid.fine_coordinates();
            for (int i = 0; i < p.grid.num_fine_nodes(); ++i) c.row({i, xy[i][0], xy[i][1], est.estimate[i]});
            manifest.add_file(dir, c.path());
            out << "mlmc_mean.csv written\n";
        } else if (table1->parsed()) {
            const auto s = run_table1(cfg, dir, manifest, log, o.replicates);
            out << "ratio " << format_double(s.ratio_mean) << " +- " << format_double(s.ratio_stderr) << " over "
                << s.replicates.size() << " replicates (M_hat " << s.m_hat << ")\n";
        } else if (mlmcmc->parsed()) {
            const auto s = run_mlmcmc_experiment(cfg, dir, manifest, log);
            out << "acceptance rates";
            for (double r : s.rates) out << ' ' << format_double(r);
            out << (s.rates_nondecreasing() ? " (nondecreasing)" : " (not monotone)") << '\n';
        } else if (toy->parsed()) {
            run_toy(cfg.chain_seed, o.toy_steps, dir, manifest);
            out << "toy_posterior.csv written\n";
        }
        manifest.write(dir);
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IntegrityError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace mlgms
