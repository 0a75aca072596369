#pragma once

// Experiment configuration: a flat INI file with sections. Every key has a
// default; unknown sections or keys are rejected so typos do not pass silently.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mlgms/errors.hpp"
#include "mlgms/estimators.hpp"
#include "mlgms/gmsfem.hpp"
#include "mlgms/samplers.hpp"

namespace mlgms {

struct ExperimentConfig {
    std::string name = "experiment";

    // [grid]
    int fine_nx = 50, fine_ny = 50, coarse_nx = 5, coarse_ny = 5;

    // [covariance]
    CovarianceSpec covariance{2.0, 0.1, 0.1};
    int kle_terms = 5;

    // [offline]
    OfflineSettings offline;
    std::string cache;  // empty: <out>/offline-<key>.bin

    // [problem]
    double source = 1.0;
    std::string boundary = "linear_x1";

    // [mlmc]
    std::vector<int> level_dims{4, 8, 16};
    std::vector<int> level_samples{128, 32, 8};
    int reference_samples = 5000;
    int replicates = 10;
    std::uint64_t mlmc_seed = 1;

    // [mlmcmc]
    std::vector<int> chain_dims{4, 8, 16};
    double delta = 0.2;
    long final_accepted = 1000;
    long burn_in = 300;
    double sigma_f = 0.0;  // 0: 0.05 ||F_obs|| / sqrt(#points)
    SigmaSchedule sigma_schedule = SigmaSchedule::HalvingPrecision;
    std::vector<Point> points = default_measurement_points();
    std::string reference = "prior";  // prior | zero
    std::uint64_t reference_seed = 11;
    double noise = 0.0;               // relative std of additive observation noise
    std::uint64_t chain_seed = 5;
    std::string start = "zero";       // zero | reference

    // [run]
    int workers = 1;
    std::string out = "results";

    std::filesystem::path source_path;  // file the config was read from, if any

    StructuredGridPair grid() const { return build_grids(fine_nx, fine_ny, coarse_nx, coarse_ny); }
    LevelPlan plan() const { return {level_dims, level_samples}; }

    BoundarySpec boundary_spec() const {
        if (boundary == "linear_x1") return BoundarySpec::linear_x1();
        if (boundary == "zero") return BoundarySpec::homogeneous();
        throw ConfigError("unknown boundary '" + boundary + "' (expected linear_x1 or zero)");
    }

    void validate() const {
        if (fine_nx < 1 || fine_ny < 1 || coarse_nx < 1 || coarse_ny < 1) throw ConfigError("grid sizes must be positive");
        if (fine_nx % coarse_nx != 0 || fine_ny % coarse_ny != 0)
            throw ConfigError("fine grid must refine the coarse grid evenly");
        if (covariance.sigma2 < 0 || !(covariance.l1 > 0) || !(covariance.l2 > 0))
            throw ConfigError("covariance needs sigma2 >= 0 and positive correlation lengths");
        if (kle_terms < 1) throw ConfigError("kle_terms must be >= 1");
        if (offline.samples < 1 || offline.per_sample < 1 || offline.dimension < 1)
            throw ConfigError("offline samples, per_sample and dimension must be >= 1");
        plan().validate();
        if (level_dims.back() > offline.dimension) throw ConfigError("mlmc dims exceed the offline dimension");
        if (reference_samples < 1) throw ConfigError("reference_samples must be >= 1");
        if (replicates < 1) throw ConfigError("replicates must be >= 1");
        LevelPlan({chain_dims, std::vector<int>(chain_dims.size(), 1)}).validate();
        if (chain_dims.back() > offline.dimension) throw ConfigError("mlmcmc dims exceed the offline dimension");
        ProposalSpec{delta}.validate();
        if (final_accepted < 1 || burn_in < 0 || burn_in >= final_accepted)
            throw ConfigError("mlmcmc needs final_accepted >= 1 and 0 <= burn_in < final_accepted");
        if (sigma_f < 0) throw ConfigError("sigma_f must be >= 0 (0 selects the default)");
        if (points.empty()) throw ConfigError("mlmcmc needs at least one measurement point");
        for (const auto& p : points)
            if (!(p[0] > 0 && p[0] < 1 && p[1] > 0 && p[1] < 1))
                throw ConfigError("measurement points must lie strictly inside the unit square");
        if (reference != "prior" && reference != "zero") throw ConfigError("reference must be prior or zero");
        if (start != "zero" && start != "reference") throw ConfigError("start must be zero or reference");
        if (noise < 0) throw ConfigError("noise must be >= 0");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        boundary_spec();
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string::npos) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    T v{};
    is >> v;
    if (is.fail() || !(is >> std::ws).eof()) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const auto& tok : split(text, " ,\t")) out.push_back(parse_number<T>(key, tok));
    if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
    return out;
}

inline std::vector<Point> parse_points(const std::string& key, const std::string& text) {
    std::vector<Point> out;
    for (const auto& pair : split(text, ";")) {
        const auto xy = parse_list<double>(key, pair);
        if (xy.size() != 2) throw ConfigError("config key '" + key + "': each point needs two coordinates");
        out.push_back({xy[0], xy[1]});
    }
    if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
    return out;
}

inline std::string points_text(const std::vector<Point>& pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? "; " : "") + fmt_double(pts[i][0]) + " " + fmt_double(pts[i][1]);
    return s;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 15];
    return s;
}

} // namespace detail

/// key = value lines, sorted by section, with every field spelled out.
inline std::string canonical_text(const ExperimentConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    o << "[experiment]\nname = " << c.name << "\n";
    o << "[grid]\nfine_nx = " << c.fine_nx << "\nfine_ny = " << c.fine_ny << "\ncoarse_nx = " << c.coarse_nx
      << "\ncoarse_ny = " << c.coarse_ny << "\n";
    o << "[covariance]\nsigma2 = " << fmt_double(c.covariance.sigma2) << "\nl1 = " << fmt_double(c.covariance.l1)
      << "\nl2 = " << fmt_double(c.covariance.l2) << "\nkle_terms = " << c.kle_terms << "\n";
    o << "[offline]\nsamples = " << c.offline.samples << "\nper_sample = " << c.offline.per_sample
      << "\ndimension = " << c.offline.dimension << "\nseed = " << c.offline.seed << "\nstream = " << c.offline.stream
      << "\ncache = " << c.cache << "\n";
    o << "[problem]\nsource = " << fmt_double(c.source) << "\nboundary = " << c.boundary << "\n";
    o << "[mlmc]\ndims = " << detail::join(c.level_dims) << "\nsamples = " << detail::join(c.level_samples)
      << "\nreference_samples = " << c.reference_samples << "\nreplicates = " << c.replicates
      << "\nseed = " << c.mlmc_seed << "\n";
    o << "[mlmcmc]\ndims = " << detail::join(c.chain_dims) << "\ndelta = " << fmt_double(c.delta)
      << "\nfinal_accepted = " << c.final_accepted << "\nburn_in = " << c.burn_in << "\nsigma_f = " << fmt_double(c.sigma_f)
      << "\nsigma_schedule = " << to_string(c.sigma_schedule) << "\npoints = " << detail::points_text(c.points)
      << "\nreference = " << c.reference << "\nreference_seed = " << c.reference_seed << "\nnoise = " << fmt_double(c.noise)
      << "\nseed = " << c.chain_seed << "\nstart = " << c.start << "\n";
    o << "[run]\nworkers = " << c.workers << "\nout = " << c.out << "\n";
    return o.str();
}

inline std::uint64_t config_hash(const ExperimentConfig& c) { return detail::fnv1a(canonical_text(c)); }

/// Fingerprint of everything the offline space depends on.
inline std::uint64_t offline_key(const ExperimentConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    o << c.fine_nx << ' ' << c.fine_ny << ' ' << c.coarse_nx << ' ' << c.coarse_ny << '|' << fmt_double(c.covariance.sigma2)
      << ' ' << fmt_double(c.covariance.l1) << ' ' << fmt_double(c.covariance.l2) << ' ' << c.kle_terms << '|'
      << c.offline.samples << ' ' << c.offline.per_sample << ' ' << c.offline.dimension << ' ' << c.offline.seed << ' '
      << c.offline.stream;
    return detail::fnv1a(o.str());
}

inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& origin = {}) {
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config " + origin.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    ExperimentConfig c;
    c.source_path = origin;
    using namespace detail;
    for (const auto& [section, body] : pt) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
        for (const auto& [key, node] : body) {
            const std::string k = section + "." + key;
            const std::string v = node.data();
            if (k == "experiment.name") c.name = v;
            else if (k == "grid.fine_nx") c.fine_nx = parse_number<int>(k, v);
            else if (k == "grid.fine_ny") c.fine_ny = parse_number<int>(k, v);
            else if (k == "grid.coarse_nx") c.coarse_nx = parse_number<int>(k, v);
            else if (k == "grid.coarse_ny") c.coarse_ny = parse_number<int>(k, v);
            else if (k == "covariance.sigma2") c.covariance.sigma2 = parse_number<double>(k, v);
            else if (k == "covariance.l1") c.covariance.l1 = parse_number<double>(k, v);
            else if (k == "covariance.l2") c.covariance.l2 = parse_number<double>(k, v);
            else if (k == "covariance.kle_terms") c.kle_terms = parse_number<int>(k, v);
            else if (k == "offline.samples") c.offline.samples = parse_number<int>(k, v);
            else if (k == "offline.per_sample") c.offline.per_sample = parse_number<int>(k, v);
            else if (k == "offline.dimension") c.offline.dimension = parse_number<int>(k, v);
            else if (k == "offline.seed") c.offline.seed = parse_number<std::uint64_t>(k, v);
            else if (k == "offline.stream") c.offline.stream = parse_number<std::uint64_t>(k, v);
            else if (k == "offline.cache") c.cache = v;
            else if (k == "problem.source") c.source = parse_number<double>(k, v);
            else if (k == "problem.boundary") c.boundary = v;
            else if (k == "mlmc.dims") c.level_dims = parse_list<int>(k, v);
            else if (k == "mlmc.samples") c.level_samples = parse_list<int>(k, v);
            else if (k == "mlmc.reference_samples") c.reference_samples = parse_number<int>(k, v);
            else if (k == "mlmc.replicates") c.replicates = parse_number<int>(k, v);
            else if (k == "mlmc.seed") c.mlmc_seed = parse_number<std::uint64_t>(k, v);
            else if (k == "mlmcmc.dims") c.chain_dims = parse_list<int>(k, v);
            else if (k == "mlmcmc.delta") c.delta = parse_number<double>(k, v);
            else if (k == "mlmcmc.final_accepted") c.final_accepted = parse_number<long>(k, v);
            else if (k == "mlmcmc.burn_in") c.burn_in = parse_number<long>(k, v);
            else if (k == "mlmcmc.sigma_f") c.sigma_f = parse_number<double>(k, v);
            else if (k == "mlmcmc.sigma_schedule") c.sigma_schedule = parse_sigma_schedule(v);
            else if (k == "mlmcmc.points") c.points = parse_points(k, v);
            else if (k == "mlmcmc.reference") c.reference = v;
            else if (k == "mlmcmc.reference_seed") c.reference_seed = parse_number<std::uint64_t>(k, v);
            else if (k == "mlmcmc.noise") c.noise = parse_number<double>(k, v);
            else if (k == "mlmcmc.seed") c.chain_seed = parse_number<std::uint64_t>(k, v);
            else if (k == "mlmcmc.start") c.start = v;
            else if (k == "run.workers") c.workers = parse_number<int>(k, v);
            else if (k == "run.out") c.out = v;
            else throw ConfigError("unknown config key '" + k + "'" + (origin.empty() ? "" : " in " + origin.string()));
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace mlgms
