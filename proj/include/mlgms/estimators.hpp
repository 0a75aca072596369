#pragma once

// Plain and multilevel Monte Carlo estimators over the Gaussian prior.
//
// Sample m of any estimator uses the parameter vector prior_draw(seed, stream, m),
// so the draw for index m is the same at every level. Samples are evaluated
// in blocks; each block is reduced with pairwise sums and blocks are merged in
// index order, which makes every result independent of the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlgms/errors.hpp"
#include "mlgms/grid.hpp"
#include "mlgms/parallel.hpp"
#include "mlgms/randfield.hpp"
#include "mlgms/rng.hpp"

namespace mlgms {

/// Addresses the prior draws of one estimator.
struct SampleSource {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    int dim = 1;

    ParameterVector draw(std::uint64_t index) const { return prior_draw(seed, stream, index, dim); }
};

/// Mean and centered second moment of vector samples.
struct SampleStats {
    long count = 0;
    Eigen::VectorXd mean;
    Eigen::VectorXd m2;  // sum of squared deviations per component

    Eigen::VectorXd variance() const {
        if (count < 2) return Eigen::VectorXd::Zero(mean.size());
        return m2 / static_cast<double>(count - 1);
    }
    /// Sum of component variances, i.e. E||Y - E Y||^2 in the Euclidean norm.
    double total_variance() const { return count < 2 ? 0.0 : m2.sum() / static_cast<double>(count - 1); }

    /// Two-pass statistics of a block with pairwise summation.
    static SampleStats of(const std::vector<Eigen::VectorXd>& xs) {
        SampleStats s;
        s.count = static_cast<long>(xs.size());
        if (xs.empty()) return s;
        s.mean = pairwise_sum(xs, 0, xs.size(), [](const Eigen::VectorXd& v) { return v; }) / static_cast<double>(xs.size());
        const Eigen::VectorXd mu = s.mean;
        s.m2 = pairwise_sum(xs, 0, xs.size(), [&mu](const Eigen::VectorXd& v) { return Eigen::VectorXd((v - mu).cwiseAbs2()); });
        return s;
    }

    /// Chan et al. parallel update.
    void merge(const SampleStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(count + o.count);
        const Eigen::VectorXd d = o.mean - mean;
        mean += d * (static_cast<double>(o.count) / n);
        m2 += o.m2 + d.cwiseAbs2() * (static_cast<double>(count) * static_cast<double>(o.count) / n);
        count += o.count;
    }

private:
    template <class Map>
    static Eigen::VectorXd pairwise_sum(const std::vector<Eigen::VectorXd>& xs, std::size_t lo, std::size_t hi, const Map& f) {
        if (hi - lo == 1) return f(xs[lo]);
        const std::size_t mid = lo + (hi - lo) / 2;
        return pairwise_sum(xs, lo, mid, f) + pairwise_sum(xs, mid, hi, f);
    }
};

constexpr int kReductionBlock = 64;

/// Evaluates fn(m) for m in [first, last) in blocks and folds each block's
/// results with `consume(m, value)` in index order.
template <class Eval, class Consume>
void blocked_map(int first, int last, int workers, Eval&& eval, Consume&& consume) {
    using Value = decltype(eval(0));
    for (int b = first; b < last; b += kReductionBlock) {
        const int n = std::min(kReductionBlock, last - b);
        std::vector<Value> out(static_cast<std::size_t>(n));
        parallel_for(n, workers, [&](int i) { out[static_cast<std::size_t>(i)] = eval(b + i); });
        for (int i = 0; i < n; ++i) consume(b + i, std::move(out[static_cast<std::size_t>(i)]));
    }
}

struct McResult {
    SampleStats stats;
    Eigen::VectorXd mean() const { return stats.mean; }
};

/// Arithmetic mean of qoi(eta_m) over M prior draws. `qoi` maps a parameter
/// vector to a QoI vector.
template <class Qoi>
McResult mc_estimate(Qoi&& qoi, int M, const SampleSource& src, int workers = 1) {
    if (M < 1) throw ConfigError("Monte Carlo sample count must be >= 1");
    McResult r;
    std::vector<Eigen::VectorXd> block;
    blocked_map(
        0, M, workers,
        [&](int m) {
            try {
                return Eigen::VectorXd(qoi(src.draw(static_cast<std::uint64_t>(m))));
            } catch (const std::exception& e) {
                throw NumericalError("sample failed (seed " + std::to_string(src.seed) + ", stream " +
                                     std::to_string(src.stream) + ", index " + std::to_string(m) + "): " + e.what());
            }
        },
        [&](int m, Eigen::VectorXd v) {
            block.push_back(std::move(v));
            if (static_cast<int>(block.size()) == kReductionBlock || m == M - 1) {
                r.stats.merge(SampleStats::of(block));
                block.clear();
            }
        });
    return r;
}

/// Online dimensions and sample counts per level (index 0 is the coarsest).
struct LevelPlan {
    std::vector<int> dims;
    std::vector<int> samples;

    int levels() const { return static_cast<int>(dims.size()); }

    void validate() const {
        if (dims.empty()) throw ConfigError("level plan needs at least one level");
        if (dims.size() != samples.size())
            throw ConfigError("level plan has " + std::to_string(dims.size()) + " dimensions but " +
                              std::to_string(samples.size()) + " sample counts");
        for (std::size_t l = 0; l < dims.size(); ++l) {
            if (dims[l] < 1) throw ConfigError("level dimensions must be >= 1");
            if (samples[l] < 1) throw ConfigError("level sample counts must be >= 1");
            if (l > 0 && dims[l] <= dims[l - 1]) throw ConfigError("level dimensions must be strictly increasing");
            if (l > 0 && samples[l] > samples[l - 1]) throw ConfigError("level sample counts must be nonincreasing");
        }
    }

    /// Cost of one level-l correction sample in units of N_l^2.
    double cost_units(int l) const { return static_cast<double>(dims[l]) * dims[l]; }
};

struct LevelEstimate {
    struct Level {
        int dim = 0;
        int samples = 0;
        SampleStats correction;  // statistics of X_l - X_{l-1}
        double cost_units = 0.0;
    };
    std::vector<Level> levels;
    Eigen::VectorXd estimate;  // sum of level means

    Eigen::VectorXd level_sum() const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(levels.empty() ? 0 : levels.front().correction.mean.size());
        for (const auto& l : levels) s += l.correction.mean;
        return s;
    }
};

/// Multilevel estimate. `forward(eta, max_level)` returns the QoI at levels
/// 0..max_level for one parameter vector. Sample m is shared by every level
/// l with m < M_l, and each draw is evaluated once at its highest level.
template <class Forward>
LevelEstimate mlmc_estimate(const LevelPlan& plan, Forward&& forward, const SampleSource& src, int workers = 1) {
    plan.validate();
    const int L = plan.levels();
    LevelEstimate est;
    est.levels.resize(static_cast<std::size_t>(L));
    std::vector<std::vector<Eigen::VectorXd>> blocks(static_cast<std::size_t>(L));
    auto top_level = [&](int m) {
        int top = 0;
        while (top + 1 < L && m < plan.samples[static_cast<std::size_t>(top + 1)]) ++top;
        return top;
    };
    const int M0 = plan.samples[0];
    blocked_map(
        0, M0, workers,
        [&](int m) {
            const int top = top_level(m);
            std::vector<Eigen::VectorXd> x;
            try {
                x = forward(src.draw(static_cast<std::uint64_t>(m)), top);
            } catch (const std::exception& e) {
                throw NumericalError("sample failed (seed " + std::to_string(src.seed) + ", stream " +
                                     std::to_string(src.stream) + ", index " + std::to_string(m) + ", level " +
                                     std::to_string(top) + "): " + e.what());
            }
            if (static_cast<int>(x.size()) != top + 1) throw ConfigError("forward returned the wrong number of levels");
            return x;
        },
        [&](int m, std::vector<Eigen::VectorXd> x) {
            for (int l = 0; l < static_cast<int>(x.size()); ++l) {
                auto& b = blocks[static_cast<std::size_t>(l)];
                b.push_back(l == 0 ? x[0] : Eigen::VectorXd(x[l] - x[l - 1]));
                const int ml = plan.samples[static_cast<std::size_t>(l)];
                if (static_cast<int>(b.size()) == kReductionBlock || m == ml - 1) {
                    est.levels[static_cast<std::size_t>(l)].correction.merge(SampleStats::of(b));
                    b.clear();
                }
            }
        });
    for (int l = 0; l < L; ++l) {
        auto& lv = est.levels[static_cast<std::size_t>(l)];
        lv.dim = plan.dims[static_cast<std::size_t>(l)];
        lv.samples = plan.samples[static_cast<std::size_t>(l)];
        lv.cost_units = plan.cost_units(l) * lv.samples;
    }
    est.estimate = est.level_sum();
    return est;
}

/// Number of finest-level samples with the same cost as the plan, with cost
/// per sample proportional to N_l^2.
inline int cost_matched_mc_samples(const LevelPlan& plan) {
    plan.validate();
    double total = 0;
    for (int l = 0; l < plan.levels(); ++l) total += plan.cost_units(l) * plan.samples[static_cast<std::size_t>(l)];
    return static_cast<int>(std::llround(total / plan.cost_units(plan.levels() - 1)));
}

/// Sample counts that equalize the terms of the multilevel error bound:
/// M_1 = M E[X^2] / delta_L^2 and M_l = M (delta_{l-1} / delta_L)^2 for l >= 2,
/// rounded up and made nonincreasing. Equal neighbouring deltas are accepted
/// with a warning; increasing deltas are rejected.
inline std::vector<int> allocate_samples(const std::vector<double>& delta, int M, double e_x2,
                                         std::vector<std::string>* warnings = nullptr) {
    if (delta.empty()) throw ConfigError("allocate_samples needs at least one delta");
    if (M < 1) throw ConfigError("allocate_samples needs M >= 1");
    if (!(e_x2 >= 0.0)) throw ConfigError("E[X^2] must be >= 0");
    for (std::size_t l = 0; l < delta.size(); ++l) {
        if (!(delta[l] > 0.0)) throw ConfigError("deltas must be positive");
        if (l > 0 && delta[l] > delta[l - 1])
            throw ConfigError("deltas must be nonincreasing; delta[" + std::to_string(l) + "] > delta[" +
                              std::to_string(l - 1) + "]");
        if (l > 0 && delta[l] == delta[l - 1] && warnings)
            warnings->push_back("delta[" + std::to_string(l) + "] equals delta[" + std::to_string(l - 1) +
                                "]; levels are not separated");
    }
    const std::size_t L = delta.size();
    const double dl = delta.back();
    // Values that are integers up to round-off must not round up to the next one.
    auto up = [](double x) { return static_cast<int>(std::ceil(x * (1.0 - 1e-12))); };
    std::vector<int> m(L);
    m[0] = up(M * e_x2 / (dl * dl));
    for (std::size_t l = 1; l < L; ++l) {
        const double r = delta[l - 1] / dl;
        m[l] = up(M * r * r);
    }
    m[L - 1] = std::max(m[L - 1], 1);
    for (std::size_t l = L - 1; l-- > 0;) m[l] = std::max(m[l], m[l + 1]);
    return m;
}

/// ||est - ref||_{L2(D)} / ||ref||_{L2(D)} with nodal quadrature weights.
inline double relative_l2_error(const Eigen::VectorXd& est, const Eigen::VectorXd& ref, const Eigen::VectorXd& weights) {
    if (est.size() != ref.size() || ref.size() != weights.size())
        throw ConfigError("relative_l2_error: fields and weights must have the same length");
    const double den = (weights.array() * ref.array().square()).sum();
    if (!(den > 0.0)) throw DomainError("relative_l2_error: reference field has zero norm");
    return std::sqrt((weights.array() * (est - ref).array().square()).sum() / den);
}

inline double relative_l2_error(const StructuredGridPair& g, const Eigen::VectorXd& est, const Eigen::VectorXd& ref) {
    return relative_l2_error(est, ref, trapezoid_weights(g));
}

} // namespace mlgms
