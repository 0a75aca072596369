#pragma once

// Counter-based random substreams.
//
// Every draw is addressed by (seed, stream, index). The engine for one address
// is std::mt19937_64 seeded by a SplitMix64 mix of the key, and normals come
// from an explicit Box-Muller transform, so results do not depend on the
// standard library's distribution implementations or on evaluation order.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace mlgms {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(stream ^ splitmix64(index)));
}

/// Sequential generator of uniforms and standard normals.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t index = 0)
        : engine_(stream_key(seed, stream, index)) {}

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    Eigen::VectorXd normal_vector(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Standard-normal parameter vector for sample `index` of a given stream.
inline Eigen::VectorXd prior_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int n) {
    RandomStream rs(seed, stream, index);
    return rs.normal_vector(n);
}

} // namespace mlgms
