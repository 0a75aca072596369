#pragma once

// Offline-space cache.
//
// Layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   "MLGMSOFF" | u32 version | u32 section count
//   per section: 4-byte tag | u64 payload length | payload | u32 crc32(payload)
// Sections: HEAD (key and settings), PARM (snapshot parameters), one LOCL per
// neighborhood (basis, eigenvalues, rank, orthogonality) and WARN.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "mlgms/errors.hpp"
#include "mlgms/gmsfem.hpp"

namespace mlgms {

constexpr char kCacheMagic[8] = {'M', 'L', 'G', 'M', 'S', 'O', 'F', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

inline std::uint32_t crc32_of(const void* data, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    const auto* p = static_cast<const Bytef*>(data);
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = crc32(c, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

namespace cache_io {

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void matrix(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
    }
    void vector(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    const std::vector<unsigned char>& bytes() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const unsigned char* p, std::size_t n, std::string where) : p_(p), n_(n), where_(std::move(where)) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(p_ + off_), n);
        off_ += n;
        return s;
    }
    Eigen::MatrixXd matrix() {
        const std::uint64_t r = u64(), c = u64();
        need(r * c * 8);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = f64();
        return m;
    }
    Eigen::VectorXd vector() {
        const std::uint64_t n = u64();
        need(n * 8);
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    bool done() const { return off_ == n_; }

private:
    void need(std::uint64_t k) const {
        if (k > n_ - off_) throw IntegrityError("offline cache: section " + where_ + " is truncated");
    }
    std::uint64_t get(int k) {
        need(static_cast<std::uint64_t>(k));
        std::uint64_t v = 0;
        for (int i = 0; i < k; ++i) v |= static_cast<std::uint64_t>(p_[off_ + static_cast<std::size_t>(i)]) << (8 * i);
        off_ += static_cast<std::size_t>(k);
        return v;
    }
    const unsigned char* p_;
    std::size_t n_;
    std::size_t off_ = 0;
    std::string where_;
};

} // namespace cache_io

/// Identity of the cached space, checked on load.
struct CacheHeader {
    std::uint64_t key = 0;       // offline_key of the configuration
    std::uint64_t grid_hash = 0;
    int kle_terms = 0;
    OfflineSettings settings;
    int neighborhoods = 0;
};

inline std::vector<unsigned char> serialize_offline(const CacheHeader& h, const OfflineSpace& off) {
    std::vector<std::pair<std::string, cache_io::Writer>> sections;
    {
        cache_io::Writer w;
        w.u64(h.key);
        w.u64(h.grid_hash);
        w.i32(h.kle_terms);
        w.i32(off.settings.samples);
        w.i32(off.settings.per_sample);
        w.i32(off.settings.dimension);
        w.u64(off.settings.seed);
        w.u64(off.settings.stream);
        w.i32(static_cast<std::int32_t>(off.local.size()));
        sections.emplace_back("HEAD", std::move(w));
    }
    {
        cache_io::Writer w;
        w.matrix(off.parameters);
        sections.emplace_back("PARM", std::move(w));
    }
    for (const auto& l : off.local) {
        cache_io::Writer w;
        w.matrix(l.basis);
        w.vector(l.eigenvalues);
        w.i32(l.snapshot_rank);
        w.f64(l.orthogonality);
        sections.emplace_back("LOCL", std::move(w));
    }
    {
        cache_io::Writer w;
        w.u64(off.warnings.size());
        for (const auto& s : off.warnings) w.str(s);
        sections.emplace_back("WARN", std::move(w));
    }
    cache_io::Writer out;
    std::vector<unsigned char> bytes(kCacheMagic, kCacheMagic + 8);
    out.u32(kCacheVersion);
    out.u32(static_cast<std::uint32_t>(sections.size()));
    bytes.insert(bytes.end(), out.bytes().begin(), out.bytes().end());
    for (const auto& [tag, w] : sections) {
        cache_io::Writer hdr;
        bytes.insert(bytes.end(), tag.begin(), tag.end());
        hdr.u64(w.bytes().size());
        bytes.insert(bytes.end(), hdr.bytes().begin(), hdr.bytes().end());
        bytes.insert(bytes.end(), w.bytes().begin(), w.bytes().end());
        cache_io::Writer crc;
        crc.u32(crc32_of(w.bytes().data(), w.bytes().size()));
        bytes.insert(bytes.end(), crc.bytes().begin(), crc.bytes().end());
    }
    return bytes;
}

/// Parses a cache image. Throws IntegrityError naming the offending section on
/// corruption, and when the stored key differs from `expected_key`.
inline OfflineSpace deserialize_offline(const std::vector<unsigned char>& bytes, const CacheHeader& expected) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kCacheMagic, 8) != 0)
        throw IntegrityError("offline cache: bad magic (not an offline cache file)");
    cache_io::Reader top(bytes.data() + 8, 8, "preamble");
    const std::uint32_t version = top.u32();
    if (version != kCacheVersion)
        throw IntegrityError("offline cache: unsupported version " + std::to_string(version));
    const std::uint32_t count = top.u32();
    std::size_t off = 16;
    OfflineSpace space;
    int expected_local = -1;
    bool head = false, parm = false, warn = false;
    for (std::uint32_t s = 0; s < count; ++s) {
        if (bytes.size() - off < 12) throw IntegrityError("offline cache: truncated before section " + std::to_string(s));
        const std::string tag(reinterpret_cast<const char*>(bytes.data() + off), 4);
        const std::string where = tag + (tag == "LOCL" ? "[" + std::to_string(space.local.size()) + "]" : "");
        cache_io::Reader lr(bytes.data() + off + 4, 8, where);
        const std::uint64_t len = lr.u64();
        off += 12;
        if (len > bytes.size() - off || bytes.size() - off - len < 4)
            throw IntegrityError("offline cache: section " + where + " is truncated");
        const unsigned char* payload = bytes.data() + off;
        cache_io::Reader cr(payload + len, 4, where);
        if (cr.u32() != crc32_of(payload, len)) throw IntegrityError("offline cache: checksum mismatch in section " + where);
        cache_io::Reader r(payload, len, where);
        if (tag == "HEAD") {
            CacheHeader h;
            h.key = r.u64();
            h.grid_hash = r.u64();
            h.kle_terms = r.i32();
            h.settings.samples = r.i32();
            h.settings.per_sample = r.i32();
            h.settings.dimension = r.i32();
            h.settings.seed = r.u64();
            h.settings.stream = r.u64();
            h.neighborhoods = r.i32();
            if (h.key != expected.key || h.grid_hash != expected.grid_hash || h.kle_terms != expected.kle_terms)
                throw IntegrityError("offline cache was built for a different grid, covariance or offline setting; refusing to load");
            if (expected.neighborhoods != 0 && h.neighborhoods != expected.neighborhoods)
                throw IntegrityError("offline cache: neighborhood count mismatch");
            space.settings = h.settings;
            expected_local = h.neighborhoods;
            head = true;
        } else if (tag == "PARM") {
            space.parameters = r.matrix();
            parm = true;
        } else if (tag == "LOCL") {
            LocalOffline l;
            l.basis = r.matrix();
            l.eigenvalues = r.vector();
            l.snapshot_rank = r.i32();
            l.orthogonality = r.f64();
            space.local.push_back(std::move(l));
        } else if (tag == "WARN") {
            const std::uint64_t n = r.u64();
            for (std::uint64_t i = 0; i < n; ++i) space.warnings.push_back(r.str());
            warn = true;
        } else {
            throw IntegrityError("offline cache: unknown section tag '" + tag + "'");
        }
        if (!r.done()) throw IntegrityError("offline cache: trailing bytes in section " + where);
        off += len + 4;
    }
    if (off != bytes.size()) throw IntegrityError("offline cache: trailing data after the last section");
    if (!head || !parm || !warn) throw IntegrityError("offline cache: missing HEAD, PARM or WARN section");
    if (static_cast<int>(space.local.size()) != expected_local)
        throw IntegrityError("offline cache: expected " + std::to_string(expected_local) + " LOCL sections, found " +
                             std::to_string(space.local.size()));
    return space;
}

inline void write_offline_cache(const std::filesystem::path& path, const CacheHeader& h, const OfflineSpace& off) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto bytes = serialize_offline(h, off);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write offline cache " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ConfigError("failed writing offline cache " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline OfflineSpace read_offline_cache(const std::filesystem::path& path, const CacheHeader& expected) {
    return deserialize_offline(read_file_bytes(path), expected);
}

} // namespace mlgms
