#pragma once

// CSV output, stage timing and the run manifest.

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlgms/errors.hpp"
#include "mlgms/harness/cache.hpp"
#include "mlgms/harness/config.hpp"

namespace mlgms {

constexpr const char* kSoftwareVersion = "0.1.0";

/// Shortest round-trip decimal, independent of the locale.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header) : path_(path), cols_(header.size()) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary);
        if (!out_) throw ConfigError("cannot write " + path.string());
        row_text(header);
    }

    struct Cell {
        std::string text;
        Cell(const std::string& s) : text(s) {}
        Cell(const char* s) : text(s) {}
        Cell(double v) : text(format_double(v)) {}
        Cell(int v) : text(std::to_string(v)) {}
        Cell(long v) : text(std::to_string(v)) {}
        Cell(long long v) : text(std::to_string(v)) {}
        Cell(unsigned long v) : text(std::to_string(v)) {}
        Cell(unsigned long long v) : text(std::to_string(v)) {}
        Cell(bool v) : text(v ? "1" : "0") {}
    };

    void row(const std::vector<Cell>& cells) {
        std::vector<std::string> t;
        t.reserve(cells.size());
        for (const auto& c : cells) t.push_back(c.text);
        row_text(t);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void row_text(const std::vector<std::string>& cells) {
        if (cells.size() != cols_)
            throw ConfigError("CSV row for " + path_.string() + " has " + std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(cols_));
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    std::filesystem::path path_;
    std::size_t cols_;
    std::ofstream out_;
};

inline std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::uint32_t file_crc32(const std::filesystem::path& p) {
    const auto b = read_file_bytes(p);
    return crc32_of(b.data(), b.size());
}

struct RunManifest {
    struct Stage {
        std::string name;
        double seconds = 0.0;
    };
    std::string command;
    std::string config_hash;
    std::string config_path;
    std::string started = utc_timestamp();
    std::string finished;
    std::vector<Stage> stages;
    std::vector<std::filesystem::path> files;  // relative to the output directory
    nlohmann::json results = nlohmann::json::object();

    void add_file(const std::filesystem::path& out_dir, const std::filesystem::path& p) {
        files.push_back(std::filesystem::relative(p, out_dir));
    }

    nlohmann::json to_json(const std::filesystem::path& out_dir) const {
        nlohmann::json j;
        j["software"] = "mlgms";
        j["version"] = kSoftwareVersion;
        j["command"] = command;
        j["config_hash"] = config_hash;
        j["config_path"] = config_path;
        j["started"] = started;
        j["finished"] = finished;
        j["stages"] = nlohmann::json::array();
        for (const auto& s : stages) j["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}});
        j["files"] = nlohmann::json::array();
        for (const auto& f : files) {
            const auto full = out_dir / f;
            j["files"].push_back({{"path", f.generic_string()},
                                  {"bytes", std::filesystem::file_size(full)},
                                  {"crc32", detail::hex64(file_crc32(full)).substr(8)}});
        }
        j["results"] = results;
        return j;
    }

    void write(const std::filesystem::path& out_dir) {
        finished = utc_timestamp();
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir / "manifest.json");
        if (!out) throw ConfigError("cannot write manifest in " + out_dir.string());
        out << to_json(out_dir).dump(2) << '\n';
    }
};

/// Rechecks every listed file; returns the paths whose checksum or size differs.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& out_dir) {
    std::ifstream in(out_dir / "manifest.json");
    if (!in) throw ConfigError("no manifest.json in " + out_dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    std::vector<std::string> bad;
    for (const auto& f : j.at("files")) {
        const auto p = out_dir / f.at("path").get<std::string>();
        if (!std::filesystem::exists(p) || std::filesystem::file_size(p) != f.at("bytes").get<std::uintmax_t>() ||
            detail::hex64(file_crc32(p)).substr(8) != f.at("crc32").get<std::string>())
            bad.push_back(f.at("path").get<std::string>());
    }
    return bad;
}

/// Wall-clock timer for manifest stages.
class StageTimer {
public:
    explicit StageTimer(RunManifest& m, std::string name) : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        m_.stages.push_back({name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()});
    }
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    RunManifest& m_;
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
};

} // namespace mlgms
