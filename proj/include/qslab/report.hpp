#pragma once

// Report emission: a JSON index plus one CSV per table, and the run manifest.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "qslab/errors.hpp"

namespace qslab {

inline constexpr const char* kToolVersion = "0.1.0";

struct Check {
    std::string name;
    double value = 0.0;
    std::string bound;
    bool pass = false;
};

using Cell = std::variant<double, std::int64_t, std::string>;

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

struct Section {
    std::string name;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::vector<Check> checks;
    std::vector<CsvTable> tables;
    /// Other files this section wrote into the run directory (relative names).
    std::vector<std::string> files;

    void check(std::string name_, double value, std::string bound, bool pass) {
        checks.push_back({std::move(name_), value, std::move(bound), pass});
    }
    bool pass() const {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

inline bool all_pass(const std::vector<Section>& sections) {
    for (const auto& s : sections) {
        if (!s.pass()) return false;
    }
    return true;
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw ShapeError("csv row width differs from header in " + t.name);
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

inline std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create run directory " + dir.string());
    return dir;
}

/// Writes `<section>_<table>.csv` for every table and `index.json`; returns
/// the relative names written, index last.
inline std::vector<std::string> emit_report(const std::vector<Section>& sections, const std::filesystem::path& dir) {
    if (sections.empty()) throw DomainError("emit_report: no sections");
    ensure_dir(dir);
    std::vector<std::string> written;
    nlohmann::ordered_json index;
    index["tool_version"] = kToolVersion;
    index["all_pass"] = all_pass(sections);
    auto& arr = index["sections"] = nlohmann::ordered_json::array();
    for (const auto& s : sections) {
        nlohmann::ordered_json js;
        js["name"] = s.name;
        js["pass"] = s.pass();
        js["summary"] = s.summary;
        auto& cs = js["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : s.checks) {
            cs.push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"pass", c.pass}});
        }
        auto& csv = js["csv"] = nlohmann::ordered_json::array();
        for (const auto& t : s.tables) {
            const std::string name = s.name + "_" + t.name + ".csv";
            write_csv(dir / name, t);
            written.push_back(name);
            csv.push_back(name);
        }
        js["files"] = s.files;
        arr.push_back(std::move(js));
    }
    write_text(dir / "index.json", index.dump(2) + "\n");
    written.push_back("index.json");
    return written;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalFailure("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// manifest.json. Holds the only non-deterministic content of a run
/// (timestamps, thread count), so numeric outputs stay byte-comparable.
struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::vector<std::string> artifacts;
    std::string started;
    std::string finished;
    std::string tool_version = kToolVersion;
    int exit_code = 0;

    void write(const std::filesystem::path& dir) const {
        nlohmann::ordered_json j{{"command", command},     {"config_digest", config_digest},
                                 {"seed", seed},           {"threads", threads},
                                 {"artifacts", artifacts}, {"started", started},
                                 {"finished", finished},   {"tool_version", tool_version},
                                 {"exit_code", exit_code}};
        write_text(dir / "manifest.json", j.dump(2) + "\n");
    }
};

}  // namespace qslab
