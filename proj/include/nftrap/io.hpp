#pragma once

// Text I/O helpers: deterministic CSV writing (fixed %.12g formatting, '.'
// decimal separator, header row), CSV ingestion for scan/survival/profile
// files, FNV-1a checksums and the run manifest.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nftrap {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(const std::vector<double>& values) {
        std::string line;
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) line += ',';
            line += format_double(values[i]);
        }
        rows_.push_back(std::move(line));
    }

    std::string str() const {
        std::string out;
        for (size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        for (const auto& r : rows_) {
            out += r;
            out += '\n';
        }
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return int(i);
        return -1;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            t.header = cells;
            first = false;
        } else {
            std::vector<double> row;
            row.reserve(cells.size());
            for (const auto& c : cells) row.push_back(std::stod(c));
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

inline std::uint64_t fnv1a64(const void* data, size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_file: cannot open " + path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Run manifest: scenario hash, per-output checksums, wall-clock timings.
// Checksums are reproducible for a fixed scenario + seed; timings are not
// part of any checksum.
class RunManifest {
public:
    RunManifest(std::uint64_t scenario_hash, std::uint64_t seed,
                std::string version = "0.1.0")
        : scenario_hash_(scenario_hash), seed_(seed), version_(std::move(version)) {}

    void add_output(const std::string& name, const std::string& content) {
        outputs_.emplace_back(name, std::make_pair(content.size(), fnv1a64(content)));
    }
    void add_timing(const std::string& name, double ms) {
        timings_.emplace_back(name, ms);
    }

    std::string str() const {
        std::ostringstream out;
        char buf[32];
        out << "artifact_version = " << version_ << "\n";
        std::snprintf(buf, sizeof buf, "0x%016llx",
                      static_cast<unsigned long long>(scenario_hash_));
        out << "scenario_hash = " << buf << "\n";
        out << "seed = " << seed_ << "\n";
        for (const auto& [name, info] : outputs_) {
            std::snprintf(buf, sizeof buf, "0x%016llx",
                          static_cast<unsigned long long>(info.second));
            out << "output " << name << " bytes=" << info.first << " fnv1a=" << buf << "\n";
        }
        for (const auto& [name, ms] : timings_) {
            std::snprintf(buf, sizeof buf, "%.1f", ms);
            out << "timing_ms " << name << " = " << buf << "\n";
        }
        return out.str();
    }

private:
    std::uint64_t scenario_hash_, seed_;
    std::string version_;
    std::vector<std::pair<std::string, std::pair<size_t, std::uint64_t>>> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
};

} // namespace nftrap
