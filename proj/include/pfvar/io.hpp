#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfvar/errors.hpp"
#include "pfvar/lag.hpp"

namespace pfvar {

/// Round-trippable decimal form of a double.
inline std::string format_double(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

inline std::string format_lag(std::int64_t lag) {
    return lag == kFullTracing ? "inf" : std::to_string(lag);
}

/// Minimal CSV writer: header row, comma separators, '.' decimals, LF line
/// endings. Fields containing separators or quotes are escaped, although no
/// writer in this project produces such fields.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
    }

    void row(std::initializer_list<std::string> cells) {
        bool first = true;
        for (const auto& cell : cells) {
            if (!first) out_ << ',';
            first = false;
            out_ << escape(cell);
        }
        out_ << '\n';
        if (!out_) throw IoError("write failed");
    }

private:
    static std::string escape(const std::string& cell) {
        if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
        std::string quoted = "\"";
        for (char c : cell) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        quoted += '"';
        return quoted;
    }

    std::ofstream out_;
};

/// Single-column observation file with header "y".
inline void write_observations_csv(const std::string& path, std::span<const double> values) {
    CsvWriter csv(path);
    csv.row({"y"});
    for (double value : values) csv.row({format_double(value)});
}

inline std::vector<double> read_observations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read observations file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "y") throw ConfigError("'" + path + "': expected header 'y', got '" + line + "'");
    std::vector<double> values;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            std::size_t consumed = 0;
            values.push_back(std::stod(line, &consumed));
            if (consumed != line.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError("'" + path + "' line " + std::to_string(line_number) +
                              ": not a number: '" + line + "'");
        }
    }
    return values;
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace pfvar
