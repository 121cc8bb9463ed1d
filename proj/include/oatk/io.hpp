#ifndef OATK_IO_HPP
#define OATK_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oatk/errors.hpp"
#include "oatk/simulation.hpp"

namespace oatk {

// Shortest round-trip decimal rendering; keeps emitted files byte-stable.
inline std::string format_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

struct CsvTable {
    std::vector<std::string> header; // empty when the file had none
    Eigen::MatrixXd values;          // missing cells become NaN
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        cells.push_back(first == std::string::npos
                            ? std::string()
                            : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

inline bool parse_cell(const std::string& cell, double& out) {
    if (cell.empty() || cell == "NA" || cell == "na" || cell == "nan" ||
        cell == "NaN") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

} // namespace detail

// Reads a numeric CSV. A header row is detected by attempting to parse the
// first row as numbers; on failure it is kept as column names.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path);
    }

    std::vector<std::vector<double>> rows;
    CsvTable table;
    std::string line;
    long line_no = 0;
    std::size_t width = 0;
    bool first_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (first_row) {
            first_row = false;
            width = cells.size();
            std::vector<double> parsed(width);
            bool numeric = true;
            for (std::size_t c = 0; c < width; ++c) {
                if (!detail::parse_cell(cells[c], parsed[c])) {
                    numeric = false;
                    break;
                }
            }
            if (numeric) {
                rows.push_back(std::move(parsed));
            } else {
                table.header.assign(cells.begin(), cells.end());
            }
            continue;
        }
        if (cells.size() != width) {
            throw ParseError(path + ": row " + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(width),
                             line_no);
        }
        std::vector<double> parsed(width);
        for (std::size_t c = 0; c < width; ++c) {
            if (!detail::parse_cell(cells[c], parsed[c])) {
                throw ParseError(path + ": cannot parse cell at row " +
                                     std::to_string(line_no) + ", column " +
                                     std::to_string(c + 1) + ": '" + cells[c] + "'",
                                 line_no, static_cast<long>(c + 1));
            }
        }
        rows.push_back(std::move(parsed));
    }
    if (rows.empty()) {
        throw ParseError(path + ": no data rows");
    }

    table.values.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rows[r][c];
        }
    }
    return table;
}

inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& values,
                             const std::vector<std::string>& header = {}) {
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            out << (c ? "," : "") << header[c];
        }
        out << '\n';
    }
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out << (c ? "," : "") << format_double(values(r, c));
        }
        out << '\n';
    }
}

inline void write_experiment_csv(std::ostream& out, const ExperimentTable& table) {
    out << "design,structure,rho,n,p,p1,A,alpha,method,replicate,fdp,tdp,"
           "n_rejected,seed\n";
    for (const auto& row : table.rows) {
        out << row.design << ',' << row.structure << ',' << format_double(row.rho)
            << ',' << row.n << ',' << row.p << ',' << row.p1 << ','
            << format_double(row.amplitude) << ',' << format_double(row.alpha) << ','
            << row.method << ',' << row.replicate << ',' << format_double(row.fdp)
            << ',' << format_double(row.tdp) << ',' << row.n_rejected << ','
            << row.seed << '\n';
    }
}

inline std::string experiment_csv_string(const ExperimentTable& table) {
    std::ostringstream out;
    write_experiment_csv(out, table);
    return out.str();
}

// One flat key-value document: `key = value` (or `key: value`) per line,
// `#` comments allowed.
inline std::map<std::string, std::string> read_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto sep = line.find('=');
        if (sep == std::string::npos) {
            sep = line.find(':');
        }
        if (sep == std::string::npos) {
            throw ConfigError(path + ": line " + std::to_string(line_no) +
                              " is not `key = value`");
        }
        auto trim = [](std::string s) {
            const auto first = s.find_first_not_of(" \t\r");
            const auto last = s.find_last_not_of(" \t\r");
            return first == std::string::npos ? std::string()
                                              : s.substr(first, last - first + 1);
        };
        const std::string key = trim(line.substr(0, sep));
        const std::string value = trim(line.substr(sep + 1));
        if (key.empty()) {
            throw ConfigError(path + ": line " + std::to_string(line_no) +
                              " has an empty key");
        }
        kv[key] = value;
    }
    return kv;
}

} // namespace oatk

#endif
