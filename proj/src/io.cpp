#include "speedcp/io.hpp"

#include "speedcp/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace speedcp {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool looks_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

nlohmann::json toml_value(const std::string& raw) {
    std::string v = trim(raw);
    if (v.empty()) throw InvalidInputError("config: empty value");
    if (v.front() == '"' && v.back() == '"' && v.size() >= 2)
        return v.substr(1, v.size() - 2);
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') throw InvalidInputError("config: unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        std::string inner = v.substr(1, v.size() - 2);
        for (const std::string& item : split_line(inner, ',')) {
            std::string t = trim(item);
            if (!t.empty()) arr.push_back(toml_value(t));
        }
        return arr;
    }
    if (looks_numeric(v)) {
        if (v.find_first_of(".eE") == std::string::npos)
            return std::stoll(v);
        return std::stod(v);
    }
    throw InvalidInputError("config: cannot parse value '" + v + "'");
}

}  // namespace

Eigen::MatrixXd read_csv_matrix(const std::string& path, bool header) {
    std::ifstream is(path);
    if (!is) throw InvalidInputError("read_csv_matrix: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (first && header) {
            // Skip the first row only when it actually is a header.
            bool numeric = true;
            for (const std::string& c : split_line(line, ',')) {
                std::string t = trim(c);
                if (!(t == "inf" || t == "+inf" || t == "-inf" || looks_numeric(t)))
                    numeric = false;
            }
            first = false;
            if (!numeric) continue;
        }
        first = false;
        std::vector<std::string> cells = split_line(line, ',');
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) {
            std::string t = trim(c);
            if (t == "inf" || t == "+inf")
                row.push_back(std::numeric_limits<double>::infinity());
            else if (t == "-inf")
                row.push_back(-std::numeric_limits<double>::infinity());
            else if (looks_numeric(t))
                row.push_back(std::stod(t));
            else
                throw InvalidInputError("read_csv_matrix: non-numeric cell '" + t + "' in " +
                                        path);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InvalidInputError("read_csv_matrix: ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInputError("read_csv_matrix: no data rows in " + path);
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
    std::ofstream os(path);
    if (!os) throw InvalidInputError("write_csv_matrix: cannot open " + path);
    if (!header.empty()) {
        if (static_cast<Eigen::Index>(header.size()) != m.cols())
            throw InvalidInputError("write_csv_matrix: header width mismatch");
        for (std::size_t j = 0; j < header.size(); ++j)
            os << header[j] << (j + 1 < header.size() ? "," : "\n");
    }
    char buf[48];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            if (std::isinf(v))
                std::snprintf(buf, sizeof buf, "%sinf", v > 0 ? "" : "-");
            else
                std::snprintf(buf, sizeof buf, "%.17g", v);
            os << buf << (j + 1 < m.cols() ? "," : "\n");
        }
    }
    if (!os) throw InvalidInputError("write_csv_matrix: write failure on " + path);
}

nlohmann::json parse_toml_lite(const std::string& text) {
    nlohmann::json out = nlohmann::json::object();
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t[0] == '[')
            throw InvalidInputError("config: tables are not supported (line " +
                                    std::to_string(lineno) + ")");
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError("config: expected key = value at line " +
                                    std::to_string(lineno));
        std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw InvalidInputError("config: empty key at line " + std::to_string(lineno));
        out[key] = toml_value(t.substr(eq + 1));
    }
    return out;
}

nlohmann::json load_config(const std::string& path) {
    std::string text = read_text_file(path);
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw InvalidInputError("config: malformed JSON in " + path);
        return j;
    }
    return parse_toml_lite(text);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw InvalidInputError("write_text_file: cannot open " + path);
    os << text;
    if (!os) throw InvalidInputError("write_text_file: write failure on " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInputError("read_text_file: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace speedcp
