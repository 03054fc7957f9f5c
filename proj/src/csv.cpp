#include "ocsim/csv.hpp"

#include "ocsim/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ocsim::csv {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string format_int(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", v);
    return buf;
}

void Table::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns.size())
        throw ShapeError("csv row has " + std::to_string(cells.size()) + " cells, table has " +
                         std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(cells));
}

std::string Table::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out += ',';
        out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

void Table::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f << to_string();
}

Eigen::MatrixXd read_matrix(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("non-numeric cell '" + cell + "' in " + path);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ShapeError("ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("no data rows in " + path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) f << ',';
            f << format_double(m(r, c));
        }
        f << '\n';
    }
}

} // namespace ocsim::csv
