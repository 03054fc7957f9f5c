#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ocsim::csv {

// Stable numeric formatting for every CSV the tool emits ("%.12g"), so a
// rerun with the same seed produces byte-identical files.
std::string format_double(double v);
std::string format_int(long long v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    Table() = default;
    explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}

    void add_row(std::vector<std::string> cells);
    std::string to_string() const; // header + rows, LF line endings
    void save(const std::string& path) const;
};

// Plain numeric CSV (comma separated, '#' starts a comment line).
Eigen::MatrixXd read_matrix(const std::string& path);
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);

} // namespace ocsim::csv
