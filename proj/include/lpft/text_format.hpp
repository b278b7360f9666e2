#pragma once

// Helpers shared by the self-describing text containers (datasets, model
// checkpoints) and the CSV writers. Reals are printed with the shortest
// representation that round-trips exactly.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace lpft::text {

std::string format_double(double value);
/// Parses a full token as a double; returns false on junk or trailing characters.
bool parse_double(std::string_view token, double& out);
bool parse_long(std::string_view token, long& out);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split_char(std::string_view line, char sep);

/// Line-oriented reader that tracks 1-based line numbers and skips blank lines.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}
    bool next(std::string_view& line);
    int line_number() const { return line_no_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_no_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// CSV with a header row; rows are written with full round-trip precision.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::string& column_prefix = "c");
Eigen::MatrixXd matrix_from_csv(std::string_view text);

}  // namespace lpft::text
