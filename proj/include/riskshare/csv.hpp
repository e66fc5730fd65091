#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace riskshare {

// Plain comma-separated table: one header row, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    // 1-based line numbers of each row in the source, for error messages.
    std::vector<std::size_t> lines;

    // Index of a header column, or npos when absent.
    std::size_t column(const std::string& name) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

// Shortest round-trippable decimal form of a double.
std::string format_double(double value);

}  // namespace riskshare
