#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dexreg::cli {

// Numeric CSV with a header row. Columns are stored separately.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  // throws ConfigError naming the missing column
  const std::vector<double>& column(const std::string& name) const;
};

// Throws DataError with the offending line number on malformed input.
Table read_csv(const std::filesystem::path& path);

// Shortest representation that reads back to the same double.
std::string num(double v);

// Writes header and rows; every row must have header.size() fields.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace dexreg::cli
