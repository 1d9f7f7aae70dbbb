#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dexreg/error.hpp"

namespace dexreg::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

bool Table::has(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

const std::vector<double>& Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("column '" + name + "' not found in the data");
  return columns[static_cast<std::size_t>(it - header.begin())];
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = fields;
      for (std::size_t j = 0; j < fields.size(); ++j) {
        if (fields[j].empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty column name");
        for (std::size_t k = 0; k < j; ++k)
          if (fields[k] == fields[j])
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate column '" + fields[j] + "'");
      }
      t.columns.resize(fields.size());
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      const auto& f = fields[j];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": column '" + t.header[j] +
                        "' is not a finite number: '" + f + "'");
      t.columns[j].push_back(v);
    }
  }
  if (t.header.empty()) throw DataError(path.string() + ": missing header row");
  return t;
}

std::string num(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t j = 0; j < f.size(); ++j) out << (j ? "," : "") << f[j];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::logic_error("CSV row width differs from the header");
    line(r);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace dexreg::cli
