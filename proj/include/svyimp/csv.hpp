#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svyimp::csv {

/// Token written for a missing numeric cell.
inline constexpr std::string_view kMissing = "NA";

/// Shortest round-trip decimal representation; NaN becomes kMissing.
std::string format_number(double value);
std::string format_number(std::int64_t value);

/// Line-oriented CSV writer. Fields never contain commas or quotes in this
/// project, so no quoting is performed; a field with a comma is rejected.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  void header(const std::vector<std::string>& names);
  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t width_ = 0;
};

/// Whole-file CSV table with a header row.
class Table {
 public:
  static Table read(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return cells_[row][col]; }

  double number(std::size_t row, std::size_t col) const;
  std::int64_t integer(std::size_t row, std::size_t col) const;

 private:
  std::filesystem::path path_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace svyimp::csv
