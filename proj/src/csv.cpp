#include "svyimp/csv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "svyimp/error.hpp"

namespace svyimp::csv {

std::string format_number(double value) {
  if (std::isnan(value)) return std::string(kMissing);
  return fmt::format("{}", value);
}

std::string format_number(std::int64_t value) { return fmt::format("{}", value); }

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw FormatError("cannot open " + path.string() + " for writing");
}

void Writer::header(const std::vector<std::string>& names) {
  width_ = names.size();
  row(names);
}

void Writer::row(const std::vector<std::string>& fields) {
  if (width_ != 0 && fields.size() != width_) {
    throw FormatError(fmt::format("{}: row has {} fields, header has {}", path_.string(),
                                  fields.size(), width_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].find(',') != std::string::npos) {
      throw FormatError(path_.string() + ": field contains a comma: " + fields[i]);
    }
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? line.size() - start
                                                                       : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Table table;
  table.path_ = path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (first) {
      table.header_ = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header_.size()) {
      throw FormatError(fmt::format("{}: row {} has {} fields, expected {}", path.string(),
                                    table.cells_.size() + 1, fields.size(),
                                    table.header_.size()));
    }
    table.cells_.push_back(std::move(fields));
  }
  if (first) throw FormatError(path.string() + ": missing header row");
  return table;
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw FormatError(path_.string() + ": missing column " + std::string(name));
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& s = cells_[row][col];
  if (s == kMissing || s.empty()) return std::nan("");
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(fmt::format("{}: bad number '{}' in column {}", path_.string(), s,
                                  header_[col]));
  }
  return value;
}

std::int64_t Table::integer(std::size_t row, std::size_t col) const {
  const std::string& s = cells_[row][col];
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(fmt::format("{}: bad integer '{}' in column {}", path_.string(), s,
                                  header_[col]));
  }
  return value;
}

}  // namespace svyimp::csv
