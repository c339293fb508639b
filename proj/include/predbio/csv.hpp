#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace predbio {

/// Header-indexed CSV table held as strings. Supports RFC 4180 quoting.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(std::string_view text, const std::string& origin = "<memory>");

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  bool has_column(std::string_view name) const;
  /// Throws Error(missing_column) naming the column.
  std::size_t column(std::string_view name) const;
  const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  const std::string& origin() const noexcept { return origin_; }

 private:
  std::string origin_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses a finite or non-finite double; returns nullopt on malformed text.
std::optional<double> parse_double(std::string_view text);

/// Shortest text that round-trips the double exactly.
std::string format_double(double value);

/// Fixed-precision text for byte-stable reports.
std::string format_fixed(double value, int significant_digits = 10);

std::string csv_escape(std::string_view field);

}  // namespace predbio
