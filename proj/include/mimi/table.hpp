#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mimi {

/// Column-named rows of preformatted cells, written as CSV.
class ResultTable {
 public:
  explicit ResultTable(std::vector<std::string> header = {});

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  void add_row(std::vector<std::string> row);
  /// Cell by column name. Throws InvalidInput for an unknown column.
  const std::string& at(std::size_t row, const std::string& column) const;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;

  bool operator==(const ResultTable&) const = default;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

double median(std::vector<double> values);
/// Linear-interpolated quantile, q ∈ [0, 1].
double quantile(std::vector<double> values, double q);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace mimi
