#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimi/expfam.hpp"
#include "mimi/types.hpp"

namespace mimi {

enum class ColumnType { Numeric, Binary, Count };

LinkSpec default_link(ColumnType type);
const char* to_string(ColumnType type);
ColumnType column_type_from_string(const std::string& name);

struct Column {
  std::string name;
  ColumnType type = ColumnType::Numeric;
  LinkSpec link = LinkSpec::gaussian();

  bool operator==(const Column&) const = default;
};

/// An m1×m2 table of heterogeneous columns with an observation mask.
///
/// Immutable once built. Cells with mask 0 hold a NaN sentinel; every numeric
/// routine branches on the mask before reading a value, so unobserved entries
/// can never leak into a computation.
class MixedDataFrame {
 public:
  /// Validates types at observed cells and overwrites unobserved cells with
  /// the sentinel. Throws ShapeError, InvalidInput or SchemaError.
  MixedDataFrame(std::vector<Column> columns, Matrix values, Mask mask);

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }

  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(Eigen::Index j) const { return columns_.at(static_cast<std::size_t>(j)); }
  Links links() const;

  const Mask& mask() const noexcept { return mask_; }
  bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j) != 0; }
  /// Value at an observed cell. Throws InvalidInput if the cell is unobserved.
  double value(Eigen::Index i, Eigen::Index j) const;
  /// Value at a cell the caller has already checked is observed.
  double observed_value(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  std::optional<double> get(Eigen::Index i, Eigen::Index j) const;

  Eigen::Index observed_count() const noexcept { return n_observed_; }

  /// Copy of the values with `fill` at unobserved cells.
  Matrix filled(double fill = 0.0) const;

  /// Same values restricted to `mask` (which must be a subset of the current
  /// mask).
  MixedDataFrame restricted(const Mask& mask) const;

  /// Same columns, fully observed with the given values.
  MixedDataFrame completed(const Matrix& values) const;

  /// Same values and mask with the link of every column replaced.
  MixedDataFrame with_links(const Links& links) const;

  /// Fully observed frame of predicted means: binary cells may hold
  /// probabilities in [0, 1] and count cells any nonnegative real.
  static MixedDataFrame predictions(std::vector<Column> columns, Matrix values);
  bool holds_predictions() const noexcept { return predictions_; }

  friend bool operator==(const MixedDataFrame& a, const MixedDataFrame& b);

 private:
  std::vector<Column> columns_;
  Matrix values_;
  Mask mask_;
  Eigen::Index n_observed_ = 0;
  bool predictions_ = false;

  MixedDataFrame(std::vector<Column> columns, Matrix values, Mask mask, bool predictions);
};

/// Empirical analogues of the MCAR sampling constants.
struct MaskStats {
  double p_hat;     // observed fraction
  double beta_hat;  // largest observed count over any row or column
};

MaskStats mask_stats(const MixedDataFrame& df);

/// Column name → declared type and optional fixed link constants.
struct ColumnSchema {
  ColumnType type = ColumnType::Numeric;
  std::optional<double> sigma2;
  std::optional<double> rate_scale;
};
using Schema = std::map<std::string, ColumnSchema>;

Schema parse_schema(const nlohmann::json& j);
Schema read_schema(const std::filesystem::path& path);
nlohmann::json schema_to_json(const MixedDataFrame& df);

MixedDataFrame read_csv(std::istream& in, const std::optional<Schema>& schema = std::nullopt);
MixedDataFrame read_csv(const std::filesystem::path& path,
                        const std::optional<Schema>& schema = std::nullopt);

/// Numeric cells always carry a decimal point or exponent so that type
/// inference on re-read gives back Numeric, not Count.
void write_csv(const MixedDataFrame& df, std::ostream& out);
void write_csv(const MixedDataFrame& df, const std::filesystem::path& path);

}  // namespace mimi
