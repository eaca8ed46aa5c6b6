#include "mimi/mdf.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mimi/error.hpp"
#include "mimi/table.hpp"

namespace mimi {

LinkSpec default_link(ColumnType type) {
  switch (type) {
    case ColumnType::Numeric:
      return LinkSpec::gaussian();
    case ColumnType::Binary:
      return LinkSpec::bernoulli();
    case ColumnType::Count:
      return LinkSpec::poisson();
  }
  return LinkSpec::gaussian();
}

const char* to_string(ColumnType type) {
  switch (type) {
    case ColumnType::Numeric:
      return "numeric";
    case ColumnType::Binary:
      return "binary";
    case ColumnType::Count:
      return "count";
  }
  return "numeric";
}

ColumnType column_type_from_string(const std::string& name) {
  if (name == "numeric") return ColumnType::Numeric;
  if (name == "binary") return ColumnType::Binary;
  if (name == "count") return ColumnType::Count;
  throw SchemaError("unknown column type '" + name +
                    "' (expected numeric, binary or count; categorical columns with more "
                    "than two levels are not supported)");
}

namespace {

std::string where(Eigen::Index i, Eigen::Index j) {
  return " at (" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

bool is_integral(double v) { return std::floor(v) == v; }

}  // namespace

MixedDataFrame::MixedDataFrame(std::vector<Column> columns, Matrix values, Mask mask)
    : MixedDataFrame(std::move(columns), std::move(values), std::move(mask), false) {}

MixedDataFrame MixedDataFrame::predictions(std::vector<Column> columns, Matrix values) {
  Mask all = Mask::Ones(values.rows(), values.cols());
  return MixedDataFrame(std::move(columns), std::move(values), std::move(all), true);
}

MixedDataFrame::MixedDataFrame(std::vector<Column> columns, Matrix values, Mask mask, bool predictions)
    : columns_(std::move(columns)), values_(std::move(values)), mask_(std::move(mask)),
      predictions_(predictions) {
  if (values_.rows() == 0 || values_.cols() == 0) throw ShapeError("data frame must be nonempty");
  if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
    throw ShapeError("mask and values differ in shape");
  if (static_cast<Eigen::Index>(columns_.size()) != values_.cols())
    throw ShapeError("expected " + std::to_string(values_.cols()) + " column descriptors, got " +
                     std::to_string(columns_.size()));
  const double sentinel = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    const ColumnType type = columns_[static_cast<std::size_t>(j)].type;
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      const std::uint8_t m = mask_(i, j);
      if (m > 1) throw InvalidInput("mask entries must be 0 or 1" + where(i, j));
      if (m == 0) {
        values_(i, j) = sentinel;
        continue;
      }
      ++n_observed_;
      const double v = values_(i, j);
      if (!std::isfinite(v)) throw InvalidInput("observed value is not finite" + where(i, j));
      if (predictions_) {
        if (type == ColumnType::Binary && (v < 0.0 || v > 1.0))
          throw InvalidInput("predicted probability outside [0, 1]" + where(i, j));
        if (type == ColumnType::Count && v < 0.0)
          throw InvalidInput("predicted count mean is negative" + where(i, j));
        continue;
      }
      if (type == ColumnType::Binary && v != 0.0 && v != 1.0)
        throw InvalidInput("binary value must be 0 or 1" + where(i, j));
      if (type == ColumnType::Count && (v < 0.0 || !is_integral(v)))
        throw InvalidInput("count value must be a nonnegative integer" + where(i, j));
    }
  }
  if (n_observed_ == 0) throw InvalidInput("data frame has no observed entries");
}

Links MixedDataFrame::links() const {
  Links out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.link);
  return out;
}

double MixedDataFrame::value(Eigen::Index i, Eigen::Index j) const {
  if (!observed(i, j)) throw InvalidInput("entry is not observed" + where(i, j));
  return values_(i, j);
}

std::optional<double> MixedDataFrame::get(Eigen::Index i, Eigen::Index j) const {
  if (!observed(i, j)) return std::nullopt;
  return values_(i, j);
}

Matrix MixedDataFrame::filled(double fill) const {
  Matrix out = values_;
  for (Eigen::Index j = 0; j < cols(); ++j)
    for (Eigen::Index i = 0; i < rows(); ++i)
      if (!observed(i, j)) out(i, j) = fill;
  return out;
}

MixedDataFrame MixedDataFrame::restricted(const Mask& mask) const {
  if (mask.rows() != rows() || mask.cols() != cols()) throw ShapeError("mask shape mismatch");
  for (Eigen::Index j = 0; j < cols(); ++j)
    for (Eigen::Index i = 0; i < rows(); ++i)
      if (mask(i, j) && !observed(i, j))
        throw InvalidInput("restricted mask reveals an unobserved entry" + where(i, j));
  return MixedDataFrame(columns_, values_, mask, predictions_);
}

MixedDataFrame MixedDataFrame::completed(const Matrix& values) const {
  return MixedDataFrame(columns_, values, Mask::Ones(rows(), cols()));
}

MixedDataFrame MixedDataFrame::with_links(const Links& links) const {
  if (static_cast<Eigen::Index>(links.size()) != cols()) throw ShapeError("expected one link per column");
  auto cols_copy = columns_;
  for (std::size_t j = 0; j < cols_copy.size(); ++j) cols_copy[j].link = links[j];
  return MixedDataFrame(std::move(cols_copy), values_, mask_, predictions_);
}

bool operator==(const MixedDataFrame& a, const MixedDataFrame& b) {
  if (a.columns_ != b.columns_ || a.mask_ != b.mask_) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a.observed(i, j) && a.values_(i, j) != b.values_(i, j)) return false;
  return true;
}

MaskStats mask_stats(const MixedDataFrame& df) {
  const Mask& m = df.mask();
  const auto counts = m.cast<double>();
  const double row_max = counts.rowwise().sum().maxCoeff();
  const double col_max = counts.colwise().sum().maxCoeff();
  return {static_cast<double>(df.observed_count()) / static_cast<double>(m.size()),
          std::max(row_max, col_max)};
}

// ---------------------------------------------------------------------------
// Schema

Schema parse_schema(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  Schema schema;
  for (const auto& [name, entry] : j.items()) {
    ColumnSchema cs;
    if (entry.is_string()) {
      cs.type = column_type_from_string(entry.get<std::string>());
    } else if (entry.is_object()) {
      if (!entry.contains("type")) throw SchemaError("schema entry '" + name + "' lacks a type");
      cs.type = column_type_from_string(entry.at("type").get<std::string>());
      if (entry.contains("sigma2")) cs.sigma2 = entry.at("sigma2").get<double>();
      if (entry.contains("a")) cs.rate_scale = entry.at("a").get<double>();
    } else {
      throw SchemaError("schema entry '" + name + "' must be a string or an object");
    }
    if (cs.sigma2 && cs.type != ColumnType::Numeric)
      throw SchemaError("sigma2 given for non-numeric column '" + name + "'");
    if (cs.rate_scale && cs.type != ColumnType::Count)
      throw SchemaError("a given for non-count column '" + name + "'");
    schema.emplace(name, cs);
  }
  return schema;
}

Schema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed schema JSON in " + path.string() + ": " + e.what());
  }
  return parse_schema(j);
}

nlohmann::json schema_to_json(const MixedDataFrame& df) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : df.columns()) {
    nlohmann::json entry{{"type", to_string(c.type)}};
    if (c.link.kind() == LinkKind::Gaussian) entry["sigma2"] = c.link.sigma2();
    if (c.link.kind() == LinkKind::Poisson) entry["a"] = c.link.rate_scale();
    j[c.name] = entry;
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_record(const std::string& line, long row) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cell.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw IngestionError("unterminated quoted field", row, static_cast<long>(out.size()));
  out.push_back(std::move(cell));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_missing(const std::string& s) { return s.empty() || lower(s) == "na"; }

std::optional<double> bool_token(const std::string& s) {
  const std::string l = lower(s);
  if (l == "yes" || l == "true") return 1.0;
  if (l == "no" || l == "false") return 0.0;
  return std::nullopt;
}

bool is_integer_token(const std::string& s) {
  std::size_t k = (!s.empty() && (s[0] == '+' || s[0] == '-')) ? 1 : 0;
  if (k == s.size()) return false;
  for (; k < s.size(); ++k)
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return false;
  return true;
}

std::optional<double> number_token(const std::string& s) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

enum class TokenKind { Missing, Bool, Integer, Real, Other };

struct Token {
  TokenKind kind;
  double value;
};

Token classify(const std::string& raw) {
  if (is_missing(raw)) return {TokenKind::Missing, 0.0};
  if (auto b = bool_token(raw)) return {TokenKind::Bool, *b};
  if (auto v = number_token(raw)) return {is_integer_token(raw) ? TokenKind::Integer : TokenKind::Real, *v};
  return {TokenKind::Other, 0.0};
}

ColumnType infer_type(const std::vector<std::string>& raw, const std::vector<Token>& tokens,
                      long col) {
  bool any_bool = false, any_real = false, any_negative = false, all_01 = true, any_number = false;
  std::set<std::string> other_levels;
  long first_other = -1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    switch (t.kind) {
      case TokenKind::Missing:
        break;
      case TokenKind::Bool:
        any_bool = true;
        other_levels.insert(lower(raw[i]));
        break;
      case TokenKind::Integer:
        any_number = true;
        if (t.value < 0.0) any_negative = true;
        if (t.value != 0.0 && t.value != 1.0) all_01 = false;
        break;
      case TokenKind::Real:
        any_number = true;
        any_real = true;
        all_01 = false;
        break;
      case TokenKind::Other:
        if (first_other < 0) first_other = static_cast<long>(i);
        other_levels.insert(raw[i]);
        break;
    }
  }
  if (first_other >= 0) {
    if (!any_number && other_levels.size() > 2)
      throw SchemaError("column " + std::to_string(col) + " looks categorical with " +
                        std::to_string(other_levels.size()) +
                        " levels; only numeric, binary and count columns are supported");
    throw IngestionError("unparseable cell '" + raw[static_cast<std::size_t>(first_other)] + "'",
                         first_other, col);
  }
  if (any_bool) {
    if (!all_01 || any_negative)
      throw SchemaError("column " + std::to_string(col) +
                        " mixes yes/no tokens with non-binary numbers");
    return ColumnType::Binary;
  }
  if (!any_number) return ColumnType::Numeric;
  if (any_real || any_negative) return ColumnType::Numeric;
  return all_01 ? ColumnType::Binary : ColumnType::Count;
}

double convert(const std::string& raw, const Token& t, ColumnType type, long row, long col) {
  if (t.kind == TokenKind::Other) throw IngestionError("unparseable cell '" + raw + "'", row, col);
  switch (type) {
    case ColumnType::Numeric:
      if (t.kind == TokenKind::Bool)
        throw SchemaError("yes/no token '" + raw + "' in numeric column (row " +
                          std::to_string(row) + ", column " + std::to_string(col) + ")");
      return t.value;
    case ColumnType::Binary:
      if (t.value != 0.0 && t.value != 1.0)
        throw SchemaError("value '" + raw + "' in binary column (row " + std::to_string(row) +
                          ", column " + std::to_string(col) + ")");
      return t.value;
    case ColumnType::Count:
      if (t.kind == TokenKind::Bool || t.value < 0.0 || !is_integral(t.value))
        throw SchemaError("value '" + raw + "' in count column (row " + std::to_string(row) +
                          ", column " + std::to_string(col) + ")");
      return t.value;
  }
  return t.value;
}

}  // namespace

MixedDataFrame read_csv(std::istream& in, const std::optional<Schema>& schema) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("missing header row", -1, 0);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names = split_record(line, -1);
  for (auto& n : names) n = trim(n);
  const std::size_t n_cols = names.size();

  std::vector<std::vector<std::string>> cells;  // row-major raw cells
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto rec = split_record(line, row);
    if (rec.size() != n_cols)
      throw IngestionError("expected " + std::to_string(n_cols) + " fields, got " +
                               std::to_string(rec.size()),
                           row, static_cast<long>(std::min(rec.size(), n_cols)));
    for (auto& c : rec) c = trim(c);
    cells.push_back(std::move(rec));
    ++row;
  }
  if (cells.empty()) throw IngestionError("no data rows", 0, 0);

  const auto m1 = static_cast<Eigen::Index>(cells.size());
  const auto m2 = static_cast<Eigen::Index>(n_cols);
  Matrix values = Matrix::Zero(m1, m2);
  Mask mask = Mask::Zero(m1, m2);
  std::vector<Column> columns;
  columns.reserve(n_cols);

  std::vector<std::string> raw(static_cast<std::size_t>(m1));
  std::vector<Token> tokens(static_cast<std::size_t>(m1));
  for (Eigen::Index j = 0; j < m2; ++j) {
    for (Eigen::Index i = 0; i < m1; ++i) {
      raw[static_cast<std::size_t>(i)] = cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      tokens[static_cast<std::size_t>(i)] = classify(raw[static_cast<std::size_t>(i)]);
    }
    Column column;
    column.name = names[static_cast<std::size_t>(j)];
    if (schema) {
      const auto it = schema->find(column.name);
      if (it == schema->end()) throw SchemaError("column '" + column.name + "' missing from schema");
      column.type = it->second.type;
      column.link = default_link(column.type);
      if (it->second.sigma2) column.link = LinkSpec::gaussian(*it->second.sigma2);
      if (it->second.rate_scale) column.link = LinkSpec::poisson(*it->second.rate_scale);
    } else {
      column.type = infer_type(raw, tokens, static_cast<long>(j));
      column.link = default_link(column.type);
    }
    for (Eigen::Index i = 0; i < m1; ++i) {
      const Token& t = tokens[static_cast<std::size_t>(i)];
      if (t.kind == TokenKind::Missing) continue;
      values(i, j) = convert(raw[static_cast<std::size_t>(i)], t, column.type, static_cast<long>(i),
                             static_cast<long>(j));
      mask(i, j) = 1;
    }
    columns.push_back(std::move(column));
  }
  return MixedDataFrame(std::move(columns), std::move(values), std::move(mask));
}

MixedDataFrame read_csv(const std::filesystem::path& path, const std::optional<Schema>& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file " + path.string());
  return read_csv(in, schema);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_numeric(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

void write_csv(const MixedDataFrame& df, std::ostream& out) {
  for (Eigen::Index j = 0; j < df.cols(); ++j) {
    if (j) out << ',';
    out << quote_if_needed(df.column(j).name);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < df.rows(); ++i) {
    for (Eigen::Index j = 0; j < df.cols(); ++j) {
      if (j) out << ',';
      if (!df.observed(i, j)) {
        out << "NA";
        continue;
      }
      const double v = df.observed_value(i, j);
      switch (df.column(j).type) {
        case ColumnType::Numeric:
          out << format_numeric(v);
          break;
        case ColumnType::Binary:
        case ColumnType::Count:
          if (is_integral(v))
            out << static_cast<long long>(v);
          else
            out << format_double(v);
          break;
      }
    }
    out << '\n';
  }
}

void write_csv(const MixedDataFrame& df, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(df, out);
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace mimi
