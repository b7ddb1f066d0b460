#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cardlearn {

enum class ColumnKind { Integer, Real };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnDef {
  std::string name;
  ColumnKind kind = ColumnKind::Integer;

  friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

class TableSchema {
 public:
  TableSchema() = default;
  /// Throws CatalogError on duplicate column names or an empty column list.
  TableSchema(std::string name, std::vector<ColumnDef> columns);

  const std::string& name() const { return name_; }
  const std::vector<ColumnDef>& columns() const { return columns_; }
  std::size_t arity() const { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view column) const;
  /// Like find() but throws CatalogError naming the table.
  std::size_t index_of(std::string_view column) const;

  friend bool operator==(const TableSchema&, const TableSchema&) = default;

 private:
  std::string name_;
  std::vector<ColumnDef> columns_;
};

/// Input cell for create_table. Integers must go into integer columns.
using Value = std::variant<std::int64_t, double>;
using Tuple = std::vector<Value>;

/// Immutable row-major relation. Every cell is stored as a double; integer
/// columns hold integral values only.
class Table {
 public:
  Table() = default;

  const TableSchema& schema() const { return schema_; }
  const std::string& name() const { return schema_.name(); }
  std::size_t row_count() const { return schema_.arity() == 0 ? 0 : cells_.size() / schema_.arity(); }

  double at(std::size_t row, std::size_t column) const { return cells_[row * schema_.arity() + column]; }
  std::span<const double> row(std::size_t i) const {
    return {cells_.data() + i * schema_.arity(), schema_.arity()};
  }
  /// Copy of one column, in row order.
  std::vector<double> column_values(std::size_t column) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  friend Table create_table(TableSchema schema, const std::vector<Tuple>& rows);
  friend Table make_table_unchecked(TableSchema schema, std::vector<double> cells);

  TableSchema schema_;
  std::vector<double> cells_;
};

/// Throws SchemaViolation identifying the first offending row.
Table create_table(TableSchema schema, const std::vector<Tuple>& rows);

inline std::size_t row_count(const Table& table) { return table.row_count(); }

// ---------------------------------------------------------------------------
// Synthetic data

struct UniformMarginal {
  double lo = 0;
  double hi = 0;
};

struct CategoricalMarginal {
  std::vector<double> values;
  std::vector<double> weights;
};

using Marginal = std::variant<UniformMarginal, CategoricalMarginal>;

/// target = scale * source + offset with probability `probability`,
/// otherwise an independent draw from the target's marginal.
struct DependencyRule {
  std::string source;
  std::string target;
  double scale = 1.0;
  double offset = 0.0;
  double probability = 1.0;
};

struct CorrelationSpec {
  std::map<std::string, Marginal> marginals;
  std::vector<DependencyRule> rules;
  std::uint64_t seed = 0;
};

/// Deterministic in (schema, n, spec). Rows are drawn with mt19937_64; each
/// row fills columns in dependency order. Throws ConfigError on cyclic rules,
/// probabilities outside [0,1] or columns with no marginal to draw from.
Table generate_table(const TableSchema& schema, std::size_t n, const CorrelationSpec& spec);

// ---------------------------------------------------------------------------
// CSV: one header line `name:kind,...` followed by one line per row.

void write_csv(const Table& table, std::ostream& out);
void save_csv(const Table& table, const std::filesystem::path& path);
Table read_csv(std::string table_name, std::istream& in);
Table load_csv(std::string table_name, const std::filesystem::path& path);

/// Named collection of tables. Iteration order is by table name.
class Catalog {
 public:
  void add(Table table);
  bool contains(std::string_view name) const;
  /// Throws CatalogError for unknown names.
  const Table& table(std::string_view name) const;
  const std::map<std::string, Table, std::less<>>& tables() const { return tables_; }

 private:
  std::map<std::string, Table, std::less<>> tables_;
};

}  // namespace cardlearn
