#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "cardlearn/catalog.hpp"
#include "cardlearn/clause.hpp"

namespace cardlearn {

/// Equi-depth histogram: `bounds` holds B+1 nondecreasing edges and bucket i
/// covers [bounds[i], bounds[i+1]] with `counts[i]` source values. Bucket
/// populations differ by at most one.
struct EquiDepthHistogram {
  std::vector<double> bounds;
  std::vector<std::size_t> counts;

  std::size_t buckets() const { return counts.size(); }
  /// Estimated fraction of values strictly below `c`, linear within a bucket.
  double fraction_below(double c) const;
};

struct ColumnStats {
  ColumnRef column;
  EquiDepthHistogram histogram;
  std::size_t n_distinct = 0;
  double min = 0;
  double max = 0;
  std::size_t total_rows = 0;

  bool empty() const { return total_rows == 0; }
};

/// Fraction of a node's input satisfying a predicate; always within [0,1].
class Selectivity {
 public:
  constexpr Selectivity() = default;
  /// Clamps into [0,1].
  constexpr explicit Selectivity(double v) : value_(v < 0 ? 0 : (v > 1 ? 1 : v)) {}
  constexpr double value() const { return value_; }

  friend constexpr bool operator==(Selectivity, Selectivity) = default;

 private:
  double value_ = 1.0;
};

/// Throws CatalogError for an unknown column.
ColumnStats build_column_stats(const Table& table, std::string_view column, std::size_t buckets);

/// Baseline estimate for `column op constant`: equality is 1/n_distinct inside
/// [min,max], ranges interpolate the histogram. Column-to-column clauses throw
/// UnsupportedClause.
Selectivity clause_selectivity(const ColumnStats& stats, const Clause& clause);

/// Product of the inputs; 1 for an empty sequence.
Selectivity independence_node_selectivity(std::span<const Selectivity> clause_selectivities);

/// Statistics for every column of every table in a catalog.
class StatsCatalog {
 public:
  StatsCatalog() = default;
  StatsCatalog(const Catalog& catalog, std::size_t buckets);

  void add(ColumnStats stats);
  const ColumnStats* find(const ColumnRef& column) const;
  const std::map<ColumnRef, ColumnStats>& columns() const { return columns_; }

 private:
  std::map<ColumnRef, ColumnStats> columns_;
};

/// One line per column: `table,column,n_distinct,min,max,rows,edges...`.
void write_stats_csv(const StatsCatalog& stats, std::ostream& out);

}  // namespace cardlearn
