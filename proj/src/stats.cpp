#include "cardlearn/stats.hpp"

#include <algorithm>
#include <ostream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

double EquiDepthHistogram::fraction_below(double c) const {
  if (counts.empty() || c <= bounds.front()) return 0.0;
  if (c > bounds.back()) return 1.0;
  std::size_t total = 0;
  for (auto n : counts) total += n;
  std::size_t before = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double lo = bounds[i], hi = bounds[i + 1];
    if (c <= hi) {
      const double within = hi > lo ? (c - lo) / (hi - lo) : 1.0;
      return (static_cast<double>(before) + within * static_cast<double>(counts[i])) / static_cast<double>(total);
    }
    before += counts[i];
  }
  return 1.0;
}

ColumnStats build_column_stats(const Table& table, std::string_view column, std::size_t buckets) {
  if (buckets == 0) throw ContractViolation("histogram needs at least one bucket");
  const std::size_t index = table.schema().index_of(column);
  ColumnStats stats;
  stats.column = {table.name(), std::string(column)};
  std::vector<double> values = table.column_values(index);
  stats.total_rows = values.size();
  if (values.empty()) return stats;

  std::sort(values.begin(), values.end());
  stats.min = values.front();
  stats.max = values.back();
  stats.n_distinct = static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
  // unique() scrambled the tail; re-sort is cheaper than copying up front.
  values = table.column_values(index);
  std::sort(values.begin(), values.end());

  const std::size_t n = values.size();
  const std::size_t b = std::min(buckets, n);
  auto& h = stats.histogram;
  h.bounds.reserve(b + 1);
  h.counts.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t start = i * n / b;
    const std::size_t end = (i + 1) * n / b;
    h.bounds.push_back(values[start]);
    h.counts.push_back(end - start);
  }
  h.bounds.push_back(values.back());
  return stats;
}

namespace {

double fraction_less(const ColumnStats& s, double c) {
  if (c <= s.min) return 0.0;
  if (c > s.max) return 1.0;
  return s.histogram.fraction_below(c);
}

double fraction_equal(const ColumnStats& s, double c) {
  if (c < s.min || c > s.max) return 0.0;
  return 1.0 / static_cast<double>(s.n_distinct);
}

}  // namespace

Selectivity clause_selectivity(const ColumnStats& stats, const Clause& clause) {
  if (!clause.has_constant())
    throw UnsupportedClause("column comparison '" + to_string(clause) + "' is a join predicate");
  if (stats.empty()) return Selectivity(0.0);
  const double c = clause.constant();
  switch (clause.op) {
    case CompareOp::Lt: return Selectivity(fraction_less(stats, c));
    case CompareOp::Le: return Selectivity(fraction_less(stats, c) + fraction_equal(stats, c));
    case CompareOp::Gt: return Selectivity(1.0 - fraction_less(stats, c) - fraction_equal(stats, c));
    case CompareOp::Ge: return Selectivity(1.0 - fraction_less(stats, c));
    case CompareOp::Eq: return Selectivity(fraction_equal(stats, c));
    case CompareOp::Ne: return Selectivity(1.0 - fraction_equal(stats, c));
  }
  return Selectivity(1.0);
}

Selectivity independence_node_selectivity(std::span<const Selectivity> clause_selectivities) {
  double product = 1.0;
  for (auto s : clause_selectivities) product *= s.value();
  return Selectivity(product);
}

StatsCatalog::StatsCatalog(const Catalog& catalog, std::size_t buckets) {
  for (const auto& [name, table] : catalog.tables())
    for (const auto& col : table.schema().columns()) add(build_column_stats(table, col.name, buckets));
}

void StatsCatalog::add(ColumnStats stats) {
  auto key = stats.column;
  columns_.insert_or_assign(std::move(key), std::move(stats));
}

const ColumnStats* StatsCatalog::find(const ColumnRef& column) const {
  auto it = columns_.find(column);
  return it == columns_.end() ? nullptr : &it->second;
}

void write_stats_csv(const StatsCatalog& stats, std::ostream& out) {
  out << "table,column,n_distinct,min,max,rows,edges\n";
  for (const auto& [ref, s] : stats.columns()) {
    out << ref.table << ',' << ref.column << ',' << s.n_distinct << ',' << format_double(s.min) << ','
        << format_double(s.max) << ',' << s.total_rows;
    for (double e : s.histogram.bounds) out << ',' << format_double(e);
    out << '\n';
  }
}

}  // namespace cardlearn
