#include "cardlearn/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::string_view to_string(ColumnKind kind) { return kind == ColumnKind::Integer ? "int" : "real"; }

ColumnKind parse_column_kind(std::string_view text) {
  text = trim(text);
  if (text == "int" || text == "integer") return ColumnKind::Integer;
  if (text == "real" || text == "double") return ColumnKind::Real;
  throw CatalogError("unknown column kind '" + std::string(text) + "'");
}

TableSchema::TableSchema(std::string name, std::vector<ColumnDef> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  if (columns_.empty()) throw CatalogError("table '" + name_ + "' has no columns");
  std::set<std::string_view> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c.name).second)
      throw CatalogError("table '" + name_ + "' declares column '" + c.name + "' twice");
  }
}

std::optional<std::size_t> TableSchema::find(std::string_view column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == column) return i;
  return std::nullopt;
}

std::size_t TableSchema::index_of(std::string_view column) const {
  if (auto i = find(column)) return *i;
  throw CatalogError("table '" + name_ + "' has no column '" + std::string(column) + "'");
}

std::vector<double> Table::column_values(std::size_t column) const {
  std::vector<double> out;
  out.reserve(row_count());
  for (std::size_t r = 0; r < row_count(); ++r) out.push_back(at(r, column));
  return out;
}

Table make_table_unchecked(TableSchema schema, std::vector<double> cells) {
  Table t;
  t.schema_ = std::move(schema);
  t.cells_ = std::move(cells);
  return t;
}

Table create_table(TableSchema schema, const std::vector<Tuple>& rows) {
  std::vector<double> cells;
  cells.reserve(rows.size() * schema.arity());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != schema.arity())
      throw SchemaViolation(i, "expected " + std::to_string(schema.arity()) + " values, got " +
                                   std::to_string(row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& col = schema.columns()[c];
      if (col.kind == ColumnKind::Integer) {
        if (!std::holds_alternative<std::int64_t>(row[c]))
          throw SchemaViolation(i, "column '" + col.name + "' expects an integer");
        cells.push_back(static_cast<double>(std::get<std::int64_t>(row[c])));
      } else {
        cells.push_back(std::visit([](auto v) { return static_cast<double>(v); }, row[c]));
      }
    }
  }
  return make_table_unchecked(std::move(schema), std::move(cells));
}

// ---------------------------------------------------------------------------

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw_marginal(const Marginal& m, ColumnKind kind, std::mt19937_64& rng) {
  if (const auto* u = std::get_if<UniformMarginal>(&m)) {
    const double r = uniform01(rng);
    if (kind == ColumnKind::Integer) {
      const double lo = std::ceil(u->lo), hi = std::floor(u->hi);
      return std::min(hi, lo + std::floor(r * (hi - lo + 1)));
    }
    return u->lo + r * (u->hi - u->lo);
  }
  const auto& cat = std::get<CategoricalMarginal>(m);
  const double total = std::accumulate(cat.weights.begin(), cat.weights.end(), 0.0);
  double r = uniform01(rng) * total;
  for (std::size_t i = 0; i < cat.values.size(); ++i) {
    if (r < cat.weights[i]) return cat.values[i];
    r -= cat.weights[i];
  }
  return cat.values.back();
}

void validate_marginal(const std::string& column, const Marginal& m, ColumnKind kind) {
  if (const auto* u = std::get_if<UniformMarginal>(&m)) {
    if (!(u->lo <= u->hi)) throw ConfigError("column '" + column + "': uniform lo > hi");
    if (kind == ColumnKind::Integer && std::ceil(u->lo) > std::floor(u->hi))
      throw ConfigError("column '" + column + "': uniform range holds no integer");
    return;
  }
  const auto& cat = std::get<CategoricalMarginal>(m);
  if (cat.values.empty() || cat.values.size() != cat.weights.size())
    throw ConfigError("column '" + column + "': categorical values and weights must be nonempty and equal length");
  double total = 0;
  for (double w : cat.weights) {
    if (!(w >= 0)) throw ConfigError("column '" + column + "': negative categorical weight");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("column '" + column + "': categorical weights sum to zero");
  if (kind == ColumnKind::Integer)
    for (double v : cat.values)
      if (v != std::floor(v)) throw ConfigError("column '" + column + "': non-integral categorical value");
}

}  // namespace

Table generate_table(const TableSchema& schema, std::size_t n, const CorrelationSpec& spec) {
  const std::size_t arity = schema.arity();
  std::vector<const DependencyRule*> rule_for(arity, nullptr);
  std::vector<std::size_t> source_of(arity, 0);
  for (const auto& rule : spec.rules) {
    if (!(rule.probability >= 0.0 && rule.probability <= 1.0))
      throw ConfigError("rule " + rule.target + " <- " + rule.source + ": probability outside [0,1]");
    const auto target = schema.find(rule.target);
    const auto source = schema.find(rule.source);
    if (!target || !source)
      throw ConfigError("rule " + rule.target + " <- " + rule.source + " references an unknown column");
    if (rule_for[*target]) throw ConfigError("column '" + rule.target + "' is the target of two rules");
    rule_for[*target] = &rule;
    source_of[*target] = *source;
  }

  // Kahn's algorithm over the source -> target edges.
  std::vector<int> indegree(arity, 0);
  for (std::size_t c = 0; c < arity; ++c)
    if (rule_for[c]) ++indegree[c];
  std::vector<std::size_t> order;
  std::vector<bool> done(arity, false);
  while (order.size() < arity) {
    bool progressed = false;
    for (std::size_t c = 0; c < arity; ++c) {
      if (done[c]) continue;
      if (!rule_for[c] || done[source_of[c]]) {
        done[c] = true;
        order.push_back(c);
        progressed = true;
      }
    }
    if (!progressed) throw ConfigError("dependency rules of table '" + schema.name() + "' form a cycle");
  }

  // Marginal used for independent draws; rule targets may inherit from their source.
  std::vector<const Marginal*> marginal(arity, nullptr);
  for (std::size_t c : order) {
    const auto& col = schema.columns()[c];
    if (auto it = spec.marginals.find(col.name); it != spec.marginals.end()) {
      validate_marginal(col.name, it->second, col.kind);
      marginal[c] = &it->second;
    } else if (rule_for[c]) {
      marginal[c] = marginal[source_of[c]];
    }
    if (!marginal[c]) throw ConfigError("column '" + col.name + "' has no marginal distribution");
  }
  for (const auto& [name, m] : spec.marginals)
    if (!schema.find(name)) throw ConfigError("marginal given for unknown column '" + name + "'");

  std::mt19937_64 rng(spec.seed);
  std::vector<double> cells(n * arity);
  for (std::size_t r = 0; r < n; ++r) {
    double* row = cells.data() + r * arity;
    for (std::size_t c : order) {
      const auto kind = schema.columns()[c].kind;
      if (const auto* rule = rule_for[c]) {
        if (uniform01(rng) < rule->probability) {
          double v = rule->scale * row[source_of[c]] + rule->offset;
          row[c] = kind == ColumnKind::Integer ? std::round(v) : v;
          continue;
        }
      }
      row[c] = draw_marginal(*marginal[c], kind, rng);
    }
  }
  return make_table_unchecked(schema, std::move(cells));
}

// ---------------------------------------------------------------------------

void write_csv(const Table& table, std::ostream& out) {
  const auto& cols = table.schema().columns();
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << cols[c].name << ':' << to_string(cols[c].kind);
  out << '\n';
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ',';
      const double v = table.at(r, c);
      if (cols[c].kind == ColumnKind::Integer)
        out << static_cast<long long>(v);
      else
        out << format_double(v);
    }
    out << '\n';
  }
}

void save_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CatalogError("cannot write " + path.string());
  write_csv(table, out);
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

Table read_csv(std::string table_name, std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CatalogError("table '" + table_name + "': missing CSV header");
  std::vector<ColumnDef> columns;
  for (auto field : split(trim(line), ',')) {
    const auto colon = field.find(':');
    if (colon == std::string_view::npos)
      throw CatalogError("table '" + table_name + "': header field '" + std::string(field) + "' lacks ':kind'");
    columns.push_back({std::string(trim(field.substr(0, colon))), parse_column_kind(field.substr(colon + 1))});
  }
  TableSchema schema(std::move(table_name), std::move(columns));
  std::vector<Tuple> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    Tuple row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        if (c < schema.arity() && schema.columns()[c].kind == ColumnKind::Integer)
          row.emplace_back(static_cast<std::int64_t>(parse_integer(fields[c])));
        else
          row.emplace_back(parse_double(fields[c]));
      } catch (const Error& e) {
        throw SchemaViolation(rows.size(), e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  return create_table(std::move(schema), rows);
}

Table load_csv(std::string table_name, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CatalogError("cannot read " + path.string());
  return read_csv(std::move(table_name), in);
}

void Catalog::add(Table table) {
  std::string name = table.name();
  tables_.insert_or_assign(std::move(name), std::move(table));
}

bool Catalog::contains(std::string_view name) const { return tables_.find(name) != tables_.end(); }

const Table& Catalog::table(std::string_view name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw CatalogError("unknown table '" + std::string(name) + "'");
  return it->second;
}

}  // namespace cardlearn
