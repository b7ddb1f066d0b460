#include "cardlearn/config.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const QueryTemplate& ExperimentConfig::query(const std::string& id) const {
  for (const auto& q : queries)
    if (q.id == id) return q;
  throw ConfigError("unknown query id '" + id + "'");
}

std::vector<QueryTemplate> ExperimentConfig::workload_templates() const {
  if (workload.templates.empty()) return queries;
  std::vector<QueryTemplate> out;
  for (const auto& id : workload.templates) out.push_back(query(id));
  return out;
}

std::uint64_t ExperimentConfig::workload_seed() const { return mix_seed(data.seed ^ 0x5eedf00dULL); }

std::uint64_t ExperimentConfig::table_seed(std::size_t table_index) const {
  return mix_seed(data.seed + 0x100 * (table_index + 1));
}

namespace {

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto part = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!part.empty()) out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

class Parser {
 public:
  Parser(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  ExperimentConfig run() {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      std::string_view text = raw;
      if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
      text = trim(text);
      if (text.empty()) continue;
      if (text.front() == '[') {
        section(text);
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) fail("expected key = value");
      key_ = std::string(trim(text.substr(0, eq)));
      const auto value = trim(text.substr(eq + 1));
      try {
        entry(value);
      } catch (const Error& e) {
        if (std::string_view(e.what()).starts_with(source_ + ":")) throw;
        fail(e.what());
      }
    }
    finish();
    return std::move(config_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + (key_.empty() ? "" : "field '" + key_ + "': ") +
                      what);
  }

  void section(std::string_view text) {
    key_.clear();
    if (text.back() != ']') fail("unterminated section header");
    const auto parts = words(text.substr(1, text.size() - 2));
    if (parts.empty()) fail("empty section header");
    section_ = parts[0];
    static constexpr std::array<std::string_view, 6> simple = {"data", "workload", "learner", "optimizer", "compare",
                                                               "output"};
    if (section_ == "table" || section_ == "query") {
      if (parts.size() != 2) fail("section [" + section_ + "] needs exactly one name");
      if (section_ == "table") {
        for (const auto& t : config_.data.tables)
          if (t.name == parts[1]) fail("table '" + parts[1] + "' declared twice");
        config_.data.tables.push_back(TableConfig{parts[1], {}, 0, {}, {}});
      } else {
        for (const auto& q : config_.queries)
          if (q.id == parts[1]) fail("query '" + parts[1] + "' declared twice");
        config_.queries.push_back(QueryTemplate{parts[1], {}, {}});
      }
      return;
    }
    if (std::find(simple.begin(), simple.end(), section_) == simple.end() || parts.size() != 1)
      fail("unknown section [" + std::string(text.substr(1, text.size() - 2)) + "]");
  }

  double number(std::string_view v) const { return parse_double(v); }

  std::size_t count(std::string_view v, std::size_t min = 0) const {
    const auto n = parse_integer(v);
    if (n < static_cast<long long>(min)) fail("must be >= " + std::to_string(min));
    return static_cast<std::size_t>(n);
  }

  double nonnegative(std::string_view v) const {
    const double x = number(v);
    if (!(x >= 0)) fail("must be >= 0");
    return x;
  }

  bool boolean(std::string_view v) const {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail("expected true or false");
  }

  void entry(std::string_view v) {
    if (section_.empty()) fail("key outside any section");
    if (section_ == "data") return data_entry(v);
    if (section_ == "table") return table_entry(config_.data.tables.back(), v);
    if (section_ == "query") return query_entry(config_.queries.back(), v);
    if (section_ == "workload") return workload_entry(v);
    if (section_ == "learner") return learner_entry(v);
    if (section_ == "optimizer") return optimizer_entry(v);
    if (section_ == "compare") return compare_entry(v);
    if (section_ == "output") return output_entry(v);
  }

  void unknown_key() const { fail("unknown key in [" + section_ + "]"); }

  void data_entry(std::string_view v) {
    auto& d = config_.data;
    if (key_ == "seed")
      d.seed = static_cast<std::uint64_t>(count(v));
    else if (key_ == "buckets")
      d.buckets = count(v, 1);
    else if (key_ == "dir")
      d.dir = std::string(v);
    else
      unknown_key();
  }

  void table_entry(TableConfig& t, std::string_view v) {
    if (key_ == "rows") {
      t.rows = count(v);
    } else if (key_ == "column") {
      column_entry(t, v);
    } else if (key_ == "rule") {
      rule_entry(t, v);
    } else if (key_ == "block") {
      const auto x = v.find(" x ");
      if (x == std::string_view::npos) fail("expected 'COUNT x v1, v2, ...'");
      RowBlock b;
      b.count = count(v.substr(0, x));
      for (const auto& cell : split_list(v.substr(x + 3), ',')) {
        if (cell.find_first_of(".eE") == std::string::npos)
          b.row.emplace_back(static_cast<std::int64_t>(parse_integer(cell)));
        else
          b.row.emplace_back(parse_double(cell));
      }
      t.blocks.push_back(std::move(b));
    } else {
      unknown_key();
    }
  }

  void column_entry(TableConfig& t, std::string_view v) {
    const auto w = words(v);
    if (w.size() < 2) fail("expected 'NAME KIND [uniform LO HI | categorical V:W ...]'");
    ColumnDef col{w[0], parse_column_kind(w[1])};
    if (w.size() > 2) {
      if (w[2] == "uniform") {
        if (w.size() != 5) fail("uniform needs LO and HI");
        UniformMarginal m{number(w[3]), number(w[4])};
        if (!(m.lo <= m.hi)) fail("uniform LO must not exceed HI");
        t.correlation.marginals[col.name] = m;
      } else if (w[2] == "categorical") {
        CategoricalMarginal m;
        for (std::size_t i = 3; i < w.size(); ++i) {
          const auto colon = w[i].find(':');
          if (colon == std::string::npos) fail("categorical entries are VALUE:WEIGHT");
          m.values.push_back(number(std::string_view(w[i]).substr(0, colon)));
          const double weight = number(std::string_view(w[i]).substr(colon + 1));
          if (!(weight >= 0)) fail("categorical weight must be >= 0");
          m.weights.push_back(weight);
        }
        if (m.values.empty()) fail("categorical needs at least one VALUE:WEIGHT");
        t.correlation.marginals[col.name] = m;
      } else {
        fail("unknown distribution '" + w[2] + "'");
      }
    }
    t.columns.push_back(std::move(col));
  }

  // rule = TARGET = [SCALE *] SOURCE [+|- OFFSET] [p PROB]
  void rule_entry(TableConfig& t, std::string_view v) {
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) fail("expected 'TARGET = [SCALE *] SOURCE [+ OFFSET] [p PROB]'");
    DependencyRule rule;
    rule.target = std::string(trim(v.substr(0, eq)));
    auto w = words(v.substr(eq + 1));
    if (w.size() >= 2 && w[w.size() - 2] == "p") {
      const std::string saved = key_;
      key_ = "p";
      rule.probability = number(w.back());
      if (!(rule.probability >= 0 && rule.probability <= 1)) fail("must lie in [0,1]");
      key_ = saved;
      w.resize(w.size() - 2);
    }
    std::size_t i = 0;
    if (w.size() >= 3 && w[1] == "*") {
      rule.scale = number(w[0]);
      i = 2;
    }
    if (i >= w.size()) fail("rule lacks a source column");
    rule.source = w[i++];
    if (i < w.size()) {
      if (i + 2 != w.size() || (w[i] != "+" && w[i] != "-")) fail("malformed rule expression");
      rule.offset = number(w[i + 1]) * (w[i] == "-" ? -1.0 : 1.0);
    }
    t.correlation.rules.push_back(std::move(rule));
  }

  ConstantGenerator generator(std::string_view text) const {
    const auto open = text.find('(');
    if (open == std::string_view::npos) return FixedConstant{number(text)};
    if (text.back() != ')') fail("unterminated constant generator");
    const auto name = trim(text.substr(0, open));
    const auto args = split_list(text.substr(open + 1, text.size() - open - 2), ',');
    if (name == "uniform") {
      if (args.size() != 2) fail("uniform(lo, hi) takes two arguments");
      UniformRealConstant g{number(args[0]), number(args[1])};
      if (!(g.lo <= g.hi)) fail("uniform lo must not exceed hi");
      return g;
    }
    if (name == "uniform_int") {
      if (args.size() != 2) fail("uniform_int(lo, hi) takes two arguments");
      UniformIntConstant g{parse_integer(args[0]), parse_integer(args[1])};
      if (g.lo > g.hi) fail("uniform_int lo must not exceed hi");
      return g;
    }
    if (name == "choice") {
      ChoiceConstant g;
      for (const auto& a : args) g.values.push_back(number(a));
      if (g.values.empty()) fail("choice() needs at least one value");
      return g;
    }
    fail("unknown constant generator '" + std::string(name) + "'");
  }

  void query_entry(QueryTemplate& q, std::string_view v) {
    if (key_ == "relations") {
      q.relations = split_list(v, ',');
      if (q.relations.empty()) fail("needs at least one relation");
      return;
    }
    if (key_ != "clause") unknown_key();
    static constexpr std::array<std::string_view, 8> ops = {"<=", ">=", "<>", "!=", "==", "<", ">", "="};
    std::size_t pos = std::string_view::npos;
    std::string_view op;
    for (auto candidate : ops) {
      const auto p = v.find(candidate);
      if (p != std::string_view::npos && (pos == std::string_view::npos || p < pos)) {
        pos = p;
        op = candidate;
      }
    }
    if (pos == std::string_view::npos) fail("clause has no comparison operator");
    ClauseSpec spec;
    spec.left = parse_column_ref(v.substr(0, pos));
    spec.op = parse_compare_op(op);
    const auto rhs = trim(v.substr(pos + op.size()));
    if (rhs.empty()) fail("clause lacks a right operand");
    const bool is_column = rhs.find('(') == std::string_view::npos && rhs.find('.') != std::string_view::npos &&
                           (std::isalpha(static_cast<unsigned char>(rhs[0])) || rhs[0] == '_');
    if (is_column)
      spec.right = parse_column_ref(rhs);
    else
      spec.right = generator(rhs);
    q.clauses.push_back(std::move(spec));
  }

  void workload_entry(std::string_view v) {
    auto& w = config_.workload;
    if (key_ == "iterations")
      w.iterations = count(v);
    else if (key_ == "templates")
      w.templates = split_list(v, ',');
    else if (key_ == "window")
      w.window = count(v, 1);
    else
      unknown_key();
  }

  void learner_entry(std::string_view v) {
    auto& l = config_.learner;
    if (key_ == "kind") {
      l.kind = parse_learner_kind(v);
    } else if (key_ == "k") {
      l.k = count(v, 1);
    } else if (key_ == "capacity") {
      l.capacity = count(v, 1);
    } else if (key_ == "delta") {
      l.delta = nonnegative(v);
    } else if (key_ == "eta" || key_ == "sgd_eta") {
      const double eta = number(v);
      if (!(eta > 0)) fail("must be > 0");
      (key_ == "eta" ? l.eta : l.sgd_eta) = eta;
    } else if (key_ == "sgd_iterations") {
      l.sgd_iterations = count(v, 1);
    } else {
      unknown_key();
    }
  }

  void optimizer_entry(std::string_view v) {
    auto& o = config_.optimizer;
    if (key_ == "mode")
      config_.mode = parse_estimator_mode(v);
    else if (key_ == "c_tuple")
      o.costs.c_tuple = nonnegative(v);
    else if (key_ == "c_o")
      o.costs.c_o = nonnegative(v);
    else if (key_ == "c_hash")
      o.costs.c_hash = nonnegative(v);
    else if (key_ == "c_startup")
      o.costs.c_startup = nonnegative(v);
    else if (key_ == "cross_products")
      o.cross_products = boolean(v);
    else if (key_ == "max_relations") {
      o.max_relations = count(v, 1);
      if (o.max_relations > 31) fail("must be <= 31");
    } else
      unknown_key();
  }

  void compare_entry(std::string_view v) {
    auto& c = config_.compare;
    if (key_ == "query") {
      c.query = std::string(v);
    } else if (key_ == "observations") {
      c.observations = count(v, 1);
    } else if (key_ == "report_every") {
      c.report_every = count(v, 1);
    } else if (key_ == "final_window") {
      c.final_window = count(v, 1);
    } else if (key_ == "kinds") {
      c.kinds.clear();
      for (const auto& k : split_list(v, ',')) c.kinds.push_back(parse_learner_kind(k));
      if (c.kinds.empty()) fail("needs at least one learner kind");
    } else {
      unknown_key();
    }
  }

  void output_entry(std::string_view v) {
    if (key_ == "dir")
      config_.output.dir = std::string(v);
    else if (key_ == "svg")
      config_.output.svg = boolean(v);
    else
      unknown_key();
  }

  void finish() {
    key_.clear();
    for (const auto& t : config_.data.tables) {
      if (t.columns.empty() && !config_.data.dir)
        throw ConfigError(source_ + ": table '" + t.name + "' declares no columns");
      for (const auto& b : t.blocks)
        if (b.row.size() != t.columns.size())
          throw ConfigError(source_ + ": table '" + t.name + "': block arity differs from the column list");
    }
    for (const auto& q : config_.queries)
      if (q.relations.empty()) throw ConfigError(source_ + ": query '" + q.id + "' has no relations");
    for (const auto& id : config_.workload.templates) (void)config_.query(id);
    if (!config_.compare.query.empty()) (void)config_.query(config_.compare.query);
  }

  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
  std::string section_;
  std::string key_;
  ExperimentConfig config_;
};

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) { return Parser(in, source).run(); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_config(in, path.string());
}

Catalog build_catalog(const ExperimentConfig& config) {
  Catalog catalog;
  for (std::size_t i = 0; i < config.data.tables.size(); ++i) {
    const auto& t = config.data.tables[i];
    if (config.data.dir) {
      catalog.add(load_csv(t.name, *config.data.dir / (t.name + ".csv")));
      continue;
    }
    TableSchema schema(t.name, t.columns);
    if (!t.blocks.empty()) {
      std::vector<Tuple> rows;
      for (const auto& b : t.blocks) rows.insert(rows.end(), b.count, b.row);
      catalog.add(create_table(std::move(schema), rows));
      continue;
    }
    CorrelationSpec spec = t.correlation;
    spec.seed = config.table_seed(i);
    catalog.add(generate_table(schema, t.rows, spec));
  }
  return catalog;
}

}  // namespace cardlearn
