#include "cardlearn/executor.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::vector<std::string> RowSet::canonical_rows() const {
  std::vector<std::size_t> order(tables.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return tables[a] < tables[b]; });
  std::vector<std::string> rows;
  rows.reserve(size());
  for (std::size_t r = 0; r < size(); ++r) {
    std::string row;
    for (auto slot : order) row += tables[slot] + ":" + std::to_string(ids[r * tables.size() + slot]) + ",";
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

namespace {

using Ids = std::span<const std::uint32_t>;

struct ColumnAccess {
  int side = 0;
  std::size_t slot = 0;
  const Table* table = nullptr;
  std::size_t column = 0;

  double get(Ids left, Ids right) const { return table->at((side ? right : left)[slot], column); }
};

struct CompiledPredicate {
  ColumnAccess lhs;
  CompareOp op = CompareOp::Eq;
  std::optional<ColumnAccess> rhs;
  double constant = 0;

  bool holds(Ids left, Ids right) const {
    return evaluate(op, lhs.get(left, right), rhs ? rhs->get(left, right) : constant);
  }
  /// Equality whose operands sit on opposite sides.
  bool is_cross_equality() const { return rhs && op == CompareOp::Eq && lhs.side != rhs->side; }
};

ColumnAccess resolve(const ColumnRef& ref, const std::vector<std::string>& left, const std::vector<std::string>& right,
                     const Catalog& catalog) {
  ColumnAccess a;
  auto slot_in = [&](const std::vector<std::string>& tables) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i] == ref.table) return i;
    return std::nullopt;
  };
  if (auto s = slot_in(left)) {
    a.side = 0;
    a.slot = *s;
  } else if (auto s2 = slot_in(right)) {
    a.side = 1;
    a.slot = *s2;
  } else {
    throw ExecutionError("column " + to_string(ref) + " is not produced by the operator inputs");
  }
  try {
    a.table = &catalog.table(ref.table);
    a.column = a.table->schema().index_of(ref.column);
  } catch (const CatalogError& e) {
    throw ExecutionError(e.what());
  }
  return a;
}

std::vector<CompiledPredicate> compile(const std::vector<Clause>& clauses, const std::vector<std::string>& left,
                                       const std::vector<std::string>& right, const Catalog& catalog) {
  std::vector<CompiledPredicate> out;
  for (const auto& c : clauses) {
    CompiledPredicate p;
    p.lhs = resolve(c.left, left, right, catalog);
    p.op = c.op;
    if (c.has_constant())
      p.constant = c.constant();
    else
      p.rhs = resolve(c.right_column(), left, right, catalog);
    out.push_back(p);
  }
  return out;
}

bool all_hold(const std::vector<CompiledPredicate>& preds, Ids left, Ids right) {
  for (const auto& p : preds)
    if (!p.holds(left, right)) return false;
  return true;
}

RowSet scan(const std::string& table_name, const std::vector<Clause>& clauses, const Catalog& catalog) {
  const Table* table = nullptr;
  try {
    table = &catalog.table(table_name);
  } catch (const CatalogError& e) {
    throw ExecutionError(e.what());
  }
  RowSet out;
  out.tables = {table_name};
  const auto preds = compile(clauses, out.tables, {}, catalog);
  for (std::uint32_t r = 0; r < table->row_count(); ++r) {
    const std::uint32_t id[1] = {r};
    if (all_hold(preds, id, {})) out.ids.push_back(r);
  }
  return out;
}

struct KeyHash {
  std::size_t operator()(const std::vector<double>& key) const noexcept {
    std::size_t h = 0;
    for (double v : key) h = h * 1000003u ^ std::hash<double>{}(v + 0.0);
    return h;
  }
};

/// Left/right key extractors for the cross-side equalities.
struct EquiKeys {
  std::vector<ColumnAccess> left, right;

  void fill(const std::vector<ColumnAccess>& cols, Ids ids, std::vector<double>& key) const {
    key.clear();
    for (const auto& c : cols) key.push_back(c.get(ids, ids) + 0.0);
  }
};

EquiKeys equi_keys(const std::vector<CompiledPredicate>& preds) {
  EquiKeys k;
  for (const auto& p : preds) {
    if (!p.is_cross_equality()) continue;
    ColumnAccess l = p.lhs.side == 0 ? p.lhs : *p.rhs;
    ColumnAccess r = p.lhs.side == 0 ? *p.rhs : p.lhs;
    // Keys are read from one side's ids only.
    l.side = 0;
    r.side = 0;
    k.left.push_back(l);
    k.right.push_back(r);
  }
  return k;
}

RowSet join(const RowSet& left, const RowSet& right, const std::vector<Clause>& clauses, PlanOp op,
            const Catalog& catalog) {
  RowSet out;
  out.tables = left.tables;
  out.tables.insert(out.tables.end(), right.tables.begin(), right.tables.end());
  const auto preds = compile(clauses, left.tables, right.tables, catalog);
  const std::size_t ls = left.tables.size(), rs = right.tables.size();
  auto row_of = [](const RowSet& set, std::size_t stride, std::size_t i) { return Ids(set.ids.data() + i * stride, stride); };
  auto emit = [&](Ids l, Ids r) {
    out.ids.insert(out.ids.end(), l.begin(), l.end());
    out.ids.insert(out.ids.end(), r.begin(), r.end());
  };

  if (op == PlanOp::NestedLoopJoin) {
    for (std::size_t i = 0; i < left.size(); ++i) {
      const Ids l = row_of(left, ls, i);
      for (std::size_t j = 0; j < right.size(); ++j) {
        const Ids r = row_of(right, rs, j);
        if (all_hold(preds, l, r)) emit(l, r);
      }
    }
    return out;
  }

  const EquiKeys keys = equi_keys(preds);
  if (keys.left.empty()) throw ExecutionError(std::string(to_string(op)) + " needs an equality join predicate");

  if (op == PlanOp::HashJoin) {
    std::unordered_map<std::vector<double>, std::vector<std::uint32_t>, KeyHash> table;
    std::vector<double> key;
    for (std::size_t j = 0; j < right.size(); ++j) {
      keys.fill(keys.right, row_of(right, rs, j), key);
      table[key].push_back(static_cast<std::uint32_t>(j));
    }
    for (std::size_t i = 0; i < left.size(); ++i) {
      const Ids l = row_of(left, ls, i);
      keys.fill(keys.left, l, key);
      auto it = table.find(key);
      if (it == table.end()) continue;
      for (auto j : it->second) {
        const Ids r = row_of(right, rs, j);
        if (all_hold(preds, l, r)) emit(l, r);
      }
    }
    return out;
  }

  // Merge join: sort both inputs on the key, then pair equal-key runs.
  auto sorted = [&](const RowSet& set, std::size_t stride, const std::vector<ColumnAccess>& cols) {
    std::vector<std::pair<std::vector<double>, std::uint32_t>> rows(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      keys.fill(cols, row_of(set, stride, i), rows[i].first);
      rows[i].second = static_cast<std::uint32_t>(i);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  const auto lrows = sorted(left, ls, keys.left);
  const auto rrows = sorted(right, rs, keys.right);
  std::size_t i = 0, j = 0;
  while (i < lrows.size() && j < rrows.size()) {
    if (lrows[i].first < rrows[j].first) {
      ++i;
    } else if (rrows[j].first < lrows[i].first) {
      ++j;
    } else {
      std::size_t i_end = i, j_end = j;
      while (i_end < lrows.size() && lrows[i_end].first == lrows[i].first) ++i_end;
      while (j_end < rrows.size() && rrows[j_end].first == rrows[j].first) ++j_end;
      for (std::size_t a = i; a < i_end; ++a) {
        const Ids l = row_of(left, ls, lrows[a].second);
        for (std::size_t b = j; b < j_end; ++b) {
          const Ids r = row_of(right, rs, rrows[b].second);
          if (all_hold(preds, l, r)) emit(l, r);
        }
      }
      i = i_end;
      j = j_end;
    }
  }
  return out;
}

RowSet evaluate_recording(const PlanNode& plan, const Catalog& catalog,
                          const std::function<void(const PlanNode&, const RowSet&)>& record) {
  RowSet result;
  if (plan.op == PlanOp::Scan) {
    result = scan(plan.table, plan.clauses, catalog);
  } else {
    if (!plan.left || !plan.right) throw ExecutionError("join node without two inputs");
    const RowSet l = evaluate_recording(*plan.left, catalog, record);
    const RowSet r = evaluate_recording(*plan.right, catalog, record);
    result = join(l, r, plan.clauses, plan.op, catalog);
  }
  record(plan, result);
  return result;
}

/// Every predicate the node asserts, with equivalence classes spelled out as chains.
std::vector<Clause> explicit_predicates(const LogicalNode& node) {
  std::vector<Clause> preds = node.clauses;
  for (const auto& cls : node.equivalence_classes)
    for (std::size_t i = 0; i + 1 < cls.members.size(); ++i)
      preds.push_back(Clause{cls.members[i], CompareOp::Eq, cls.members[i + 1]});
  return preds;
}

bool single_table(const Clause& c) { return c.has_constant() || c.left.table == c.right_column().table; }

}  // namespace

RowSet evaluate_plan(const PlanNode& plan, const Catalog& catalog) {
  return evaluate_recording(plan, catalog, [](const PlanNode&, const RowSet&) {});
}

ExecutionResult execute_plan(const PlanNode& plan, const Catalog& catalog, const StatsCatalog& stats,
                             const CostConstants& constants) {
  std::unordered_map<const PlanNode*, std::uint64_t> counts;
  const RowSet out = evaluate_recording(plan, catalog, [&](const PlanNode& node, const RowSet& rows) {
    counts[&node] = rows.size();
  });

  ExecutionResult result;
  result.output_rows = out.size();
  // Costed like the optimizer sees cardinalities: clamped to at least one row.
  auto card_of = [&](const PlanNode* node) { return std::max(1.0, static_cast<double>(counts.at(node))); };
  std::function<double(const PlanNode&)> cost = [&](const PlanNode& node) -> double {
    const double card = card_of(&node);
    if (node.op == PlanOp::Scan)
      return node_cost(PlanOp::Scan, static_cast<double>(catalog.table(node.table).row_count()), 0, card, constants);
    const double l = cost(*node.left), r = cost(*node.right);
    return l + r +
           node_cost(node.op, card_of(node.left.get()), card_of(node.right.get()), card, constants);
  };
  result.simulated_cost = cost(plan);
  for_each_node(plan, [&](const PlanNode& node, const std::string& path) {
    NodeObservation obs;
    obs.key = feature_space_key(node.logical);
    obs.features = feature_vector(node.logical, stats);
    obs.true_cardinality = counts.at(&node);
    obs.path = path;
    obs.estimated_cardinality = node.estimated_cardinality;
    result.observations.push_back(std::move(obs));
  });
  return result;
}

std::uint64_t true_cardinality_oracle(const LogicalNode& node, const Catalog& catalog) {
  const auto& rels = node.relations;
  const auto preds = explicit_predicates(node);
  auto depth_of = [&](const std::string& table) {
    return static_cast<std::size_t>(std::find(rels.begin(), rels.end(), table) - rels.begin());
  };

  std::vector<const Table*> tables;
  std::vector<std::vector<std::uint32_t>> candidates(rels.size());
  std::vector<std::vector<const Clause*>> check_at(rels.size());
  for (const auto& r : rels) tables.push_back(&catalog.table(r));
  for (const auto& c : preds) {
    std::size_t d = depth_of(c.left.table);
    if (!c.has_constant()) d = std::max(d, depth_of(c.right_column().table));
    if (d >= rels.size()) throw ExecutionError("predicate " + to_string(c) + " references a table outside the node");
    check_at[d].push_back(&c);
  }

  std::vector<std::uint32_t> bound(rels.size());
  auto value = [&](const ColumnRef& ref) {
    const std::size_t d = depth_of(ref.table);
    return tables[d]->at(bound[d], tables[d]->schema().index_of(ref.column));
  };
  auto holds = [&](const Clause& c) {
    return evaluate(c.op, value(c.left), c.has_constant() ? c.constant() : value(c.right_column()));
  };

  // Per-table filtering first; multi-table predicates during enumeration.
  for (std::size_t d = 0; d < rels.size(); ++d) {
    for (std::uint32_t r = 0; r < tables[d]->row_count(); ++r) {
      bound[d] = r;
      bool ok = true;
      for (const Clause* c : check_at[d])
        if (single_table(*c) && !holds(*c)) {
          ok = false;
          break;
        }
      if (ok) candidates[d].push_back(r);
    }
  }

  std::function<std::uint64_t(std::size_t)> count = [&](std::size_t d) -> std::uint64_t {
    if (d == rels.size()) return 1;
    std::uint64_t total = 0;
    for (auto r : candidates[d]) {
      bound[d] = r;
      bool ok = true;
      for (const Clause* c : check_at[d])
        if (!single_table(*c) && !holds(*c)) {
          ok = false;
          break;
        }
      if (ok) total += count(d + 1);
    }
    return total;
  };
  return count(0);
}

std::uint64_t TrueCardinalityModel::count(const LogicalNode& node) const {
  std::string id = feature_space_key(node).digest + " |";
  for (double c : node.bound_constants()) id += " " + format_double(c);
  if (auto it = cache_.find(id); it != cache_.end()) return it->second;

  const auto preds = explicit_predicates(node);
  std::vector<RowSet> inputs;
  for (const auto& r : node.relations) {
    std::vector<Clause> local;
    for (const auto& c : preds)
      if (single_table(c) && c.left.table == r) local.push_back(c);
    inputs.push_back(scan(r, local, catalog_));
  }

  RowSet current = std::move(inputs[0]);
  std::vector<bool> used(node.relations.size(), false);
  used[0] = true;
  auto in_current = [&](const std::string& t) {
    return std::find(current.tables.begin(), current.tables.end(), t) != current.tables.end();
  };
  for (std::size_t step = 1; step < node.relations.size(); ++step) {
    // Prefer a relation reachable by an equality so the join can hash.
    std::size_t next = node.relations.size();
    for (std::size_t i = 0; i < node.relations.size() && next == node.relations.size(); ++i) {
      if (used[i]) continue;
      for (const auto& c : preds)
        if (c.is_column_equality() && !single_table(c) &&
            ((c.left.table == node.relations[i] && in_current(c.right_column().table)) ||
             (c.right_column().table == node.relations[i] && in_current(c.left.table)))) {
          next = i;
          break;
        }
    }
    if (next == node.relations.size())
      next = static_cast<std::size_t>(std::find(used.begin(), used.end(), false) - used.begin());
    const std::string& t = node.relations[next];
    std::vector<Clause> join_preds;
    bool equi = false;
    for (const auto& c : preds) {
      if (single_table(c)) continue;
      const auto& a = c.left.table;
      const auto& b = c.right_column().table;
      if ((a == t && in_current(b)) || (b == t && in_current(a))) {
        join_preds.push_back(c);
        equi = equi || c.op == CompareOp::Eq;
      }
    }
    current = join(current, inputs[next], join_preds, equi ? PlanOp::HashJoin : PlanOp::NestedLoopJoin, catalog_);
    used[next] = true;
  }
  const std::uint64_t n = current.size();
  cache_.emplace(std::move(id), n);
  return n;
}

double TrueCardinalityModel::cardinality(const LogicalNode& node) const {
  return std::max(1.0, static_cast<double>(count(node)));
}

void write_observation_csv_header(std::ostream& out) {
  out << "space_digest,coordinates,true_cardinality,query,iteration\n";
}

void append_observations_csv(std::ostream& out, const std::vector<NodeObservation>& observations,
                             const std::string& query_id, std::size_t iteration) {
  for (const auto& o : observations) {
    out << o.key.short_hash() << ',';
    for (Eigen::Index i = 0; i < o.features.size(); ++i) out << (i ? ";" : "") << format_double(o.features[i]);
    out << ',' << o.true_cardinality << ',' << query_id << ',' << iteration << '\n';
  }
}

}  // namespace cardlearn
