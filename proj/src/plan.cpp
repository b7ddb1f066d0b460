#include "cardlearn/plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::strong_ordering operator<=>(const ClauseTemplate& a, const ClauseTemplate& b) {
  if (auto c = a.left <=> b.left; c != 0) return c;
  if (auto c = static_cast<int>(a.op) <=> static_cast<int>(b.op); c != 0) return c;
  if (a.right.has_value() != b.right.has_value()) return a.right.has_value() ? std::strong_ordering::greater
                                                                             : std::strong_ordering::less;
  if (!a.right) return std::strong_ordering::equal;
  return *a.right <=> *b.right;
}

ClauseTemplate template_of(const Clause& clause) {
  ClauseTemplate t{clause.left, clause.op, std::nullopt};
  if (!clause.has_constant()) t.right = clause.right_column();
  return t;
}

std::string to_string(const ClauseTemplate& tmpl) {
  return to_string(tmpl.left) + " " + std::string(to_string(tmpl.op)) + " " +
         (tmpl.right ? to_string(*tmpl.right) : std::string("CONST"));
}

ClauseTemplate parse_template(std::string_view text) {
  text = trim(text);
  const auto pos = text.rfind("CONST");
  if (pos != std::string_view::npos && pos + 5 == text.size()) {
    // Substitute a placeholder constant and strip it again.
    const std::string as_clause = std::string(text.substr(0, pos)) + "0";
    return template_of(parse_clause(as_clause));
  }
  return template_of(parse_clause(text));
}

std::string to_string(const EquivalenceClass& cls) {
  std::string out = "{";
  for (std::size_t i = 0; i < cls.members.size(); ++i) out += (i ? "," : "") + to_string(cls.members[i]);
  return out + "}";
}

std::vector<EquivalenceClass> equivalence_classes_of(std::span<const Clause> join_clauses) {
  std::map<ColumnRef, std::size_t> ids;
  std::vector<ColumnRef> refs;
  auto id_of = [&](const ColumnRef& r) {
    auto [it, inserted] = ids.emplace(r, refs.size());
    if (inserted) refs.push_back(r);
    return it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& c : join_clauses) {
    if (!c.is_column_equality()) throw ContractViolation("not a column equality: " + to_string(c));
    edges.emplace_back(id_of(c.left), id_of(c.right_column()));
  }
  std::vector<std::size_t> parent(refs.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : edges) parent[find(a)] = find(b);

  std::map<std::size_t, EquivalenceClass> groups;
  for (std::size_t i = 0; i < refs.size(); ++i) groups[find(i)].members.push_back(refs[i]);
  std::vector<EquivalenceClass> out;
  for (auto& [root, cls] : groups) {
    std::sort(cls.members.begin(), cls.members.end());
    cls.members.erase(std::unique(cls.members.begin(), cls.members.end()), cls.members.end());
    if (cls.members.size() >= 2) out.push_back(std::move(cls));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool clause_less(const Clause& a, const Clause& b) {
  const auto ta = template_of(a), tb = template_of(b);
  if (auto c = ta <=> tb; c != 0) return c < 0;
  if (a.has_constant() && b.has_constant()) return a.constant() < b.constant();
  return false;
}

Clause oriented(Clause c) {
  if (!c.has_constant() && c.right_column() < c.left) {
    ColumnRef r = c.right_column();
    c.right = c.left;
    c.left = std::move(r);
    c.op = mirror(c.op);
  }
  return c;
}

}  // namespace

std::vector<ClauseTemplate> LogicalNode::filter_templates() const {
  std::vector<ClauseTemplate> out;
  out.reserve(clauses.size());
  for (const auto& c : clauses) out.push_back(template_of(c));
  return out;
}

std::vector<double> LogicalNode::bound_constants() const {
  std::vector<double> out;
  for (const auto& c : clauses)
    if (c.has_constant()) out.push_back(c.constant());
  return out;
}

std::size_t LogicalNode::feature_count() const {
  return static_cast<std::size_t>(std::count_if(clauses.begin(), clauses.end(),
                                                [](const Clause& c) { return c.has_constant(); }));
}

LogicalNode make_logical_node(std::vector<std::string> relations, std::span<const Clause> clauses) {
  std::sort(relations.begin(), relations.end());
  relations.erase(std::unique(relations.begin(), relations.end()), relations.end());
  LogicalNode node;
  node.relations = std::move(relations);
  auto check = [&](const ColumnRef& r, const Clause& c) {
    if (!std::binary_search(node.relations.begin(), node.relations.end(), r.table))
      throw UnsupportedClause("clause '" + to_string(c) + "' references table outside the node");
  };

  std::vector<Clause> equalities;
  for (const auto& c : clauses) {
    check(c.left, c);
    if (!c.has_constant()) check(c.right_column(), c);
    if (c.is_column_equality()) {
      if (c.left != c.right_column()) equalities.push_back(c);
    } else {
      node.clauses.push_back(oriented(c));
    }
  }
  for (auto& cls : equivalence_classes_of(equalities)) {
    if (cls.members.size() == 2)
      node.clauses.push_back(Clause{cls.members[0], CompareOp::Eq, cls.members[1]});
    else
      node.equivalence_classes.push_back(std::move(cls));
  }
  std::stable_sort(node.clauses.begin(), node.clauses.end(), clause_less);
  return node;
}

std::string FeatureSpaceKey::short_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : digest) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FeatureSpaceKey feature_space_key(const LogicalNode& node) {
  std::string d = "R[";
  for (std::size_t i = 0; i < node.relations.size(); ++i) d += (i ? "," : "") + node.relations[i];
  d += "] T[";
  const auto templates = node.filter_templates();
  for (std::size_t i = 0; i < templates.size(); ++i) d += (i ? "; " : "") + to_string(templates[i]);
  d += "] E[";
  for (std::size_t i = 0; i < node.equivalence_classes.size(); ++i)
    d += (i ? ";" : "") + to_string(node.equivalence_classes[i]);
  d += "]";
  return {std::move(d)};
}

FeatureVector feature_vector(const LogicalNode& node, const StatsCatalog& stats, std::vector<std::string>* warnings) {
  FeatureVector x(static_cast<Eigen::Index>(node.feature_count()));
  Eigen::Index i = 0;
  for (const auto& c : node.clauses) {
    if (!c.has_constant()) continue;
    double sel = 1.0;
    if (const auto* s = stats.find(c.left))
      sel = clause_selectivity(*s, c).value();
    else if (warnings)
      warnings->push_back("no statistics for " + to_string(c.left) + "; assuming selectivity 1");
    x[i++] = std::log(std::max(sel, kMinSelectivity));
  }
  return x;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PlanOp op) {
  switch (op) {
    case PlanOp::Scan: return "Scan";
    case PlanOp::NestedLoopJoin: return "NestedLoop";
    case PlanOp::HashJoin: return "HashJoin";
    case PlanOp::MergeJoin: return "MergeJoin";
  }
  return "?";
}

namespace {

std::string_view short_code(PlanOp op) {
  switch (op) {
    case PlanOp::Scan: return "S";
    case PlanOp::NestedLoopJoin: return "NL";
    case PlanOp::HashJoin: return "HJ";
    case PlanOp::MergeJoin: return "MJ";
  }
  return "?";
}

std::string join_clauses(const std::vector<Clause>& clauses) {
  std::string out;
  for (std::size_t i = 0; i < clauses.size(); ++i) out += (i ? " AND " : "") + to_string(clauses[i]);
  return out;
}

void explain_into(const PlanNode& plan, int depth, std::string& out) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  out += indent;
  out += depth ? "-> " : "";
  out += to_string(plan.op);
  if (plan.op == PlanOp::Scan) out += " on " + plan.table;
  out += "  (rows=" + format_fixed(plan.estimated_cardinality, 2) + " cost=" + format_fixed(plan.estimated_cost, 2) +
         ")\n";
  if (!plan.clauses.empty()) {
    out += indent + (depth ? "   " : "") + (plan.op == PlanOp::Scan ? "   Filter: " : "   Join Cond: ");
    out += join_clauses(plan.clauses) + "\n";
  }
  if (plan.left) explain_into(*plan.left, depth + 1, out);
  if (plan.right) explain_into(*plan.right, depth + 1, out);
}

}  // namespace

std::string plan_fingerprint(const PlanNode& plan) {
  std::string out(short_code(plan.op));
  out += '(';
  if (plan.op == PlanOp::Scan) {
    out += plan.table;
  } else {
    out += plan_fingerprint(*plan.left);
    out += ',';
    out += plan_fingerprint(*plan.right);
  }
  out += ')';
  return out;
}

std::string explain(const PlanNode& plan) {
  std::string out;
  explain_into(plan, 0, out);
  return out;
}

}  // namespace cardlearn
