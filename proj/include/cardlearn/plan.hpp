#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cardlearn/clause.hpp"
#include "cardlearn/stats.hpp"

namespace cardlearn {

/// A clause with its constant erased. `right == nullopt` is the CONST marker.
struct ClauseTemplate {
  ColumnRef left;
  CompareOp op = CompareOp::Eq;
  std::optional<ColumnRef> right;

  bool has_constant_slot() const { return !right.has_value(); }

  friend bool operator==(const ClauseTemplate&, const ClauseTemplate&) = default;
  /// Canonical order: (table, column, operator rank, CONST before column, right column).
  friend std::strong_ordering operator<=>(const ClauseTemplate& a, const ClauseTemplate& b);
};

ClauseTemplate template_of(const Clause& clause);
std::string to_string(const ClauseTemplate& tmpl);
/// Inverse of to_string(ClauseTemplate): `t.a < CONST` or `t.a = u.b`.
ClauseTemplate parse_template(std::string_view text);

/// Columns tied together by equality join clauses; members sorted, size >= 2.
struct EquivalenceClass {
  std::vector<ColumnRef> members;

  friend auto operator<=>(const EquivalenceClass&, const EquivalenceClass&) = default;
  friend bool operator==(const EquivalenceClass&, const EquivalenceClass&) = default;
};

std::string to_string(const EquivalenceClass& cls);

/// Connected components of column equalities, in canonical order. Throws
/// ContractViolation if a clause is not `column = column`.
std::vector<EquivalenceClass> equivalence_classes_of(std::span<const Clause> join_clauses);

/// Canonical description of one plan node: which relations it covers and
/// which predicates hold on its output.
///
/// Column equalities are folded into equivalence classes. A class of two
/// columns stays an ordinary `a = b` clause; larger classes are kept as a
/// single set-equality marker in `equivalence_classes` and carry no feature.
/// `clauses` is sorted by (template, constant) so that every permutation of the
/// same predicate set yields the same node.
struct LogicalNode {
  std::vector<std::string> relations;
  std::vector<Clause> clauses;
  std::vector<EquivalenceClass> equivalence_classes;

  std::vector<ClauseTemplate> filter_templates() const;
  /// Constants of the constant-bearing clauses, in canonical order.
  std::vector<double> bound_constants() const;
  std::size_t feature_count() const;

  friend bool operator==(const LogicalNode&, const LogicalNode&) = default;
};

/// Canonicalises an arbitrary clause list over `relations`. Throws
/// UnsupportedClause when a clause references a table outside `relations`.
LogicalNode make_logical_node(std::vector<std::string> relations, std::span<const Clause> clauses);

/// Identity of a feature space: canonical serialisation of
/// (relations, filter templates, equivalence classes).
struct FeatureSpaceKey {
  std::string digest;

  /// 64-bit FNV-1a of the digest, rendered as 16 hex digits; for logs.
  std::string short_hash() const;

  friend auto operator<=>(const FeatureSpaceKey&, const FeatureSpaceKey&) = default;
  friend bool operator==(const FeatureSpaceKey&, const FeatureSpaceKey&) = default;
};

FeatureSpaceKey feature_space_key(const LogicalNode& node);

using FeatureVector = Eigen::VectorXd;

/// Selectivities below this are clamped before taking the logarithm.
inline constexpr double kMinSelectivity = 1e-9;

/// ln(max(selectivity, 1e-9)) of every constant-bearing clause in canonical
/// order. Clauses on columns without statistics use selectivity 1 and append
/// a message to `warnings` when given.
FeatureVector feature_vector(const LogicalNode& node, const StatsCatalog& stats,
                             std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Physical plans

enum class PlanOp { Scan, NestedLoopJoin, HashJoin, MergeJoin };

std::string_view to_string(PlanOp op);

struct PlanNode;
using PhysicalPlan = std::shared_ptr<const PlanNode>;

/// Immutable physical operator tree. Subtrees are shared between memo entries.
struct PlanNode {
  PlanOp op = PlanOp::Scan;
  std::string table;             // scan only
  std::vector<Clause> clauses;   // scan filters, or predicates joining the two inputs
  PhysicalPlan left;
  PhysicalPlan right;
  LogicalNode logical;           // what this node's output means
  double estimated_cardinality = 1.0;
  double node_cost = 0.0;
  double estimated_cost = 0.0;   // node_cost plus both subtrees

  bool is_join() const { return op != PlanOp::Scan; }
};

/// Canonical operator/shape serialisation, e.g. `HJ(S(t),S(u))`.
std::string plan_fingerprint(const PlanNode& plan);

/// Indented EXPLAIN-style text; one line per node plus its predicates.
std::string explain(const PlanNode& plan);

/// Visits nodes in pre-order with their path (`""` root, then `L`/`R` steps).
template <typename Visitor>
void for_each_node(const PlanNode& plan, Visitor&& visit, const std::string& path = "") {
  visit(plan, path);
  if (plan.left) for_each_node(*plan.left, visit, path + "L");
  if (plan.right) for_each_node(*plan.right, visit, path + "R");
}

}  // namespace cardlearn
