#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cardlearn/catalog.hpp"
#include "cardlearn/learner.hpp"
#include "cardlearn/plan.hpp"
#include "cardlearn/stats.hpp"

namespace cardlearn {

struct CostConstants {
  double c_tuple = 1.0;    // per tuple emitted or scanned
  double c_o = 1.0;        // per comparison
  double c_hash = 2.0;     // per tuple hashed or probed
  double c_startup = 0.0;  // per join node

  friend bool operator==(const CostConstants&, const CostConstants&) = default;
};

/// 1.39 n log2(n) c_o; zero for n < 2.
double sort_cost(double n, const CostConstants& constants);

/// Cost of one operator. A scan reads `left` rows; joins take both input
/// cardinalities. Throws ContractViolation on negative inputs.
double node_cost(PlanOp op, double left, double right, double output, const CostConstants& constants);

/// A conjunctive select-join query over base tables.
struct Query {
  std::string id;
  std::vector<std::string> relations;
  std::vector<Clause> clauses;
};

/// Relation-subset view of a query used by plan enumeration. Subsets are
/// bitmasks over `relations()` (sorted by name).
class QueryGraph {
 public:
  /// Throws PlanningError for unknown relations or clauses on tables outside
  /// the query.
  explicit QueryGraph(const Query& query);

  const std::vector<std::string>& relations() const { return relations_; }
  std::size_t size() const { return relations_.size(); }
  std::uint32_t full_mask() const { return (std::uint32_t{1} << relations_.size()) - 1; }
  std::vector<std::string> relations_of(std::uint32_t mask) const;

  /// Every predicate that holds on the join of `mask`, including equalities
  /// implied by transitivity.
  std::vector<Clause> predicates_within(std::uint32_t mask) const;
  LogicalNode node_for(std::uint32_t mask) const;
  /// Predicates a join of the two disjoint subsets must evaluate: one
  /// equality per equivalence class spanning both sides plus cross-side
  /// non-equality column comparisons.
  std::vector<Clause> join_predicates(std::uint32_t left, std::uint32_t right) const;
  /// Connected components of the join graph, as masks.
  std::vector<std::uint32_t> components() const;

 private:
  std::uint32_t mask_of(const std::string& table) const;

  std::vector<std::string> relations_;
  std::vector<Clause> local_;   // constant clauses and same-table comparisons
  std::vector<Clause> theta_;   // cross-table non-equality comparisons
  std::vector<EquivalenceClass> classes_;
};

/// Source of node cardinalities for the enumerator.
class CardinalityModel {
 public:
  virtual ~CardinalityModel() = default;
  virtual double cardinality(const LogicalNode& node) const = 0;
};

/// Classic estimate: product of base row counts times the product of clause
/// selectivities. Column equalities contribute 1/max(n_distinct) per adjacent
/// pair of an equivalence class; other column comparisons contribute 1/3.
/// Not clamped.
double baseline_cardinality(const Catalog& catalog, const StatsCatalog& stats, const LogicalNode& node);

enum class EstimatorMode { Baseline, Adaptive };
std::string_view to_string(EstimatorMode mode);
EstimatorMode parse_estimator_mode(std::string_view text);

/// Baseline or learned estimation. Adaptive mode asks the learner for the
/// node's feature space and falls back to the baseline when it has no data.
/// Estimates are clamped to at least 1.
class EstimatorPlugin final : public CardinalityModel {
 public:
  EstimatorPlugin(const Catalog& catalog, const StatsCatalog& stats);
  EstimatorPlugin(const Catalog& catalog, const StatsCatalog& stats, const LearnerRegistry& learner);

  EstimatorMode mode() const { return learner_ ? EstimatorMode::Adaptive : EstimatorMode::Baseline; }
  double cardinality(const LogicalNode& node) const override;

  /// Whether the last cardinality() call used a learned prediction.
  bool last_was_learned() const { return last_learned_; }

 private:
  const Catalog& catalog_;
  const StatsCatalog& stats_;
  const LearnerRegistry* learner_ = nullptr;
  mutable bool last_learned_ = false;
};

inline double estimate_cardinality(const EstimatorPlugin& plugin, const LogicalNode& node) {
  return plugin.cardinality(node);
}

struct OptimizerConfig {
  CostConstants costs;
  bool cross_products = false;
  std::size_t max_relations = 12;
};

/// Exhaustive bushy dynamic programming over relation subsets. Each subset's
/// cardinality is requested from `model` once; each join considers every
/// legal operator (hash and merge need an equality predicate). Ties on cost
/// go to the lexicographically smallest fingerprint.
PhysicalPlan best_plan(const Query& query, const Catalog& catalog, const CardinalityModel& model,
                       const OptimizerConfig& config);

/// Cost of `plan`'s shape and operators under another cardinality model
/// (e.g. true cardinalities). Returns a copy with re-estimated nodes.
PhysicalPlan recost_plan(const PlanNode& plan, const Catalog& catalog, const CardinalityModel& model,
                         const CostConstants& constants);

}  // namespace cardlearn
