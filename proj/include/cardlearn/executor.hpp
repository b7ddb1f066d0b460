#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "cardlearn/catalog.hpp"
#include "cardlearn/optimizer.hpp"
#include "cardlearn/plan.hpp"
#include "cardlearn/stats.hpp"

namespace cardlearn {

/// Intermediate result: one base-row id per table for every output tuple.
struct RowSet {
  std::vector<std::string> tables;
  std::vector<std::uint32_t> ids;  // row-major, stride tables.size()

  std::size_t size() const { return tables.empty() ? 0 : ids.size() / tables.size(); }
  /// Tuples rendered as sorted (table:id,...) strings; order-independent view for comparisons.
  std::vector<std::string> canonical_rows() const;
};

/// Evaluates a plan's relational semantics with the operator each node names.
/// Throws ExecutionError on unresolved tables or columns.
RowSet evaluate_plan(const PlanNode& plan, const Catalog& catalog);

struct NodeObservation {
  FeatureSpaceKey key;
  FeatureVector features;
  std::uint64_t true_cardinality = 0;
  std::string path;  // "" for the root, then L/R steps
  double estimated_cardinality = 1.0;
};

struct ExecutionResult {
  std::uint64_t output_rows = 0;
  std::vector<NodeObservation> observations;  // pre-order
  double simulated_cost = 0.0;                // plan cost at true cardinalities
};

ExecutionResult execute_plan(const PlanNode& plan, const Catalog& catalog, const StatsCatalog& stats,
                             const CostConstants& constants);

/// Brute-force count of the node's relational expression: filters each base
/// table, then enumerates combinations depth-first, checking each predicate as
/// soon as its tables are bound. Independent of the plan executor.
std::uint64_t true_cardinality_oracle(const LogicalNode& node, const Catalog& catalog);

/// Exact cardinalities computed by hash-join evaluation of the node, cached
/// by node identity. Used to find the optimal plan under true cardinalities.
class TrueCardinalityModel final : public CardinalityModel {
 public:
  explicit TrueCardinalityModel(const Catalog& catalog) : catalog_(catalog) {}
  double cardinality(const LogicalNode& node) const override;
  std::uint64_t count(const LogicalNode& node) const;

 private:
  const Catalog& catalog_;
  mutable std::unordered_map<std::string, std::uint64_t> cache_;
};

/// Appends `digest,coordinates,true_cardinality,query,iteration` rows;
/// coordinates are `;`-separated.
void write_observation_csv_header(std::ostream& out);
void append_observations_csv(std::ostream& out, const std::vector<NodeObservation>& observations,
                             const std::string& query_id, std::size_t iteration);

}  // namespace cardlearn
