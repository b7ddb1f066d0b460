#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "cardlearn/error.hpp"
#include "cardlearn/executor.hpp"
#include "support.hpp"

using namespace cardlearn;
using cardlearn::testing::random_query;
using cardlearn::testing::random_table;

namespace {

Table section2_table(bool exclusive) {
  std::vector<Tuple> rows;
  const std::int64_t o = exclusive ? 1 : 0;
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{0}, o});
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{1}, 1 - o});
  return create_table(TableSchema("t", {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer}}), rows);
}

/// Every operator assignment of the plan's join nodes that is legal
/// (hash and merge need an equality predicate).
std::vector<PhysicalPlan> operator_variants(const PlanNode& plan) {
  if (plan.op == PlanOp::Scan) return {std::make_shared<PlanNode>(plan)};
  const bool equi = std::any_of(plan.clauses.begin(), plan.clauses.end(),
                                [](const Clause& c) { return c.is_column_equality(); });
  std::vector<PhysicalPlan> out;
  for (const auto& l : operator_variants(*plan.left))
    for (const auto& r : operator_variants(*plan.right))
      for (PlanOp op : {PlanOp::NestedLoopJoin, PlanOp::HashJoin, PlanOp::MergeJoin}) {
        if (op != PlanOp::NestedLoopJoin && !equi) continue;
        auto n = std::make_shared<PlanNode>(plan);
        n->op = op;
        n->left = l;
        n->right = r;
        out.push_back(n);
      }
  return out;
}

}  // namespace

TEST_CASE("scan of the correlated table and its exclusive variant") {
  for (bool exclusive : {false, true}) {
    Catalog cat;
    cat.add(section2_table(exclusive));
    const StatsCatalog stats(cat, 32);
    const Query q{"q", {"t"}, {parse_clause("t.a = 0"), parse_clause("t.b = 0")}};
    const auto plan = best_plan(q, cat, EstimatorPlugin(cat, stats), {});
    const auto result = execute_plan(*plan, cat, stats, {});
    CHECK(result.output_rows == (exclusive ? 0u : 10000u));
    REQUIRE(result.observations.size() == 1);
    CHECK(result.observations[0].true_cardinality == result.output_rows);
    CHECK(result.observations[0].path.empty());
    CHECK(result.observations[0].estimated_cardinality == 5000.0);
  }
}

TEST_CASE("oracle examples") {
  Catalog cat;
  cat.add(section2_table(false));
  std::mt19937_64 rng(1);
  cat.add(random_table("u", 100, rng));
  cat.add(random_table("v", 50, rng));
  CHECK(true_cardinality_oracle(make_logical_node({"u", "v"}, {}), cat) == 5000);
  const std::vector<Clause> a0{parse_clause("t.a = 0")};
  CHECK(true_cardinality_oracle(make_logical_node({"t"}, a0), cat) == 10000);
}

TEST_CASE("joining an empty table yields nothing") {
  std::mt19937_64 rng(2);
  Catalog cat;
  cat.add(random_table("t", 40, rng));
  cat.add(random_table("e", 0, rng));
  const StatsCatalog stats(cat, 8);
  const Query q{"q", {"t", "e"}, {parse_clause("t.a = e.a")}};
  const auto plan = best_plan(q, cat, EstimatorPlugin(cat, stats), {});
  for (const auto& variant : operator_variants(*plan)) {
    const auto result = execute_plan(*variant, cat, stats, {});
    CHECK(result.output_rows == 0);
    CHECK(result.observations.front().true_cardinality == 0);
  }
}

TEST_CASE("operators agree and observations match the oracle") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> names{"p", "q", "r", "s"};
  Catalog cat;
  for (const auto& n : names) cat.add(random_table(n, 3 + rng() % 25, rng));
  const StatsCatalog stats(cat, 8);
  const EstimatorPlugin baseline(cat, stats);
  const TrueCardinalityModel truth(cat);
  for (int i = 0; i < 60; ++i) {
    CAPTURE(i);
    const Query q = random_query(rng, 1 + rng() % 4, names);
    const auto plan = best_plan(q, cat, baseline, {});
    const auto reference = evaluate_plan(*plan, cat).canonical_rows();
    std::vector<std::string> sorted = reference;
    std::sort(sorted.begin(), sorted.end());

    for (const auto& variant : operator_variants(*plan)) {
      auto rows = evaluate_plan(*variant, cat).canonical_rows();
      std::sort(rows.begin(), rows.end());
      CHECK(rows == sorted);
    }

    const auto result = execute_plan(*plan, cat, stats, {});
    CHECK(result.output_rows == reference.size());
    std::size_t k = 0;
    for_each_node(*plan, [&](const PlanNode& node, const std::string& path) {
      REQUIRE(k < result.observations.size());
      const auto& obs = result.observations[k++];
      CHECK(obs.path == path);
      CHECK(obs.key == feature_space_key(node.logical));
      CHECK(obs.true_cardinality == true_cardinality_oracle(node.logical, cat));
      CHECK(obs.true_cardinality == truth.count(node.logical));
      CHECK(obs.features.size() == static_cast<Eigen::Index>(node.logical.feature_count()));
    });
    CHECK(k == result.observations.size());

    // Simulated cost is the plan's cost under exact cardinalities.
    CHECK(result.simulated_cost == doctest::Approx(recost_plan(*plan, cat, truth, {})->estimated_cost));
    // And never below the optimum under the same cardinalities.
    CHECK(result.simulated_cost >= best_plan(q, cat, truth, {})->estimated_cost - 1e-9);

    const auto again = execute_plan(*plan, cat, stats, {});
    CHECK(again.simulated_cost == result.simulated_cost);
    for (std::size_t j = 0; j < again.observations.size(); ++j)
      CHECK(again.observations[j].true_cardinality == result.observations[j].true_cardinality);
  }
}

TEST_CASE("unresolved references are execution errors") {
  std::mt19937_64 rng(4);
  Catalog cat;
  cat.add(random_table("t", 5, rng));
  PlanNode scan;
  scan.table = "missing";
  CHECK_THROWS_AS(evaluate_plan(scan, cat), ExecutionError);
  scan.table = "t";
  scan.clauses = {parse_clause("t.zz < 3")};
  CHECK_THROWS_AS(evaluate_plan(scan, cat), ExecutionError);
}

TEST_CASE("observation csv") {
  NodeObservation obs;
  obs.key = {"R[t] T[t.a < CONST] E[]"};
  obs.features = Eigen::VectorXd::Constant(2, -0.5);
  obs.true_cardinality = 42;
  std::ostringstream out;
  write_observation_csv_header(out);
  append_observations_csv(out, {obs}, "q1", 7);
  CHECK(out.str() ==
        "space_digest,coordinates,true_cardinality,query,iteration\n" + obs.key.short_hash() + ",-0.5;-0.5,42,q1,7\n");
}
