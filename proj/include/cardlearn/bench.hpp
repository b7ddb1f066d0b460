#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cardlearn/catalog.hpp"
#include "cardlearn/executor.hpp"
#include "cardlearn/learner.hpp"
#include "cardlearn/optimizer.hpp"
#include "cardlearn/stats.hpp"

namespace cardlearn {

// ---------------------------------------------------------------------------
// Workload

struct FixedConstant {
  double value = 0;
};
/// Integer drawn uniformly from [lo, hi].
struct UniformIntConstant {
  long long lo = 0;
  long long hi = 0;
};
struct UniformRealConstant {
  double lo = 0;
  double hi = 0;
};
struct ChoiceConstant {
  std::vector<double> values;
};

using ConstantGenerator = std::variant<FixedConstant, UniformIntConstant, UniformRealConstant, ChoiceConstant>;

double draw_constant(const ConstantGenerator& gen, std::mt19937_64& rng);
std::string to_string(const ConstantGenerator& gen);

/// One predicate of a query template: either `column op <constant slot>` or a
/// column comparison.
struct ClauseSpec {
  ColumnRef left;
  CompareOp op = CompareOp::Eq;
  std::variant<ConstantGenerator, ColumnRef> right;
};

/// Instances of one template differ at most in their constants.
struct QueryTemplate {
  std::string id;
  std::vector<std::string> relations;
  std::vector<ClauseSpec> clauses;

  Query instantiate(std::mt19937_64& rng) const;
};

/// `rounds` passes over the templates in order (round robin), constants drawn
/// from one generator seeded with `seed`.
std::vector<Query> draw_workload(const std::vector<QueryTemplate>& templates, std::size_t rounds,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Closed loop

/// q-error max(e/t, t/e) with t = max(true_card, 1). Requires e >= 1.
double q_error(double estimated, double true_card);

struct NodeRecord {
  std::string path;
  std::string space;        // short hash of the feature-space key
  double estimated = 1.0;
  double baseline_estimated = 1.0;  // statistics-only estimate of the same node
  std::uint64_t true_card = 0;
  bool learned = false;     // the space held training data when planned
};

struct IterationRecord {
  std::size_t iteration = 0;           // global, 1-based
  std::size_t template_iteration = 0;  // 1-based within the template
  std::string template_id;
  std::string plan_fingerprint;
  std::vector<NodeRecord> nodes;       // plan pre-order
  double estimated_cost = 0;
  double true_cost = 0;                // chosen plan at true cardinalities
  double optimal_true_cost = 0;        // best plan at true cardinalities
};

struct LoopOptions {
  OptimizerConfig optimizer;
  EstimatorMode mode = EstimatorMode::Adaptive;
  /// Plan every query a second time under true cardinalities.
  bool compute_optimal = true;
};

/// Plans each query with the current estimator, executes it, feeds every node
/// observation to `learner` (adaptive mode only) and records the outcome.
/// Iteration numbers continue from `learner.iteration`, which is advanced.
/// Errors are rethrown prefixed with the failing iteration.
std::vector<IterationRecord> run_adaptive_loop(const Catalog& catalog, const StatsCatalog& stats,
                                               const std::vector<Query>& workload, LearnerRegistry& learner,
                                               const LoopOptions& options, std::ostream* observation_log = nullptr);

struct ConvergenceInfo {
  bool converged = false;
  /// Template iteration at which the final plan first appeared.
  std::size_t last_change = 0;
  std::size_t iterations = 0;
  std::string final_fingerprint;
};

/// Converged iff the template's final `window` iterations share one plan.
std::map<std::string, ConvergenceInfo> detect_convergence(const std::vector<IterationRecord>& records,
                                                          std::size_t window = 5);

void write_iterations_csv(const std::vector<IterationRecord>& records, std::ostream& out);

// ---------------------------------------------------------------------------
// Learner comparison

struct CompareOptions {
  std::vector<LearnerKind> kinds = {LearnerKind::FixedKnn, LearnerKind::PlainKnn, LearnerKind::LastKKnn,
                                    LearnerKind::LinearSgd};
  LearnerConfig learner;          // kind is overridden per curve
  std::size_t observations = 2000;
  std::size_t report_every = 100;
  std::size_t final_window = 200;
  std::uint64_t seed = 0;
};

struct LearningCurve {
  LearnerKind kind = LearnerKind::FixedKnn;
  /// (observations seen, mean |ln(e/t)| over the preceding block).
  std::vector<std::pair<std::size_t, double>> points;
  /// Mean |ln(e/t)| over the last `final_window` predictions.
  double final_error = 0;
};

/// Prequential evaluation on a stream of instances of one template: each
/// learner predicts the root node's cardinality (baseline when it denies),
/// is scored, then observes the truth. Every kind sees the same stream.
std::vector<LearningCurve> compare_learners(const Catalog& catalog, const StatsCatalog& stats,
                                            const QueryTemplate& query, const CompareOptions& options);

void write_curves_csv(const std::vector<LearningCurve>& curves, std::ostream& out);

// ---------------------------------------------------------------------------
// Cardinality-vs-cost report

struct CardCostSummary {
  std::size_t points = 0;
  double max_q_error = 1.0;
  double median_q_error = 1.0;
};

/// Writes the (estimated, true) cardinality scatter and the (true cost,
/// optimal cost) scatter. Throws Error("no records") on empty input.
CardCostSummary card_cost_report(const std::vector<IterationRecord>& records, std::ostream& cardinality_csv,
                                 std::ostream& cost_csv);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// SVG rendering of the CSV data (log-log scatter, learning curves)

void write_scatter_svg(const std::vector<IterationRecord>& records, std::ostream& out);
void write_curves_svg(const std::vector<LearningCurve>& curves, std::ostream& out);

}  // namespace cardlearn
