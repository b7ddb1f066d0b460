#include "cardlearn/optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "cardlearn/error.hpp"

namespace cardlearn {

double sort_cost(double n, const CostConstants& constants) {
  if (n < 2) return 0.0;
  return 1.39 * n * std::log2(n) * constants.c_o;
}

double node_cost(PlanOp op, double left, double right, double output, const CostConstants& k) {
  if (left < 0 || right < 0 || output < 0) throw ContractViolation("node_cost: negative cardinality");
  switch (op) {
    case PlanOp::Scan: return left * k.c_tuple;
    case PlanOp::NestedLoopJoin: return k.c_startup + left * right * k.c_o + output * k.c_tuple;
    case PlanOp::HashJoin: return k.c_startup + (left + right) * k.c_hash + output * k.c_tuple;
    case PlanOp::MergeJoin:
      return k.c_startup + sort_cost(left, k) + sort_cost(right, k) + (left + right) * k.c_o + output * k.c_tuple;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

QueryGraph::QueryGraph(const Query& query) : relations_(query.relations) {
  std::sort(relations_.begin(), relations_.end());
  relations_.erase(std::unique(relations_.begin(), relations_.end()), relations_.end());
  if (relations_.empty()) throw PlanningError("query '" + query.id + "' has no relations");
  if (relations_.size() > 31) throw PlanningError("query '" + query.id + "' joins too many relations");
  std::vector<Clause> equalities;
  for (const auto& c : query.clauses) {
    auto in_query = [&](const ColumnRef& r) {
      if (!std::binary_search(relations_.begin(), relations_.end(), r.table))
        throw PlanningError("query '" + query.id + "': clause '" + to_string(c) + "' references table '" + r.table +
                            "' outside the query");
    };
    in_query(c.left);
    if (c.has_constant()) {
      local_.push_back(c);
      continue;
    }
    in_query(c.right_column());
    if (c.is_column_equality())
      equalities.push_back(c);
    else if (c.left.table == c.right_column().table)
      local_.push_back(c);
    else
      theta_.push_back(c);
  }
  classes_ = equivalence_classes_of(equalities);
}

std::uint32_t QueryGraph::mask_of(const std::string& table) const {
  const auto it = std::lower_bound(relations_.begin(), relations_.end(), table);
  return std::uint32_t{1} << static_cast<unsigned>(it - relations_.begin());
}

std::vector<std::string> QueryGraph::relations_of(std::uint32_t mask) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < relations_.size(); ++i)
    if (mask & (std::uint32_t{1} << i)) out.push_back(relations_[i]);
  return out;
}

std::vector<Clause> QueryGraph::predicates_within(std::uint32_t mask) const {
  std::vector<Clause> out;
  for (const auto& c : local_)
    if (mask & mask_of(c.left.table)) out.push_back(c);
  for (const auto& c : theta_)
    if ((mask & mask_of(c.left.table)) && (mask & mask_of(c.right_column().table))) out.push_back(c);
  for (const auto& cls : classes_) {
    const ColumnRef* previous = nullptr;
    for (const auto& m : cls.members) {
      if (!(mask & mask_of(m.table))) continue;
      if (previous) out.push_back(Clause{*previous, CompareOp::Eq, m});
      previous = &m;
    }
  }
  return out;
}

LogicalNode QueryGraph::node_for(std::uint32_t mask) const {
  const auto preds = predicates_within(mask);
  return make_logical_node(relations_of(mask), preds);
}

std::vector<Clause> QueryGraph::join_predicates(std::uint32_t left, std::uint32_t right) const {
  std::vector<Clause> out;
  for (const auto& cls : classes_) {
    const ColumnRef* l = nullptr;
    const ColumnRef* r = nullptr;
    for (const auto& m : cls.members) {
      const auto bit = mask_of(m.table);
      if (!l && (left & bit)) l = &m;
      if (!r && (right & bit)) r = &m;
    }
    if (l && r) out.push_back(Clause{*l, CompareOp::Eq, *r});
  }
  for (const auto& c : theta_) {
    const auto a = mask_of(c.left.table), b = mask_of(c.right_column().table);
    if (((left & a) && (right & b)) || ((left & b) && (right & a))) out.push_back(c);
  }
  return out;
}

std::vector<std::uint32_t> QueryGraph::components() const {
  std::vector<std::uint32_t> out;
  std::uint32_t seen = 0;
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    if (seen & bit) continue;
    std::uint32_t comp = bit;
    bool grew = true;
    while (grew) {
      grew = false;
      for (std::size_t j = 0; j < relations_.size(); ++j) {
        const std::uint32_t other = std::uint32_t{1} << j;
        if ((comp & other) == 0 && !join_predicates(comp, other).empty()) {
          comp |= other;
          grew = true;
        }
      }
    }
    seen |= comp;
    out.push_back(comp);
  }
  return out;
}

// ---------------------------------------------------------------------------

double baseline_cardinality(const Catalog& catalog, const StatsCatalog& stats, const LogicalNode& node) {
  double card = 1.0;
  for (const auto& r : node.relations) card *= static_cast<double>(catalog.table(r).row_count());
  auto distinct = [&](const ColumnRef& col) -> double {
    const auto* s = stats.find(col);
    return s && s->n_distinct > 0 ? static_cast<double>(s->n_distinct) : 1.0;
  };
  std::vector<Selectivity> sels;
  for (const auto& c : node.clauses) {
    if (c.has_constant()) {
      const auto* s = stats.find(c.left);
      sels.push_back(s ? clause_selectivity(*s, c) : Selectivity(1.0));
    } else if (c.op == CompareOp::Eq) {
      sels.emplace_back(1.0 / std::max(distinct(c.left), distinct(c.right_column())));
    } else {
      sels.emplace_back(1.0 / 3.0);
    }
  }
  for (const auto& cls : node.equivalence_classes)
    for (std::size_t i = 0; i + 1 < cls.members.size(); ++i)
      sels.emplace_back(1.0 / std::max(distinct(cls.members[i]), distinct(cls.members[i + 1])));
  return card * independence_node_selectivity(sels).value();
}

std::string_view to_string(EstimatorMode mode) { return mode == EstimatorMode::Baseline ? "baseline" : "adaptive"; }

EstimatorMode parse_estimator_mode(std::string_view text) {
  if (text == "baseline") return EstimatorMode::Baseline;
  if (text == "adaptive") return EstimatorMode::Adaptive;
  throw ConfigError("unknown mode '" + std::string(text) + "' (expected baseline|adaptive)");
}

EstimatorPlugin::EstimatorPlugin(const Catalog& catalog, const StatsCatalog& stats)
    : catalog_(catalog), stats_(stats) {}

EstimatorPlugin::EstimatorPlugin(const Catalog& catalog, const StatsCatalog& stats, const LearnerRegistry& learner)
    : catalog_(catalog), stats_(stats), learner_(&learner) {}

double EstimatorPlugin::cardinality(const LogicalNode& node) const {
  last_learned_ = false;
  if (learner_) {
    const auto key = feature_space_key(node);
    if (learner_->has_data(key)) {
      if (auto ln_card = learner_->predict(key, feature_vector(node, stats_))) {
        last_learned_ = true;
        return std::max(1.0, std::exp(*ln_card));
      }
    }
  }
  return std::max(1.0, baseline_cardinality(catalog_, stats_, node));
}

// ---------------------------------------------------------------------------

namespace {

constexpr PlanOp kJoinOps[] = {PlanOp::NestedLoopJoin, PlanOp::HashJoin, PlanOp::MergeJoin};

std::string_view short_code(PlanOp op) {
  switch (op) {
    case PlanOp::NestedLoopJoin: return "NL";
    case PlanOp::HashJoin: return "HJ";
    case PlanOp::MergeJoin: return "MJ";
    default: return "S";
  }
}

bool has_equality(const std::vector<Clause>& preds) {
  return std::any_of(preds.begin(), preds.end(), [](const Clause& c) { return c.is_column_equality(); });
}

std::string component_names(const QueryGraph& graph) {
  std::string out;
  for (auto comp : graph.components()) {
    out += out.empty() ? "{" : ", {";
    const auto names = graph.relations_of(comp);
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
    out += "}";
  }
  return out;
}

}  // namespace

PhysicalPlan best_plan(const Query& query, const Catalog& catalog, const CardinalityModel& model,
                       const OptimizerConfig& config) {
  const QueryGraph graph(query);
  const std::size_t n = graph.size();
  if (n > config.max_relations)
    throw PlanningError("query '" + query.id + "' joins " + std::to_string(n) + " relations; limit is " +
                        std::to_string(config.max_relations));
  for (const auto& r : graph.relations())
    if (!catalog.contains(r)) throw PlanningError("query '" + query.id + "' references unknown table '" + r + "'");

  const std::uint32_t full = graph.full_mask();
  std::vector<PhysicalPlan> best(static_cast<std::size_t>(full) + 1);
  std::vector<std::string> fingerprint(best.size());

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    auto scan = std::make_shared<PlanNode>();
    scan->op = PlanOp::Scan;
    scan->table = graph.relations()[i];
    scan->logical = graph.node_for(bit);
    scan->clauses = graph.predicates_within(bit);
    scan->estimated_cardinality = model.cardinality(scan->logical);
    scan->node_cost =
        node_cost(PlanOp::Scan, static_cast<double>(catalog.table(scan->table).row_count()), 0, 0, config.costs);
    scan->estimated_cost = scan->node_cost;
    fingerprint[bit] = plan_fingerprint(*scan);
    best[bit] = std::move(scan);
  }

  struct Candidate {
    PlanOp op;
    std::uint32_t left;
    double cost;
    std::string fingerprint;
  };

  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    if (std::popcount(mask) < 2) continue;
    std::optional<double> card;
    std::optional<Candidate> winner;
    for (std::uint32_t sub = (mask - 1) & mask; sub != 0; sub = (sub - 1) & mask) {
      const std::uint32_t other = mask ^ sub;
      const auto& lp = best[sub];
      const auto& rp = best[other];
      if (!lp || !rp) continue;
      const auto preds = graph.join_predicates(sub, other);
      if (preds.empty() && !config.cross_products) continue;
      if (!card) card = model.cardinality(graph.node_for(mask));
      const bool equi = has_equality(preds);
      for (PlanOp op : kJoinOps) {
        if (op != PlanOp::NestedLoopJoin && !equi) continue;
        const double cost = lp->estimated_cost + rp->estimated_cost +
                            node_cost(op, lp->estimated_cardinality, rp->estimated_cardinality, *card, config.costs);
        if (winner && cost > winner->cost) continue;
        std::string fp = std::string(short_code(op)) + "(" + fingerprint[sub] + "," + fingerprint[other] + ")";
        if (winner && cost == winner->cost && fp >= winner->fingerprint) continue;
        winner = Candidate{op, sub, cost, std::move(fp)};
      }
    }
    if (!winner) continue;
    const std::uint32_t other = mask ^ winner->left;
    auto node = std::make_shared<PlanNode>();
    node->op = winner->op;
    node->clauses = graph.join_predicates(winner->left, other);
    node->left = best[winner->left];
    node->right = best[other];
    node->logical = graph.node_for(mask);
    node->estimated_cardinality = *card;
    node->node_cost = node_cost(node->op, node->left->estimated_cardinality, node->right->estimated_cardinality,
                                *card, config.costs);
    node->estimated_cost = winner->cost;
    best[mask] = std::move(node);
    fingerprint[mask] = std::move(winner->fingerprint);
  }

  if (!best[full]) {
    throw PlanningError("query '" + query.id + "' has a disconnected join graph (components " +
                        component_names(graph) + ") and cross products are disabled");
  }
  return best[full];
}

PhysicalPlan recost_plan(const PlanNode& plan, const Catalog& catalog, const CardinalityModel& model,
                         const CostConstants& constants) {
  auto node = std::make_shared<PlanNode>(plan);
  node->estimated_cardinality = model.cardinality(plan.logical);
  if (plan.op == PlanOp::Scan) {
    node->node_cost =
        node_cost(PlanOp::Scan, static_cast<double>(catalog.table(plan.table).row_count()), 0, 0, constants);
    node->estimated_cost = node->node_cost;
    return node;
  }
  node->left = recost_plan(*plan.left, catalog, model, constants);
  node->right = recost_plan(*plan.right, catalog, model, constants);
  node->node_cost = node_cost(plan.op, node->left->estimated_cardinality, node->right->estimated_cardinality,
                              node->estimated_cardinality, constants);
  node->estimated_cost = node->left->estimated_cost + node->right->estimated_cost + node->node_cost;
  return node;
}

}  // namespace cardlearn
