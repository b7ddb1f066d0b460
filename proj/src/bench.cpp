#include "cardlearn/bench.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double draw_constant(const ConstantGenerator& gen, std::mt19937_64& rng) {
  return std::visit(
      [&](const auto& g) -> double {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, FixedConstant>) {
          return g.value;
        } else if constexpr (std::is_same_v<G, UniformIntConstant>) {
          const auto span = static_cast<double>(g.hi - g.lo + 1);
          return static_cast<double>(g.lo) + std::min(span - 1, std::floor(uniform01(rng) * span));
        } else if constexpr (std::is_same_v<G, UniformRealConstant>) {
          return g.lo + uniform01(rng) * (g.hi - g.lo);
        } else {
          const auto n = g.values.size();
          return g.values[std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)))];
        }
      },
      gen);
}

std::string to_string(const ConstantGenerator& gen) {
  return std::visit(
      [](const auto& g) -> std::string {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, FixedConstant>) {
          return format_double(g.value);
        } else if constexpr (std::is_same_v<G, UniformIntConstant>) {
          return "uniform_int(" + std::to_string(g.lo) + ", " + std::to_string(g.hi) + ")";
        } else if constexpr (std::is_same_v<G, UniformRealConstant>) {
          return "uniform(" + format_double(g.lo) + ", " + format_double(g.hi) + ")";
        } else {
          std::string s = "choice(";
          for (std::size_t i = 0; i < g.values.size(); ++i) s += (i ? ", " : "") + format_double(g.values[i]);
          return s + ")";
        }
      },
      gen);
}

Query QueryTemplate::instantiate(std::mt19937_64& rng) const {
  Query q;
  q.id = id;
  q.relations = relations;
  for (const auto& spec : clauses) {
    Clause c;
    c.left = spec.left;
    c.op = spec.op;
    if (const auto* gen = std::get_if<ConstantGenerator>(&spec.right))
      c.right = draw_constant(*gen, rng);
    else
      c.right = std::get<ColumnRef>(spec.right);
    q.clauses.push_back(std::move(c));
  }
  return q;
}

std::vector<Query> draw_workload(const std::vector<QueryTemplate>& templates, std::size_t rounds,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Query> out;
  out.reserve(templates.size() * rounds);
  for (std::size_t r = 0; r < rounds; ++r)
    for (const auto& t : templates) out.push_back(t.instantiate(rng));
  return out;
}

// ---------------------------------------------------------------------------

double q_error(double estimated, double true_card) {
  if (!(estimated >= 1.0)) throw ContractViolation("q_error: estimate below 1");
  const double t = std::max(true_card, 1.0);
  return std::max(estimated / t, t / estimated);
}

std::vector<IterationRecord> run_adaptive_loop(const Catalog& catalog, const StatsCatalog& stats,
                                               const std::vector<Query>& workload, LearnerRegistry& learner,
                                               const LoopOptions& options, std::ostream* observation_log) {
  const TrueCardinalityModel truth(catalog);
  const EstimatorPlugin baseline(catalog, stats);
  const EstimatorPlugin adaptive(catalog, stats, learner);
  const EstimatorPlugin& plugin = options.mode == EstimatorMode::Adaptive ? adaptive : baseline;

  std::map<std::string, std::size_t> per_template;
  std::vector<IterationRecord> records;
  records.reserve(workload.size());
  for (const auto& query : workload) {
    const std::size_t iteration = learner.iteration + 1;
    try {
      IterationRecord rec;
      rec.iteration = iteration;
      rec.template_id = query.id;
      rec.template_iteration = ++per_template[query.id];

      const PhysicalPlan plan = best_plan(query, catalog, plugin, options.optimizer);
      rec.plan_fingerprint = plan_fingerprint(*plan);
      rec.estimated_cost = plan->estimated_cost;

      const ExecutionResult exec = execute_plan(*plan, catalog, stats, options.optimizer.costs);
      rec.true_cost = exec.simulated_cost;
      std::vector<double> baseline_estimates;
      for_each_node(*plan, [&](const PlanNode& n, const std::string&) {
        baseline_estimates.push_back(baseline.cardinality(n.logical));
      });
      for (const auto& obs : exec.observations) {
        NodeRecord node;
        node.path = obs.path;
        node.space = obs.key.short_hash();
        node.estimated = obs.estimated_cardinality;
        node.baseline_estimated = baseline_estimates[rec.nodes.size()];
        node.true_card = obs.true_cardinality;
        node.learned = options.mode == EstimatorMode::Adaptive && learner.has_data(obs.key);
        rec.nodes.push_back(std::move(node));
      }
      if (options.mode == EstimatorMode::Adaptive)
        for (const auto& obs : exec.observations)
          learner.observe(obs.key, obs.features, log_target(static_cast<double>(obs.true_cardinality)));
      if (observation_log) append_observations_csv(*observation_log, exec.observations, query.id, iteration);

      if (options.compute_optimal)
        rec.optimal_true_cost = best_plan(query, catalog, truth, options.optimizer)->estimated_cost;
      else
        rec.optimal_true_cost = rec.true_cost;
      records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(iteration) + " (query " + query.id + "): " + e.what());
    }
    learner.iteration = iteration;
  }
  return records;
}

std::map<std::string, ConvergenceInfo> detect_convergence(const std::vector<IterationRecord>& records,
                                                          std::size_t window) {
  std::map<std::string, std::vector<const IterationRecord*>> by_template;
  for (const auto& r : records) by_template[r.template_id].push_back(&r);
  std::map<std::string, ConvergenceInfo> out;
  for (const auto& [id, recs] : by_template) {
    ConvergenceInfo info;
    info.iterations = recs.size();
    info.final_fingerprint = recs.back()->plan_fingerprint;
    std::size_t first = recs.size();
    while (first > 0 && recs[first - 1]->plan_fingerprint == info.final_fingerprint) --first;
    info.last_change = recs[first]->template_iteration;
    const std::size_t run = recs.size() - first;
    info.converged = recs.size() >= 2 && run >= std::max<std::size_t>(window, 1);
    out.emplace(id, std::move(info));
  }
  return out;
}

void write_iterations_csv(const std::vector<IterationRecord>& records, std::ostream& out) {
  out << "iteration,template,template_iteration,plan,root_estimated,root_true,estimated_cost,true_cost,"
         "optimal_true_cost\n";
  for (const auto& r : records) {
    const auto& root = r.nodes.front();
    out << r.iteration << ',' << r.template_id << ',' << r.template_iteration << ','
        << csv_field(r.plan_fingerprint) << ',' << format_double(root.estimated) << ',' << root.true_card << ','
        << format_double(r.estimated_cost) << ',' << format_double(r.true_cost) << ','
        << format_double(r.optimal_true_cost) << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<LearningCurve> compare_learners(const Catalog& catalog, const StatsCatalog& stats,
                                            const QueryTemplate& query, const CompareOptions& options) {
  struct Sample {
    FeatureSpaceKey key;
    FeatureVector x;
    double baseline_log;
    double truth_log;
  };
  const TrueCardinalityModel truth(catalog);
  std::vector<Sample> stream;
  stream.reserve(options.observations);
  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < options.observations; ++i) {
    const Query q = query.instantiate(rng);
    const QueryGraph graph(q);
    const LogicalNode node = graph.node_for(graph.full_mask());
    Sample s{feature_space_key(node), feature_vector(node, stats),
             std::log(std::max(1.0, baseline_cardinality(catalog, stats, node))),
             log_target(static_cast<double>(truth.count(node)))};
    stream.push_back(std::move(s));
  }

  std::vector<LearningCurve> curves;
  for (LearnerKind kind : options.kinds) {
    LearnerConfig config = options.learner;
    config.kind = kind;
    LearnerRegistry registry(config);
    LearningCurve curve;
    curve.kind = kind;
    std::vector<double> errors;
    errors.reserve(stream.size());
    double block = 0;
    std::size_t in_block = 0;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const auto& s = stream[i];
      const auto predicted = registry.predict(s.key, s.x);
      // Estimates are clamped to one row, like the optimizer's.
      const double estimate_log = std::max(0.0, predicted ? *predicted : s.baseline_log);
      const double err = std::abs(estimate_log - s.truth_log);
      errors.push_back(err);
      block += err;
      ++in_block;
      registry.observe(s.key, s.x, s.truth_log);
      if (options.report_every > 0 && ((i + 1) % options.report_every == 0 || i + 1 == stream.size())) {
        curve.points.emplace_back(i + 1, block / static_cast<double>(in_block));
        block = 0;
        in_block = 0;
      }
    }
    const std::size_t w = std::min(std::max<std::size_t>(options.final_window, 1), errors.size());
    double tail = 0;
    for (std::size_t i = errors.size() - w; i < errors.size(); ++i) tail += errors[i];
    curve.final_error = w ? tail / static_cast<double>(w) : 0.0;
    curves.push_back(std::move(curve));
  }
  return curves;
}

void write_curves_csv(const std::vector<LearningCurve>& curves, std::ostream& out) {
  out << "kind,observations,mean_abs_log_error\n";
  for (const auto& c : curves)
    for (const auto& [n, err] : c.points) out << to_string(c.kind) << ',' << n << ',' << format_double(err) << '\n';
}

// ---------------------------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CardCostSummary card_cost_report(const std::vector<IterationRecord>& records, std::ostream& cardinality_csv,
                                 std::ostream& cost_csv) {
  if (records.empty()) throw Error("no records");
  CardCostSummary summary;
  std::vector<double> qs;
  cardinality_csv << "iteration,template,path,space,estimated,baseline_estimated,true,q_error,learned\n";
  cost_csv << "iteration,template,plan,true_cost,optimal_true_cost,estimated_cost,cost_ratio\n";
  for (const auto& r : records) {
    for (const auto& n : r.nodes) {
      const double q = q_error(n.estimated, static_cast<double>(n.true_card));
      qs.push_back(q);
      cardinality_csv << r.iteration << ',' << r.template_id << ',' << (n.path.empty() ? "root" : n.path) << ','
                      << n.space << ',' << format_double(n.estimated) << ',' << format_double(n.baseline_estimated)
                      << ',' << n.true_card << ',' << format_double(q) << ',' << (n.learned ? 1 : 0) << '\n';
    }
    cost_csv << r.iteration << ',' << r.template_id << ',' << csv_field(r.plan_fingerprint) << ','
             << format_double(r.true_cost) << ',' << format_double(r.optimal_true_cost) << ','
             << format_double(r.estimated_cost) << ',' << format_double(r.true_cost / r.optimal_true_cost) << '\n';
  }
  summary.points = qs.size();
  summary.max_q_error = *std::max_element(qs.begin(), qs.end());
  summary.median_q_error = median(qs);
  return summary;
}

// ---------------------------------------------------------------------------

namespace {

struct Frame {
  double x0, x1, y0, y1;  // data range
  static constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

void svg_open(std::ostream& out, const Frame& f, const std::string& title, const std::string& xlabel,
              const std::string& ylabel) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Frame::kWidth << "\" height=\"" << Frame::kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << Frame::kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\">" << title << "</text>\n";
  out << "<text x=\"" << Frame::kWidth / 2 << "\" y=\"" << Frame::kHeight - 16 << "\" text-anchor=\"middle\">"
      << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << Frame::kHeight / 2 << "\" transform=\"rotate(-90 16 " << Frame::kHeight / 2
      << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  out << "<rect x=\"" << Frame::kMargin << "\" y=\"" << Frame::kMargin << "\" width=\""
      << Frame::kWidth - 2 * Frame::kMargin << "\" height=\"" << Frame::kHeight - 2 * Frame::kMargin
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << Frame::kMargin << "\" y=\"" << Frame::kHeight - Frame::kMargin + 16 << "\">"
      << format_fixed(f.x0, 1) << "</text>\n";
  out << "<text x=\"" << Frame::kWidth - Frame::kMargin << "\" y=\"" << Frame::kHeight - Frame::kMargin + 16
      << "\" text-anchor=\"end\">" << format_fixed(f.x1, 1) << "</text>\n";
  out << "<text x=\"" << Frame::kMargin - 4 << "\" y=\"" << Frame::kHeight - Frame::kMargin
      << "\" text-anchor=\"end\">" << format_fixed(f.y0, 1) << "</text>\n";
  out << "<text x=\"" << Frame::kMargin - 4 << "\" y=\"" << Frame::kMargin + 4 << "\" text-anchor=\"end\">"
      << format_fixed(f.y1, 1) << "</text>\n";
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_scatter_svg(const std::vector<IterationRecord>& records, std::ostream& out) {
  double hi = 1;
  for (const auto& r : records)
    for (const auto& n : r.nodes)
      hi = std::max({hi, std::log10(n.estimated), std::log10(std::max<double>(1.0, static_cast<double>(n.true_card)))});
  const Frame f{0, std::ceil(hi), 0, std::ceil(hi)};
  svg_open(out, f, "Estimated vs true cardinality", "log10 true cardinality", "log10 estimated cardinality");
  out << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.px(f.x1) << "\" y2=\""
      << f.py(f.y1) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  for (const auto& r : records)
    for (const auto& n : r.nodes) {
      const double x = std::log10(std::max<double>(1.0, static_cast<double>(n.true_card)));
      const double y = std::log10(n.estimated);
      out << "<circle cx=\"" << format_fixed(f.px(x), 2) << "\" cy=\"" << format_fixed(f.py(y), 2)
          << "\" r=\"2.5\" fill=\"" << (n.learned ? kPalette[0] : kPalette[1]) << "\" fill-opacity=\"0.5\"/>\n";
    }
  out << "</svg>\n";
}

void write_curves_svg(const std::vector<LearningCurve>& curves, std::ostream& out) {
  double xmax = 1, ymax = 0.1;
  for (const auto& c : curves)
    for (const auto& [n, e] : c.points) {
      xmax = std::max(xmax, static_cast<double>(n));
      ymax = std::max(ymax, e);
    }
  const Frame f{0, xmax, 0, ymax};
  svg_open(out, f, "Learning curves", "observations", "mean |ln(estimate/true)|");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [n, e] : curves[i].points)
      out << format_fixed(f.px(static_cast<double>(n)), 2) << ',' << format_fixed(f.py(e), 2) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << Frame::kWidth - Frame::kMargin - 4 << "\" y=\"" << Frame::kMargin + 16 + 16 * i
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << to_string(curves[i].kind) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace cardlearn
