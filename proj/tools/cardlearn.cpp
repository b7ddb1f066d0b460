// cardlearn: generate data, run the adaptive loop, explain plans, compare
// learners and produce cardinality/cost reports from one config file.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "cardlearn/bench.hpp"
#include "cardlearn/config.hpp"
#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace fs = std::filesystem;
using namespace cardlearn;

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string learner;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_estimator) {
  cmd->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (overrides [output] dir)");
  cmd->add_option("--seed", o.seed, "Data seed (overrides [data] seed)");
  if (with_estimator) {
    cmd->add_option("--mode", o.mode, "Estimator mode")->check(CLI::IsMember({"baseline", "adaptive"}));
    cmd->add_option("--learner", o.learner, "Learner kind")->check(CLI::IsMember({"fixed", "plain", "lastk", "linear"}));
  }
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = load_config(o.config);
  if (!o.out.empty()) c.output.dir = o.out;
  if (o.seed) c.data.seed = *o.seed;
  if (!o.mode.empty()) c.mode = parse_estimator_mode(o.mode);
  if (!o.learner.empty()) c.learner.kind = parse_learner_kind(o.learner);
  return c;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

LoopOptions loop_options(const ExperimentConfig& c) {
  LoopOptions o;
  o.optimizer = c.optimizer;
  o.mode = c.mode;
  return o;
}

/// Queries for one run starting after `completed` iterations; a resumed run
/// draws fresh constants rather than replaying the first run's.
std::vector<Query> workload_for(const ExperimentConfig& c, std::size_t completed) {
  return draw_workload(c.workload_templates(), c.workload.iterations, mix_seed(c.workload_seed() + completed));
}

LearnerRegistry load_snapshot(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read snapshot " + path.string());
  return LearnerRegistry::load(in);
}

int cmd_gen(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  const Catalog catalog = build_catalog(c);
  fs::create_directories(c.output.dir);
  auto manifest = open_out(c.output.dir / "manifest.txt");
  manifest << "seed " << c.data.seed << "\n";
  manifest << "buckets " << c.data.buckets << "\n";
  for (const auto& [name, table] : catalog.tables()) {
    save_csv(table, c.output.dir / (name + ".csv"));
    manifest << "table " << name << " rows " << table.row_count() << " file " << name << ".csv\n";
  }
  auto stats_out = open_out(c.output.dir / "stats.csv");
  write_stats_csv(StatsCatalog(catalog, c.data.buckets), stats_out);
  std::cout << "wrote " << catalog.tables().size() << " table(s) to " << c.output.dir.string() << "\n";
  return 0;
}

int cmd_run(const CommonOptions& o, const std::string& resume) {
  const ExperimentConfig c = resolve(o);
  const Catalog catalog = build_catalog(c);
  const StatsCatalog stats(catalog, c.data.buckets);
  LearnerRegistry learner = resume.empty() ? LearnerRegistry(c.learner) : load_snapshot(resume);
  const auto workload = workload_for(c, learner.iteration);

  fs::create_directories(c.output.dir);
  auto observations = open_out(c.output.dir / "observations.csv");
  write_observation_csv_header(observations);
  const auto records = run_adaptive_loop(catalog, stats, workload, learner, loop_options(c), &observations);

  auto iterations = open_out(c.output.dir / "iterations.csv");
  write_iterations_csv(records, iterations);
  auto convergence = open_out(c.output.dir / "convergence.csv");
  convergence << "template,converged,last_change,iterations,plan\n";
  for (const auto& [id, info] : detect_convergence(records, c.workload.window))
    convergence << id << ',' << (info.converged ? "yes" : "no") << ',' << info.last_change << ',' << info.iterations
                << ',' << csv_field(info.final_fingerprint) << '\n';
  auto snapshot = open_out(c.output.dir / "learner.snapshot");
  learner.save(snapshot);
  std::cout << "ran " << records.size() << " iteration(s); learner at iteration " << learner.iteration << "\n";
  return 0;
}

int cmd_explain(const CommonOptions& o, const std::string& query_id, const std::string& snapshot) {
  const ExperimentConfig c = resolve(o);
  const QueryTemplate& tmpl = c.query(query_id);
  const Catalog catalog = build_catalog(c);
  const StatsCatalog stats(catalog, c.data.buckets);
  std::mt19937_64 rng(c.workload_seed());
  const Query query = tmpl.instantiate(rng);
  const LearnerRegistry learner = snapshot.empty() ? LearnerRegistry(c.learner) : load_snapshot(snapshot);
  const EstimatorPlugin plugin = c.mode == EstimatorMode::Adaptive ? EstimatorPlugin(catalog, stats, learner)
                                                                   : EstimatorPlugin(catalog, stats);
  const PhysicalPlan plan = best_plan(query, catalog, plugin, c.optimizer);
  std::cout << explain(*plan);
  return 0;
}

int cmd_compare(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  if (c.compare.query.empty()) throw ConfigError("[compare] query is not set");
  const Catalog catalog = build_catalog(c);
  const StatsCatalog stats(catalog, c.data.buckets);
  CompareOptions opts;
  opts.kinds = c.compare.kinds;
  opts.learner = c.learner;
  opts.observations = c.compare.observations;
  opts.report_every = c.compare.report_every;
  opts.final_window = c.compare.final_window;
  opts.seed = c.workload_seed();
  const auto curves = compare_learners(catalog, stats, c.query(c.compare.query), opts);

  fs::create_directories(c.output.dir);
  auto csv = open_out(c.output.dir / "curves.csv");
  write_curves_csv(curves, csv);
  if (c.output.svg) {
    auto svg = open_out(c.output.dir / "curves.svg");
    write_curves_svg(curves, svg);
  }
  for (const auto& curve : curves)
    std::cout << to_string(curve.kind) << " final mean |ln(e/t)| = " << format_fixed(curve.final_error, 4) << "\n";
  return 0;
}

int cmd_report(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  const Catalog catalog = build_catalog(c);
  const StatsCatalog stats(catalog, c.data.buckets);
  LearnerRegistry learner(c.learner);
  const auto records = run_adaptive_loop(catalog, stats, workload_for(c, 0), learner, loop_options(c));

  fs::create_directories(c.output.dir);
  auto card = open_out(c.output.dir / "cardinality.csv");
  auto cost = open_out(c.output.dir / "cost.csv");
  const CardCostSummary summary = card_cost_report(records, card, cost);
  if (c.output.svg) {
    auto svg = open_out(c.output.dir / "cardinality.svg");
    write_scatter_svg(records, svg);
  }
  std::cout << summary.points << " node(s); median q-error " << format_fixed(summary.median_q_error, 3)
            << ", max q-error " << format_fixed(summary.max_q_error, 3) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive cardinality estimation experiments"};
  app.require_subcommand(1);

  CommonOptions gen_o, run_o, explain_o, compare_o, report_o;
  std::string resume, query_id, snapshot;

  auto* gen = app.add_subcommand("gen", "Generate table CSVs and a manifest");
  add_common(gen, gen_o, false);
  auto* run = app.add_subcommand("run", "Run the plan/execute/learn loop");
  add_common(run, run_o, true);
  run->add_option("--resume", resume, "Learner snapshot to continue from")->check(CLI::ExistingFile);
  auto* exp = app.add_subcommand("explain", "Print the chosen plan for one query");
  add_common(exp, explain_o, true);
  exp->add_option("--query", query_id, "Query id")->required();
  exp->add_option("--snapshot", snapshot, "Learner snapshot for adaptive estimates")->check(CLI::ExistingFile);
  auto* cmp = app.add_subcommand("compare", "Learning curves of several learner kinds");
  add_common(cmp, compare_o, true);
  auto* rep = app.add_subcommand("report", "Cardinality and cost scatter data");
  add_common(rep, report_o, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gen_o);
    if (*run) return cmd_run(run_o, resume);
    if (*exp) return cmd_explain(explain_o, query_id, snapshot);
    if (*cmp) return cmd_compare(compare_o);
    if (*rep) return cmd_report(report_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
