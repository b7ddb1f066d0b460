#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cardlearn/bench.hpp"
#include "cardlearn/catalog.hpp"
#include "cardlearn/learner.hpp"
#include "cardlearn/optimizer.hpp"

namespace cardlearn {

/// Rows given literally in the config: `count` copies of `row`.
struct RowBlock {
  std::size_t count = 0;
  Tuple row;
};

struct TableConfig {
  std::string name;
  std::vector<ColumnDef> columns;
  std::size_t rows = 0;
  CorrelationSpec correlation;  // seed is derived from the data seed
  std::vector<RowBlock> blocks; // when nonempty, replaces generation
};

struct DataConfig {
  std::uint64_t seed = 1;
  std::size_t buckets = 32;
  std::optional<std::filesystem::path> dir;  // load <dir>/<table>.csv instead of generating
  std::vector<TableConfig> tables;
};

struct WorkloadConfig {
  std::size_t iterations = 20;           // per template
  std::vector<std::string> templates;    // empty: every query in file order
  std::size_t window = 5;
};

struct CompareConfig {
  std::string query;
  std::size_t observations = 2000;
  std::size_t report_every = 100;
  std::size_t final_window = 200;
  std::vector<LearnerKind> kinds = {LearnerKind::FixedKnn, LearnerKind::PlainKnn, LearnerKind::LastKKnn,
                                    LearnerKind::LinearSgd};
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  bool svg = false;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<QueryTemplate> queries;
  WorkloadConfig workload;
  LearnerConfig learner;
  OptimizerConfig optimizer;
  EstimatorMode mode = EstimatorMode::Adaptive;
  CompareConfig compare;
  OutputConfig output;

  const QueryTemplate& query(const std::string& id) const;
  /// Templates selected by the workload section.
  std::vector<QueryTemplate> workload_templates() const;
  std::uint64_t workload_seed() const;
  std::uint64_t table_seed(std::size_t table_index) const;
};

/// Parses the sectioned key=value format documented in docs/config.md.
/// Errors carry `source:line` and the offending field name.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Generates (or loads, when data.dir is set) every configured table.
Catalog build_catalog(const ExperimentConfig& config);

/// Splitmix64 finaliser; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace cardlearn
