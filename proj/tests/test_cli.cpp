#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = 0;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cardlearn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + CARDLEARN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  Result r;
#ifdef WEXITSTATUS
  r.status = WEXITSTATUS(raw);
#else
  r.status = raw;
#endif
  r.output = slurp(log);
  return r;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kSection2 = std::string(CARDLEARN_CONFIGS) + "/section2.conf";

const char* kChain = R"([data]
seed = 4
buckets = 16

[table a]
rows = 300
column = id int uniform 0 99
column = x int uniform 0 9

[table b]
rows = 200
column = id int uniform 0 99
column = y int uniform 0 9

[table c]
rows = 100
column = id int uniform 0 99

[table d]
rows = 150
column = id int uniform 0 99

[query chain]
relations = a, b, c
clause = a.id = b.id
clause = b.id = c.id
clause = a.x < uniform_int(2, 8)

[query single]
relations = a
clause = a.x < 5

[query empty]
relations = d
clause = d.id < 0

[workload]
iterations = 4
templates = chain, single

[compare]
query = single
observations = 50
report_every = 10
final_window = 10
)";

}  // namespace

TEST_CASE("gen writes tables and a manifest deterministically") {
  const auto dir = scratch("gen");
  write(dir / "chain.conf", kChain);
  const auto r = cli("gen --config \"" + (dir / "chain.conf").string() + "\" --out \"" + (dir / "g1").string() + "\"",
                     dir);
  REQUIRE(r.status == 0);
  for (auto t : {"a", "b", "c", "d"}) CHECK(fs::exists(dir / "g1" / (std::string(t) + ".csv")));
  const auto manifest = slurp(dir / "g1" / "manifest.txt");
  CHECK(manifest.find("seed 4\n") == 0);
  CHECK(manifest.find("table a rows 300 file a.csv\n") != std::string::npos);
  CHECK(count_lines(slurp(dir / "g1" / "a.csv")) == 301);
  CHECK(slurp(dir / "g1" / "stats.csv").rfind("table,column,", 0) == 0);

  cli("gen --config \"" + (dir / "chain.conf").string() + "\" --out \"" + (dir / "g2").string() + "\"", dir);
  CHECK(slurp(dir / "g1" / "b.csv") == slurp(dir / "g2" / "b.csv"));
  cli("gen --config \"" + (dir / "chain.conf").string() + "\" --seed 5 --out \"" + (dir / "g3").string() + "\"", dir);
  CHECK(slurp(dir / "g1" / "b.csv") != slurp(dir / "g3" / "b.csv"));
}

TEST_CASE("gen rejects an out-of-range rule probability") {
  const auto dir = scratch("badp");
  write(dir / "bad.conf", "[table t]\nrows = 5\ncolumn = a int uniform 0 1\ncolumn = b int uniform 0 1\n"
                          "rule = b = a p 1.5\n");
  const auto r = cli("gen --config \"" + (dir / "bad.conf").string() + "\" --out \"" + (dir / "o").string() + "\"", dir);
  CHECK(r.status == 1);
  CHECK(r.output.find("error: ") == 0);
  CHECK(r.output.find(":5:") != std::string::npos);
  CHECK(r.output.find("field 'p'") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o" / "t.csv"));
}

TEST_CASE("run, resume and rerun") {
  const auto dir = scratch("run");
  write(dir / "chain.conf", kChain);
  const std::string conf = "--config \"" + (dir / "chain.conf").string() + "\"";
  REQUIRE(cli("run " + conf + " --out \"" + (dir / "r1").string() + "\"", dir).status == 0);
  const auto iterations = slurp(dir / "r1" / "iterations.csv");
  CHECK(count_lines(iterations) == 9);
  CHECK(iterations.find("\n8,single,4,") != std::string::npos);
  CHECK(slurp(dir / "r1" / "observations.csv").rfind("space_digest,coordinates,true_cardinality,query,iteration\n", 0) ==
        0);
  const auto convergence = slurp(dir / "r1" / "convergence.csv");
  CHECK(convergence.rfind("template,converged,last_change,iterations,plan\n", 0) == 0);
  CHECK(count_lines(convergence) == 3);
  REQUIRE(fs::exists(dir / "r1" / "learner.snapshot"));

  // Resuming continues the global iteration numbering.
  REQUIRE(cli("run " + conf + " --out \"" + (dir / "r2").string() + "\" --resume \"" +
                  (dir / "r1" / "learner.snapshot").string() + "\"",
              dir)
              .status == 0);
  const auto resumed = slurp(dir / "r2" / "iterations.csv");
  CHECK(resumed.find("\n9,chain,1,") != std::string::npos);
  CHECK(resumed.find("\n16,single,4,") != std::string::npos);

  // Same config and seed: byte-identical outputs.
  REQUIRE(cli("run " + conf + " --out \"" + (dir / "r3").string() + "\"", dir).status == 0);
  for (auto f : {"iterations.csv", "observations.csv", "convergence.csv", "learner.snapshot"})
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r3" / f));
}

TEST_CASE("explain") {
  const auto dir = scratch("explain");
  write(dir / "chain.conf", kChain);
  const std::string conf = "--config \"" + (dir / "chain.conf").string() + "\"";
  auto r = cli("explain " + conf + " --query single", dir);
  REQUIRE(r.status == 0);
  CHECK(r.output.rfind("Scan on a  (rows=", 0) == 0);
  CHECK(count_lines(r.output) <= 2);

  r = cli("explain " + conf + " --query chain", dir);
  REQUIRE(r.status == 0);
  std::size_t joins = 0;
  for (std::size_t p = r.output.find("Join  (rows="); p != std::string::npos; p = r.output.find("Join  (rows=", p + 1))
    ++joins;
  CHECK(joins == 2);

  CHECK(cli("explain " + conf + " --query nope", dir).status == 1);

  // The learned estimate replaces the 5000-row baseline.
  const std::string s2 = "--config \"" + kSection2 + "\" --out \"" + (dir / "s2").string() + "\"";
  REQUIRE(cli("run " + s2, dir).status == 0);
  const auto baseline = cli("explain " + s2 + " --query q --mode baseline", dir).output;
  CHECK(baseline.find("rows=5000.00") != std::string::npos);
  const auto adaptive =
      cli("explain " + s2 + " --query q --snapshot \"" + (dir / "s2" / "learner.snapshot").string() + "\"", dir).output;
  CHECK(adaptive.find("rows=10000.00") != std::string::npos);
}

TEST_CASE("compare and report") {
  const auto dir = scratch("compare");
  write(dir / "chain.conf", kChain);
  const std::string conf = "--config \"" + (dir / "chain.conf").string() + "\"";
  auto r = cli("compare " + conf + " --out \"" + (dir / "c").string() + "\"", dir);
  REQUIRE(r.status == 0);
  CHECK(count_lines(r.output) == 4);
  const auto curves = slurp(dir / "c" / "curves.csv");
  CHECK(curves.rfind("kind,observations,mean_abs_log_error\n", 0) == 0);
  CHECK(count_lines(curves) == 1 + 4 * 5);

  r = cli("report " + conf + " --mode baseline --out \"" + (dir / "rep").string() + "\"", dir);
  REQUIRE(r.status == 0);
  CHECK(r.output.find("median q-error") != std::string::npos);
  CHECK(fs::exists(dir / "rep" / "cardinality.csv"));
  CHECK(fs::exists(dir / "rep" / "cost.csv"));

  std::string none = kChain;
  none.replace(none.find("iterations = 4"), 14, "iterations = 0");
  write(dir / "none.conf", none);
  r = cli("report --config \"" + (dir / "none.conf").string() + "\" --out \"" + (dir / "none").string() + "\"", dir);
  CHECK(r.status == 1);
  CHECK(r.output.find("no records") != std::string::npos);
}

TEST_CASE("usage errors") {
  const auto dir = scratch("usage");
  CHECK(cli("", dir).status != 0);
  CHECK(cli("run --config /no/such/file", dir).status != 0);
  CHECK(cli("run --config \"" + kSection2 + "\" --learner forest", dir).status != 0);
}
