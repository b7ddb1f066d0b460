#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cardlearn/catalog.hpp"
#include "cardlearn/error.hpp"

using namespace cardlearn;

namespace {

TableSchema two_ints(const std::string& name = "t") {
  return TableSchema(name, {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer}});
}

std::vector<Tuple> correlated_rows() {
  std::vector<Tuple> rows;
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{0}, std::int64_t{0}});
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{1}, std::int64_t{1}});
  return rows;
}

}  // namespace

TEST_CASE("create_table stores rows") {
  CHECK(row_count(create_table(two_ints(), {})) == 0);

  const Table t = create_table(two_ints(), correlated_rows());
  CHECK(row_count(t) == 20000);
  CHECK(t.at(0, 0) == 0);
  CHECK(t.at(19999, 1) == 1);
}

TEST_CASE("create_table rejects arity and kind mismatches") {
  TableSchema one("t", {{"a", ColumnKind::Integer}});
  try {
    create_table(one, {Tuple{std::int64_t{1}, std::int64_t{2}}});
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.row_index() == 0);
  }
  try {
    create_table(one, {Tuple{std::int64_t{1}}, Tuple{2.5}});
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.row_index() == 1);
  }
  // Real columns accept integers.
  TableSchema real("r", {{"x", ColumnKind::Real}});
  CHECK(create_table(real, {Tuple{std::int64_t{3}}, Tuple{0.5}}).at(1, 0) == 0.5);
}

TEST_CASE("schema validation") {
  CHECK_THROWS_AS(TableSchema("t", {}), CatalogError);
  CHECK_THROWS_AS(TableSchema("t", {{"a", ColumnKind::Integer}, {"a", ColumnKind::Real}}), CatalogError);
  CHECK(two_ints().index_of("b") == 1);
  CHECK_THROWS_AS(two_ints().index_of("zz"), CatalogError);
  CHECK(parse_column_kind("real") == ColumnKind::Real);
  CHECK_THROWS_AS(parse_column_kind("text"), CatalogError);
}

TEST_CASE("generate_table with an exact dependency") {
  CorrelationSpec spec;
  spec.marginals["a"] = UniformMarginal{0, 1};
  spec.rules.push_back({"a", "b"});
  spec.seed = 42;

  CHECK(row_count(generate_table(two_ints(), 0, spec)) == 0);

  const std::size_t n = 20000;
  const Table t = generate_table(two_ints(), n, spec);
  REQUIRE(row_count(t) == n);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(t.at(i, 0) == t.at(i, 1));
    if (t.at(i, 0) == 0) ++zeros;
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(static_cast<double>(zeros) - n / 2.0) <= 5 * sigma);

  CHECK(generate_table(two_ints(), n, spec) == t);
  CHECK(row_count(generate_table(two_ints(), 1234, spec)) == 1234);
}

TEST_CASE("generate_table honours partial dependencies and marginals") {
  TableSchema schema("t", {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer}, {"c", ColumnKind::Real}});
  CorrelationSpec spec;
  spec.marginals["a"] = UniformMarginal{0, 9};
  spec.marginals["b"] = CategoricalMarginal{{100, 200}, {1, 3}};
  spec.marginals["c"] = UniformMarginal{-1, 1};
  spec.rules.push_back({"a", "b", 2.0, 1.0, 0.7});
  spec.seed = 3;
  const std::size_t n = 40000;
  const Table t = generate_table(schema, n, spec);

  std::size_t followed = 0, b200 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = t.at(i, 0), b = t.at(i, 1), c = t.at(i, 2);
    CHECK(a >= 0);
    CHECK(a <= 9);
    CHECK(a == std::floor(a));
    CHECK(c >= -1);
    CHECK(c <= 1);
    if (b == 2 * a + 1)
      ++followed;
    else if (b == 200)
      ++b200;
    else
      CHECK(b == 100);
  }
  // 70% follow the rule; the rest split 1:3 between 100 and 200.
  CHECK(std::abs(followed / double(n) - 0.7) < 0.02);
  CHECK(std::abs(b200 / double(n) - 0.3 * 0.75) < 0.02);
}

TEST_CASE("generate_table configuration errors") {
  CorrelationSpec cyclic;
  cyclic.rules = {{"a", "b"}, {"b", "a"}};
  CHECK_THROWS_AS(generate_table(two_ints(), 10, cyclic), ConfigError);

  CorrelationSpec bad_p;
  bad_p.marginals["a"] = UniformMarginal{0, 1};
  bad_p.rules.push_back({"a", "b", 1, 0, 1.5});
  CHECK_THROWS_AS(generate_table(two_ints(), 10, bad_p), ConfigError);

  CorrelationSpec missing;
  missing.marginals["a"] = UniformMarginal{0, 1};
  CHECK_THROWS_AS(generate_table(two_ints(), 10, missing), ConfigError);
}

TEST_CASE("csv round trip") {
  TableSchema schema("t", {{"id", ColumnKind::Integer}, {"x", ColumnKind::Real}});
  const Table t = create_table(schema, {Tuple{std::int64_t{1}, 0.1}, Tuple{std::int64_t{-7}, 1e-300},
                                        Tuple{std::int64_t{3}, 2.0 / 3.0}});
  std::stringstream buf;
  write_csv(t, buf);
  CHECK(buf.str().rfind("id:int,x:real\n", 0) == 0);
  CHECK(read_csv("t", buf) == t);

  std::istringstream bad("a:int\n1.5\n");
  CHECK_THROWS_AS(read_csv("t", bad), Error);
}

TEST_CASE("catalog lookup") {
  Catalog c;
  c.add(create_table(two_ints("u"), {}));
  CHECK(c.contains("u"));
  CHECK_FALSE(c.contains("v"));
  CHECK_THROWS_AS(c.table("v"), CatalogError);
}
