#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cardlearn/error.hpp"
#include "cardlearn/plan.hpp"

using namespace cardlearn;

namespace {

Clause C(std::string_view text) { return parse_clause(text); }

StatsCatalog section2_stats() {
  std::vector<Tuple> rows;
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{0}, std::int64_t{0}});
  rows.insert(rows.end(), 10000, Tuple{std::int64_t{1}, std::int64_t{1}});
  Catalog cat;
  cat.add(create_table(TableSchema("t", {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer}}), rows));
  return StatsCatalog(cat, 32);
}

}  // namespace

TEST_CASE("clause parsing") {
  const Clause c = C("people.age < 25");
  CHECK(c.left == ColumnRef{"people", "age"});
  CHECK(c.op == CompareOp::Lt);
  CHECK(c.constant() == 25);
  CHECK(to_string(c) == "people.age < 25");

  // A constant on the left is mirrored.
  CHECK(C("25 >= t.a") == C("t.a <= 25"));
  CHECK(C("t.a <> 3").op == CompareOp::Ne);
  CHECK(C("t.a = u.b").right_column() == ColumnRef{"u", "b"});

  CHECK_THROWS_AS(C("t.a = 1 or t.b = 2"), UnsupportedClause);
  CHECK_THROWS_AS(C("t.a is null"), UnsupportedClause);
  CHECK_THROWS_AS(C("t.a + 1 < 3"), UnsupportedClause);
  CHECK_THROWS_AS(C("(t.a < 3)"), UnsupportedClause);
  CHECK_THROWS_AS(C("t.a ~ 3"), UnsupportedClause);
}

TEST_CASE("template_of strips constants only") {
  CHECK(template_of(C("t.age < 25")) == template_of(C("t.age < 26")));
  CHECK(template_of(C("t.age < 25")) != template_of(C("t.age > 25")));
  const auto j = template_of(C("t1.a = t2.b"));
  CHECK(to_string(j) == "t1.a = t2.b");
  CHECK(to_string(template_of(C("t.age < 25"))) == "t.age < CONST");
}

TEST_CASE("template rendering round trips") {
  for (auto text : {"t.a < 1", "t.a <= 2", "t.b > 3", "t.b >= 4", "u.c = 5", "u.c <> 6", "t.a = u.c", "t.a < u.c"}) {
    const auto tmpl = template_of(C(text));
    CHECK(parse_template(to_string(tmpl)) == tmpl);
  }
}

TEST_CASE("equivalence classes") {
  const std::vector<Clause> one{C("t.a = u.b")};
  CHECK(equivalence_classes_of(one).size() == 1);

  const std::vector<Clause> chain{C("t.a = u.b"), C("u.b = v.c")};
  const auto classes = equivalence_classes_of(chain);
  REQUIRE(classes.size() == 1);
  CHECK(classes[0].members.size() == 3);
  CHECK(std::is_sorted(classes[0].members.begin(), classes[0].members.end()));

  const std::vector<Clause> disjoint{C("t.a = u.b"), C("t.c = u.d")};
  CHECK(equivalence_classes_of(disjoint).size() == 2);

  const std::vector<Clause> theta{C("t.a < u.b")};
  CHECK_THROWS_AS(equivalence_classes_of(theta), ContractViolation);
}

TEST_CASE("logical nodes fold large classes into a marker") {
  const std::vector<Clause> clauses{C("t.a = u.b"), C("v.c = u.b"), C("t.x < 5")};
  const LogicalNode node = make_logical_node({"v", "u", "t"}, clauses);
  CHECK(node.relations == std::vector<std::string>{"t", "u", "v"});
  REQUIRE(node.equivalence_classes.size() == 1);
  CHECK(node.clauses.size() == 1);
  CHECK(node.feature_count() == 1);

  const std::vector<Clause> pair{C("u.b = t.a")};
  const LogicalNode two = make_logical_node({"t", "u"}, pair);
  CHECK(two.equivalence_classes.empty());
  REQUIRE(two.clauses.size() == 1);
  CHECK(to_string(two.clauses[0]) == "t.a = u.b");
  CHECK(two.feature_count() == 0);

  const std::vector<Clause> outside{C("w.z < 1")};
  CHECK_THROWS_AS(make_logical_node({"t"}, outside), UnsupportedClause);
}

TEST_CASE("feature space keys") {
  const std::vector<Clause> ab{C("t.a < 25"), C("t.b = 3")};
  const std::vector<Clause> ba{C("t.b = 3"), C("t.a < 25")};
  const std::vector<Clause> other_constants{C("t.a < 30"), C("t.b = 4")};
  const auto k1 = feature_space_key(make_logical_node({"t"}, ab));
  CHECK(k1 == feature_space_key(make_logical_node({"t"}, ba)));
  CHECK(k1 == feature_space_key(make_logical_node({"t"}, other_constants)));
  CHECK(k1 != feature_space_key(make_logical_node({"t", "u"}, ab)));
  CHECK(k1.digest == "R[t] T[t.a < CONST; t.b = CONST] E[]");
  CHECK(k1.short_hash().size() == 16);
}

TEST_CASE("keys are stable under random permutations") {
  std::vector<Clause> clauses{C("t.a < 25"), C("u.b >= 1"),  C("t.a = u.c"), C("v.d = u.c"),
                              C("u.e > t.f"), C("t.a < 40"), C("v.g <> 2")};
  const std::vector<std::string> relations{"t", "u", "v"};
  const LogicalNode reference = make_logical_node(relations, clauses);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto c = clauses;
    auto r = relations;
    std::shuffle(c.begin(), c.end(), rng);
    std::shuffle(r.begin(), r.end(), rng);
    // Swap the operands of every column comparison.
    for (auto& cl : c)
      if (!cl.has_constant() && rng() % 2) cl = Clause{cl.right_column(), mirror(cl.op), cl.left};
    const LogicalNode node = make_logical_node(r, c);
    CHECK(node == reference);
    CHECK(feature_space_key(node) == feature_space_key(reference));
  }
}

TEST_CASE("feature vectors") {
  const StatsCatalog stats = section2_stats();
  const std::vector<Clause> one{C("t.a = 0")};
  const auto x = feature_vector(make_logical_node({"t"}, one), stats);
  REQUIRE(x.size() == 1);
  CHECK(x[0] == doctest::Approx(-0.6931).epsilon(1e-4));

  const std::vector<Clause> none{C("t.a = 7")};
  CHECK(feature_vector(make_logical_node({"t"}, none), stats)[0] == doctest::Approx(std::log(1e-9)));

  // Selectivities 0.5 and 0.25: b < 0.5 interpolates half of the single
  // bucket below 1.
  Catalog cat;
  std::vector<Tuple> rows;
  for (std::int64_t i = 0; i < 4; ++i) rows.push_back({i, i});
  cat.add(create_table(TableSchema("t", {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer}}), rows));
  const StatsCatalog s4(cat, 4);
  const std::vector<Clause> two{C("t.b = 2"), C("t.a < 2")};
  const auto v = feature_vector(make_logical_node({"t"}, two), s4);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(-0.6931).epsilon(1e-4));  // t.a < 2 sorts first
  CHECK(v[1] == doctest::Approx(-1.3863).epsilon(1e-4));

  std::vector<std::string> warnings;
  const std::vector<Clause> unknown{C("t.zz < 1")};
  CHECK(feature_vector(make_logical_node({"t"}, unknown), s4, &warnings)[0] == 0.0);
  CHECK(warnings.size() == 1);
}

TEST_CASE("coordinates stay nonpositive and aligned with the key") {
  const StatsCatalog stats = section2_stats();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double c1 = static_cast<double>(rng() % 5) - 2, c2 = static_cast<double>(rng() % 5) - 2;
    const std::vector<Clause> clauses{Clause{{"t", "b"}, CompareOp::Le, c1}, Clause{{"t", "a"}, CompareOp::Gt, c2}};
    const LogicalNode node = make_logical_node({"t"}, clauses);
    const auto x = feature_vector(node, stats);
    CHECK(static_cast<std::size_t>(x.size()) == node.filter_templates().size());
    CHECK(x.maxCoeff() <= 0.0);
    CHECK(feature_space_key(node).digest == "R[t] T[t.a > CONST; t.b <= CONST] E[]");
  }
}

TEST_CASE("fingerprint and explain") {
  auto scan = [](std::string t, double rows) {
    auto n = std::make_shared<PlanNode>();
    n->table = std::move(t);
    n->estimated_cardinality = rows;
    n->estimated_cost = rows;
    return n;
  };
  auto join = std::make_shared<PlanNode>();
  join->op = PlanOp::HashJoin;
  join->left = scan("t", 100);
  join->right = scan("u", 50);
  join->clauses = {C("t.a = u.b")};
  join->estimated_cardinality = 5000;
  join->estimated_cost = 5450;
  CHECK(plan_fingerprint(*join) == "HJ(S(t),S(u))");
  CHECK(explain(*join) ==
        "HashJoin  (rows=5000.00 cost=5450.00)\n"
        "   Join Cond: t.a = u.b\n"
        "  -> Scan on t  (rows=100.00 cost=100.00)\n"
        "  -> Scan on u  (rows=50.00 cost=50.00)\n");
  std::vector<std::string> paths;
  for_each_node(*join, [&](const PlanNode&, const std::string& p) { paths.push_back(p); });
  CHECK(paths == std::vector<std::string>{"", "L", "R"});
}
