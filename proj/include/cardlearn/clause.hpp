#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <variant>

namespace cardlearn {

/// Declaration order is the canonical operator rank.
enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };

std::string_view to_string(CompareOp op);
CompareOp parse_compare_op(std::string_view text);
/// Operator that keeps the clause meaning when its operands are swapped.
CompareOp mirror(CompareOp op);
bool evaluate(CompareOp op, double lhs, double rhs);

struct ColumnRef {
  std::string table;
  std::string column;

  friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

std::string to_string(const ColumnRef& ref);
/// Parses `table.column`; throws UnsupportedClause on anything else.
ColumnRef parse_column_ref(std::string_view text);

/// Atomic predicate `left op right`, where right is a constant or a column.
struct Clause {
  ColumnRef left;
  CompareOp op = CompareOp::Eq;
  std::variant<double, ColumnRef> right;

  bool has_constant() const { return std::holds_alternative<double>(right); }
  double constant() const { return std::get<double>(right); }
  const ColumnRef& right_column() const { return std::get<ColumnRef>(right); }
  bool is_column_equality() const { return !has_constant() && op == CompareOp::Eq; }

  friend bool operator==(const Clause&, const Clause&) = default;
};

std::string to_string(const Clause& clause);

/// Parses `t.a < 25`, `t.a = u.b`. Only the six comparison operators are
/// accepted; disjunctions, NULL tests and expressions are rejected with
/// UnsupportedClause.
Clause parse_clause(std::string_view text);

}  // namespace cardlearn
