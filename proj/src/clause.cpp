#include "cardlearn/clause.hpp"

#include <array>
#include <cctype>

#include "cardlearn/error.hpp"
#include "cardlearn/format.hpp"

namespace cardlearn {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "<>";
  }
  return "?";
}

CompareOp parse_compare_op(std::string_view text) {
  text = trim(text);
  if (text == "<") return CompareOp::Lt;
  if (text == "<=") return CompareOp::Le;
  if (text == ">") return CompareOp::Gt;
  if (text == ">=") return CompareOp::Ge;
  if (text == "=" || text == "==") return CompareOp::Eq;
  if (text == "<>" || text == "!=") return CompareOp::Ne;
  throw UnsupportedClause("unsupported operator '" + std::string(text) + "'");
}

CompareOp mirror(CompareOp op) {
  switch (op) {
    case CompareOp::Lt: return CompareOp::Gt;
    case CompareOp::Le: return CompareOp::Ge;
    case CompareOp::Gt: return CompareOp::Lt;
    case CompareOp::Ge: return CompareOp::Le;
    default: return op;
  }
}

bool evaluate(CompareOp op, double lhs, double rhs) {
  switch (op) {
    case CompareOp::Lt: return lhs < rhs;
    case CompareOp::Le: return lhs <= rhs;
    case CompareOp::Gt: return lhs > rhs;
    case CompareOp::Ge: return lhs >= rhs;
    case CompareOp::Eq: return lhs == rhs;
    case CompareOp::Ne: return lhs != rhs;
  }
  return false;
}

std::string to_string(const ColumnRef& ref) { return ref.table + "." + ref.column; }

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

}  // namespace

ColumnRef parse_column_ref(std::string_view text) {
  text = trim(text);
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) throw UnsupportedClause("expected table.column, got '" + std::string(text) + "'");
  const auto table = text.substr(0, dot);
  const auto column = text.substr(dot + 1);
  if (!is_identifier(table) || !is_identifier(column))
    throw UnsupportedClause("expected table.column, got '" + std::string(text) + "'");
  return {std::string(table), std::string(column)};
}

std::string to_string(const Clause& clause) {
  std::string out = to_string(clause.left) + " " + std::string(to_string(clause.op)) + " ";
  if (clause.has_constant())
    out += format_double(clause.constant());
  else
    out += to_string(clause.right_column());
  return out;
}

Clause parse_clause(std::string_view text) {
  const std::string original(trim(text));
  // Longest operators first so "<=" is not read as "<".
  static constexpr std::array<std::string_view, 8> ops = {"<=", ">=", "<>", "!=", "==", "<", ">", "="};
  std::size_t pos = std::string::npos;
  std::string_view found;
  for (auto op : ops) {
    const auto p = original.find(op);
    if (p != std::string::npos && (pos == std::string::npos || p < pos || (p == pos && op.size() > found.size()))) {
      pos = p;
      found = op;
    }
  }
  if (pos == std::string::npos) throw UnsupportedClause("no comparison operator in '" + original + "'");
  const std::string_view lhs = trim(std::string_view(original).substr(0, pos));
  const std::string_view rhs = trim(std::string_view(original).substr(pos + found.size()));
  for (std::string_view bad : {" or ", " OR ", " and ", " AND ", "null", "NULL", "(", ")"}) {
    if (original.find(bad) != std::string::npos)
      throw UnsupportedClause("only atomic comparisons are supported: '" + original + "'");
  }

  Clause clause;
  clause.op = parse_compare_op(found);
  const bool lhs_is_column = lhs.find('.') != std::string_view::npos && !std::isdigit(static_cast<unsigned char>(lhs[0])) &&
                             lhs[0] != '-';
  const bool rhs_is_column = rhs.find('.') != std::string_view::npos && !rhs.empty() &&
                             !std::isdigit(static_cast<unsigned char>(rhs[0])) && rhs[0] != '-' && rhs[0] != '+';
  if (lhs_is_column) {
    clause.left = parse_column_ref(lhs);
    if (rhs_is_column)
      clause.right = parse_column_ref(rhs);
    else
      clause.right = parse_double(rhs);
  } else if (rhs_is_column) {
    clause.left = parse_column_ref(rhs);
    clause.op = mirror(clause.op);
    clause.right = parse_double(lhs);
  } else {
    throw UnsupportedClause("clause '" + original + "' references no column");
  }
  return clause;
}

}  // namespace cardlearn
