#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cardlearn/catalog.hpp"
#include "cardlearn/optimizer.hpp"
#include "cardlearn/plan.hpp"

namespace cardlearn::testing {

/// Table with integer columns a in [0,6), b in [0,10), c in [0,4).
inline Table random_table(const std::string& name, std::size_t rows, std::mt19937_64& rng) {
  std::vector<Tuple> data;
  for (std::size_t i = 0; i < rows; ++i)
    data.push_back({static_cast<std::int64_t>(rng() % 6), static_cast<std::int64_t>(rng() % 10),
                    static_cast<std::int64_t>(rng() % 4)});
  return create_table(TableSchema(name, {{"a", ColumnKind::Integer}, {"b", ColumnKind::Integer},
                                         {"c", ColumnKind::Integer}}),
                      data);
}

/// Connected query over the first n names: a random spanning tree of mostly
/// equality join clauses, a few extra edges and constant filters.
inline Query random_query(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& names) {
  Query q;
  q.id = "r";
  std::vector<std::string> rel(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(n));
  std::shuffle(rel.begin(), rel.end(), rng);
  q.relations = rel;
  const char* cols[] = {"a", "b", "c"};
  auto col = [&](const std::string& t) { return ColumnRef{t, cols[rng() % 3]}; };
  for (std::size_t i = 1; i < n; ++i) {
    const auto& other = rel[rng() % i];
    const CompareOp op = rng() % 5 ? CompareOp::Eq : CompareOp::Lt;
    q.clauses.push_back(Clause{col(rel[i]), op, col(other)});
  }
  for (std::size_t e = rng() % 3; e > 0 && n > 1; --e) {
    const auto& x = rel[rng() % n];
    const auto& y = rel[rng() % n];
    if (x != y) q.clauses.push_back(Clause{col(x), rng() % 3 ? CompareOp::Eq : CompareOp::Ge, col(y)});
  }
  for (std::size_t f = rng() % 4; f > 0; --f)
    q.clauses.push_back(Clause{col(rel[rng() % n]), static_cast<CompareOp>(rng() % 6), double(rng() % 8)});
  return q;
}

// ---------------------------------------------------------------------------
// Brute-force enumeration of every bushy plan with every operator choice.

struct Costed {
  double cost;
  std::string fingerprint;
};

class BruteForce {
 public:
  BruteForce(const Query& q, const Catalog& catalog, const CardinalityModel& model, CostConstants k, bool cross)
      : graph_(q), catalog_(catalog), model_(model), k_(k), cross_(cross) {
    // Column equivalence by repeated closure over the query's equalities.
    for (const auto& c : q.clauses) {
      if (c.has_constant()) continue;
      if (c.op == CompareOp::Eq)
        eq_.emplace_back(c.left, c.right_column());
      else if (c.left.table != c.right_column().table)
        theta_.emplace_back(c.left.table, c.right_column().table);
    }
  }

  Costed best() {
    const auto all = plans(graph_.full_mask());
    if (all.empty()) throw std::logic_error("brute force: no plan");
    Costed b = all.front();
    for (const auto& p : all)
      if (p.cost < b.cost || (p.cost == b.cost && p.fingerprint < b.fingerprint)) b = p;
    return b;
  }

 private:
  bool in(std::uint32_t mask, const std::string& table) const {
    const auto& r = graph_.relations();
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r[i] == table) return mask & (1u << i);
    return false;
  }

  bool same_class(const ColumnRef& x, const ColumnRef& y) const {
    std::vector<ColumnRef> reach{x};
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& [a, b] : eq_) {
        const bool ha = std::find(reach.begin(), reach.end(), a) != reach.end();
        const bool hb = std::find(reach.begin(), reach.end(), b) != reach.end();
        if (ha != hb) {
          reach.push_back(ha ? b : a);
          grew = true;
        }
      }
    }
    return std::find(reach.begin(), reach.end(), y) != reach.end();
  }

  std::pair<bool, bool> connection(std::uint32_t l, std::uint32_t r) const {
    bool equality = false, any = false;
    std::vector<ColumnRef> cols;
    for (const auto& [a, b] : eq_) {
      cols.push_back(a);
      cols.push_back(b);
    }
    for (const auto& x : cols)
      for (const auto& y : cols)
        if (in(l, x.table) && in(r, y.table) && same_class(x, y)) equality = true;
    for (const auto& [ta, tb] : theta_)
      if ((in(l, ta) && in(r, tb)) || (in(l, tb) && in(r, ta))) any = true;
    return {equality, equality || any};
  }

  double card(std::uint32_t mask) { return model_.cardinality(graph_.node_for(mask)); }

  const std::vector<Costed>& plans(std::uint32_t mask) {
    if (auto it = memo_.find(mask); it != memo_.end()) return it->second;
    std::vector<Costed> out;
    if (std::popcount(mask) == 1) {
      const auto& name = graph_.relations()[static_cast<std::size_t>(std::countr_zero(mask))];
      out.push_back({static_cast<double>(catalog_.table(name).row_count()) * k_.c_tuple, "S(" + name + ")"});
    } else {
      const double out_card = card(mask);
      for (std::uint32_t l = (mask - 1) & mask; l; l = (l - 1) & mask) {
        const std::uint32_t r = mask ^ l;
        const auto [equality, connected] = connection(l, r);
        if (!connected && !cross_) continue;
        const double lc = card(l), rc = card(r);
        for (const auto& lp : plans(l)) {
          for (const auto& rp : plans(r)) {
            const std::string shape = "(" + lp.fingerprint + "," + rp.fingerprint + ")";
            out.push_back({lp.cost + rp.cost + (k_.c_startup + lc * rc * k_.c_o + out_card * k_.c_tuple),
                           "NL" + shape});
            if (!equality) continue;
            out.push_back({lp.cost + rp.cost + (k_.c_startup + (lc + rc) * k_.c_hash + out_card * k_.c_tuple),
                           "HJ" + shape});
            auto sort = [&](double n) { return n < 2 ? 0.0 : 1.39 * n * std::log2(n) * k_.c_o; };
            out.push_back({lp.cost + rp.cost +
                               (k_.c_startup + sort(lc) + sort(rc) + (lc + rc) * k_.c_o + out_card * k_.c_tuple),
                           "MJ" + shape});
          }
        }
      }
    }
    return memo_[mask] = std::move(out);
  }

  QueryGraph graph_;
  const Catalog& catalog_;
  const CardinalityModel& model_;
  CostConstants k_;
  bool cross_;
  std::vector<std::pair<ColumnRef, ColumnRef>> eq_;
  std::vector<std::pair<std::string, std::string>> theta_;
  std::map<std::uint32_t, std::vector<Costed>> memo_;
};

}  // namespace cardlearn::testing
