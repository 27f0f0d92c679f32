#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsq/error.hpp"
#include "dsq/metalang.hpp"
#include "dsq/validate.hpp"

namespace dsq {

struct SqlText {
  std::string statement;
  std::string dialect = "generic";
  friend bool operator==(const SqlText&, const SqlText&) = default;
};

/// SQL rendering of an expression: binary operators spaced, parentheses
/// exactly where the tree has them.
inline std::string sql_expr(const Expr& e) {
  struct V {
    std::string operator()(const Expr::Number& n) const { return n.digits; }
    std::string operator()(const Expr::Param& p) const {
      throw Error(ErrorKind::UnboundParameter, "parameter '" + p.name + "' has no value");
    }
    std::string operator()(const Expr::Paren& p) const { return "(" + sql_expr(*p.inner) + ")"; }
    std::string operator()(const Expr::Binary& b) const {
      return sql_expr(*b.lhs) + " " + to_char(b.op) + " " + sql_expr(*b.rhs);
    }
  };
  return std::visit(V{}, e.node);
}

/// `attr SIGN expr`. `attribute` overrides the predicate's own name, e.g.
/// when validation resolved it through a synonym.
inline std::string translate_predicate(const Predicate& p, const std::optional<std::string>& attribute = std::nullopt) {
  return attribute.value_or(p.attribute) + " " + std::string(to_string(p.comparator)) + " " + sql_expr(p.rhs);
}

namespace detail {

inline void require_structured(const Binding& b) {
  if (b.category != Category::Structured)
    throw Error(ErrorKind::NotTranslatable, b.entity + " lives in a " + std::string(to_string(b.category)) + " source");
  if (b.keyword) throw Error(ErrorKind::NotTranslatable, "keyword search on " + b.entity);
}

inline std::string select_items(const std::vector<ObjectItem>& items, const std::vector<Binding>& binds) {
  const std::string& entity = binds.front().entity;
  const std::string& model = binds.front().model;
  for (const auto& b : binds) {
    require_structured(b);
    if (b.entity != entity || b.model != model)
      throw Error(ErrorKind::NotTranslatable, "selection spans entities " + entity + " and " + b.entity);
  }
  std::string list;
  std::vector<std::string> group_by;
  bool any_agg = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Binding& b = binds[i];
    std::string col;
    if (items[i].agg) {
      any_agg = true;
      col = std::string(to_string(*items[i].agg)) + "(" + b.attribute.value_or("*") + ")";
    } else {
      col = b.attribute.value_or("*");
      if (b.attribute && std::find(group_by.begin(), group_by.end(), *b.attribute) == group_by.end())
        group_by.push_back(*b.attribute);
    }
    list += (list.empty() ? "" : ", ") + col;
  }
  std::string sql = "SELECT " + list + " FROM " + entity;
  if (any_agg && !group_by.empty()) {
    std::string keys;
    for (const auto& g : group_by) keys += (keys.empty() ? "" : ", ") + g;
    sql += " GROUP BY " + keys;
  }
  return sql;
}

}  // namespace detail

/// Generic SQL for Se, question, Cons and set-operation queries over
/// structured sources.
inline SqlText translate(const ValidatedQuery& vq) {
  struct V {
    const ValidatedQuery& vq;
    std::string operator()(const SelectQuery& x) const { return detail::select_items(x.items, vq.bindings); }
    std::string operator()(const QuestionQuery& x) const { return detail::select_items(x.items, vq.bindings); }
    std::string operator()(const ConsQuery& x) const {
      const Binding& b = vq.bindings.at(0);
      detail::require_structured(b);
      std::string sql = "SELECT * FROM " + b.entity;
      for (std::size_t i = 0; i < x.predicates.size(); ++i)
        sql += (i == 0 ? " WHERE " : " AND ") + translate_predicate(x.predicates[i], vq.predicate_attributes.at(i));
      return sql;
    }
    std::string operator()(const SemantQuery&) const {
      throw Error(ErrorKind::NotTranslatable, "Semant has no SQL form");
    }
    std::string operator()(const ProfileQuery&) const {
      throw Error(ErrorKind::NotTranslatable, "profile has no SQL form");
    }
    std::string operator()(const SetOpQuery& x) const {
      const std::string keyword = x.kind == SetOpKind::Union ? " UNION " : x.kind == SetOpKind::Inters ? " INTERSECT " : " EXCEPT ";
      for (const auto& b : vq.bindings) detail::require_structured(b);
      for (const auto& b : vq.bindings)
        if (b.source_id != vq.bindings.front().source_id)
          throw Error(ErrorKind::CrossSourceSetOp,
                      "operands come from sources " + vq.bindings.front().source_id + " and " + b.source_id);
      std::string sql;
      for (std::size_t i = 0; i < x.items.size(); ++i) {
        const Binding& b = vq.bindings[i];
        if (i) sql += keyword;
        sql += "SELECT " + b.attribute.value_or("*") + " FROM " + b.entity;
      }
      return sql;
    }
  };
  return SqlText{std::visit(V{vq}, vq.query), "generic"};
}

}  // namespace dsq
