#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsq/adapters.hpp"
#include "dsq/catalog.hpp"
#include "dsq/error.hpp"
#include "dsq/metalang.hpp"
#include "dsq/profile.hpp"
#include "dsq/validate.hpp"
#include "dsq/value.hpp"

namespace dsq {

// ---------------------------------------------------------------------------
// Row algebra

inline bool rows_equal(const Row& a, const Row& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (natural_compare(a[i], b[i]) != 0) return false;
  return true;
}

inline bool row_less(const Row& a, const Row& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ord = natural_compare(a[i], b[i]);
    if (ord != 0) return ord < 0;
  }
  return a.size() < b.size();
}

/// Stable sort of rows (with their provenance) in column-wise natural order.
inline void sort_rows(ResultSet& rs) {
  std::vector<std::size_t> idx(rs.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return row_less(rs.rows[x], rs.rows[y]); });
  ResultSet out;
  out.columns = rs.columns;
  for (std::size_t i : idx) out.add_row(std::move(rs.rows[i]), std::move(rs.provenance[i]));
  rs = std::move(out);
}

/// Exact-duplicate rows merged into their first occurrence.
inline ResultSet clean_coagulate(const ResultSet& rs) {
  ResultSet out;
  out.columns = rs.columns;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> order(rs.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return row_less(rs.rows[x], rs.rows[y]); });
  std::vector<bool> keep(rs.rows.size(), false);
  for (std::size_t k = 0; k < order.size(); ++k)
    if (k == 0 || !rows_equal(rs.rows[order[k]], rs.rows[order[k - 1]])) keep[order[k]] = true;
  for (std::size_t i = 0; i < rs.rows.size(); ++i)
    if (keep[i]) out.add_row(rs.rows[i], rs.provenance[i]);
  return out;
}

/// Rows violating at least one entity constraint are dropped.
inline ResultSet clean_cut(const ResultSet& rs, const Entity& entity) {
  ResultSet out;
  out.columns = rs.columns;
  for (std::size_t r = 0; r < rs.rows.size(); ++r)
    if (check_constraints(entity, rs.row_map(r)).empty()) out.add_row(rs.rows[r], rs.provenance[r]);
  return out;
}

/// Set semantics on whole rows; the output is deduplicated and sorted.
inline ResultSet set_op(SetOpKind kind, const ResultSet& a, const ResultSet& b) {
  if (a.columns != b.columns) {
    auto describe = [](const ResultSet& rs) {
      std::string s;
      for (const auto& c : rs.columns) s += (s.empty() ? "" : ", ") + c.name + ":" + std::string(to_string(c.type));
      return "[" + s + "]";
    };
    throw Error(ErrorKind::ColumnMismatch, describe(a) + " vs " + describe(b));
  }
  auto contains = [](const ResultSet& rs, const Row& row) {
    return std::any_of(rs.rows.begin(), rs.rows.end(), [&](const Row& r) { return rows_equal(r, row); });
  };
  ResultSet out;
  out.columns = a.columns;
  switch (kind) {
    case SetOpKind::Union:
      for (std::size_t i = 0; i < a.rows.size(); ++i) out.add_row(a.rows[i], a.provenance[i]);
      for (std::size_t i = 0; i < b.rows.size(); ++i) out.add_row(b.rows[i], b.provenance[i]);
      break;
    case SetOpKind::Inters:
      for (std::size_t i = 0; i < a.rows.size(); ++i)
        if (contains(b, a.rows[i])) out.add_row(a.rows[i], a.provenance[i]);
      break;
    case SetOpKind::Differ:
      for (std::size_t i = 0; i < a.rows.size(); ++i)
        if (!contains(b, a.rows[i])) out.add_row(a.rows[i], a.provenance[i]);
      break;
  }
  out = clean_coagulate(out);
  sort_rows(out);
  return out;
}

/// Nulls are skipped. SUM of nothing is 0, AVG of nothing is null.
inline Value aggregate(const ResultSet& rs, std::string_view column, AggKind kind) {
  const auto col = rs.column_index(column);
  if (!col) throw Error(ErrorKind::UnknownAttribute, "no column '" + std::string(column) + "'");
  if (kind != AggKind::Count && rs.columns[*col].type != ColumnType::Number)
    throw Error(ErrorKind::NonNumericColumn, std::string(to_string(kind)) + " over text column '" + std::string(column) + "'");
  double sum = 0;
  std::size_t count = 0;
  for (const auto& row : rs.rows) {
    const Value& v = row[*col];
    if (is_null(v)) continue;
    ++count;
    if (kind != AggKind::Count) sum += std::get<double>(v);
  }
  switch (kind) {
    case AggKind::Count: return static_cast<double>(count);
    case AggKind::Sum: return sum;
    case AggKind::Avg: return count == 0 ? Value(Null{}) : Value(sum / static_cast<double>(count));
  }
  return Null{};
}

/// Constant-folds a predicate right-hand side.
inline double evaluate(const Expr& e) {
  struct V {
    double operator()(const Expr::Number& n) const { return *parse_number(n.digits); }
    double operator()(const Expr::Param& p) const {
      throw Error(ErrorKind::UnboundParameter, "parameter '" + p.name + "' has no value");
    }
    double operator()(const Expr::Paren& p) const { return evaluate(*p.inner); }
    double operator()(const Expr::Binary& b) const {
      const double l = evaluate(*b.lhs);
      const double r = evaluate(*b.rhs);
      switch (b.op) {
        case ArithOp::Add: return l + r;
        case ArithOp::Sub: return l - r;
        case ArithOp::Mul: return l * r;
        case ArithOp::Div:
          if (r == 0) throw Error(ErrorKind::DivisionByZero, "division by zero in " + print_expr(*b.rhs));
          return l / r;
      }
      return 0;
    }
  };
  return std::visit(V{}, e.node);
}

// ---------------------------------------------------------------------------
// Runtime history

/// Observed durations in milliseconds, keyed by query shape.
class RuntimeHistory {
 public:
  void record(const std::string& key, double ms) {
    if (ms < 0 || std::isnan(ms))
      throw Error(ErrorKind::NegativeDuration, "duration must be >= 0, got " + format_number(ms));
    samples_[key].push_back(ms);
  }

  std::optional<double> estimate(const std::string& key) const {
    auto it = samples_.find(key);
    if (it == samples_.end() || it->second.empty()) return std::nullopt;
    double sum = 0;
    for (double d : it->second) sum += d;
    return sum / static_cast<double>(it->second.size());
  }

  const std::map<std::string, std::vector<double>>& samples() const { return samples_; }

  std::string serialize() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [k, v] : samples_) doc[k] = v;
    return doc.dump(2) + "\n";
  }

  static RuntimeHistory parse(std::string_view text) {
    RuntimeHistory h;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::FormatError, std::string("runtime history: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorKind::FormatError, "runtime history: expected an object");
    for (const auto& [k, v] : doc.items()) {
      if (!v.is_array()) throw Error(ErrorKind::FormatError, "runtime history." + k + ": expected an array");
      for (const auto& d : v) {
        if (!d.is_number()) throw Error(ErrorKind::FormatError, "runtime history." + k + ": expected numbers");
        h.record(k, d.get<double>());
      }
    }
    return h;
  }

  friend bool operator==(const RuntimeHistory&, const RuntimeHistory&) = default;

 private:
  std::map<std::string, std::vector<double>> samples_;
};

inline std::optional<double> estimate_time(const std::string& key, const RuntimeHistory& h) { return h.estimate(key); }

inline RuntimeHistory record_runtime(const std::string& key, double ms, RuntimeHistory h) {
  h.record(key, ms);
  return h;
}

/// (operator keyword, source category of the first binding), e.g. "Se/structured".
inline std::string shape_key(const ValidatedQuery& vq) {
  const std::string cat = vq.bindings.empty() ? "none" : std::string(to_string(vq.bindings.front().category));
  return operator_name(vq.query) + "/" + cat;
}

// ---------------------------------------------------------------------------
// Execution

namespace detail {

class Executor {
 public:
  Executor(const Catalog& catalog, ProfileStore& profiles, std::string user)
      : catalog_(catalog), profiles_(profiles), user_(std::move(user)) {}

  ResultSet run(const ValidatedQuery& vq) {
    struct V {
      Executor& self;
      const ValidatedQuery& vq;
      ResultSet operator()(const SelectQuery& x) const { return self.select(x.items, vq.bindings); }
      ResultSet operator()(const QuestionQuery& x) const { return self.select(x.items, vq.bindings); }
      ResultSet operator()(const ConsQuery& x) const { return self.cons(x, vq); }
      ResultSet operator()(const SemantQuery& x) const { return self.semant(x, vq.bindings.at(0)); }
      ResultSet operator()(const ProfileQuery& x) const {
        for (std::size_t i = 0; i < x.entries.size(); ++i)
          self.profiles_.put(self.user_, vq.bindings.at(i).entity, x.entries[i].weight);
        return ResultSet{};
      }
      ResultSet operator()(const SetOpQuery& x) const {
        ResultSet acc = self.project(x.items.at(0), vq.bindings.at(0));
        for (std::size_t i = 1; i < x.items.size(); ++i)
          acc = set_op(x.kind, acc, self.project(x.items[i], vq.bindings[i]));
        return acc;
      }
    };
    return std::visit(V{*this, vq}, vq.query);
  }

 private:
  const SourceDescriptor& source(const Binding& b) const {
    const SourceDescriptor* src = catalog_.find_source(b.source_id);
    if (!src) throw Error(ErrorKind::NotFound, "no source '" + b.source_id + "'");
    return *src;
  }

  const ResultSet& data(const Binding& b) {
    auto it = cache_.find(b.source_id);
    if (it == cache_.end()) it = cache_.emplace(b.source_id, read_source(source(b))).first;
    return it->second;
  }

  std::size_t column(const ResultSet& rs, const Binding& b, const std::string& attr) const {
    auto idx = rs.column_index(attr);
    if (!idx) throw Error(ErrorKind::UnknownAttribute, b.entity + "." + attr + " is not present in source " + b.source_id);
    return *idx;
  }

  /// Plain projection of one item: a column, the whole entity, or a keyword hit list.
  ResultSet project(const ObjectItem&, const Binding& b) {
    if (b.keyword) return keyword_search(source(b), *b.keyword);
    const ResultSet& rs = data(b);
    if (!b.attribute) return rs;
    const std::size_t c = column(rs, b, *b.attribute);
    ResultSet out;
    out.columns.push_back(rs.columns[c]);
    for (std::size_t r = 0; r < rs.rows.size(); ++r) out.add_row({rs.rows[r][c]}, rs.provenance[r]);
    return out;
  }

  static std::string agg_column_name(AggKind kind, const Binding& b) {
    return std::string(to_string(kind)) + "(" + (b.attribute ? *b.attribute : std::string("*")) + ")";
  }

  /// Items over one entity: either a projection, or (with aggregates) a
  /// grouping keyed by the plain items.
  ResultSet select_group(const std::vector<const ObjectItem*>& items, const std::vector<const Binding*>& binds) {
    const bool any_agg = std::any_of(items.begin(), items.end(), [](const ObjectItem* i) { return i->agg.has_value(); });
    if (!any_agg) {
      ResultSet out = project(*items[0], *binds[0]);
      for (std::size_t i = 1; i < items.size(); ++i) {
        ResultSet next = project(*items[i], *binds[i]);
        out.columns.insert(out.columns.end(), next.columns.begin(), next.columns.end());
        for (std::size_t r = 0; r < out.rows.size(); ++r)
          out.rows[r].insert(out.rows[r].end(), next.rows[r].begin(), next.rows[r].end());
      }
      return out;
    }
    const ResultSet& rs = data(*binds[0]);
    std::vector<std::size_t> key_cols;
    std::vector<std::size_t> key_of_item(items.size(), 0);
    ResultSet out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i]->agg) {
        out.columns.push_back({agg_column_name(*items[i]->agg, *binds[i]), ColumnType::Number});
        continue;
      }
      const std::size_t c = column(rs, *binds[i], *binds[i]->attribute);
      key_of_item[i] = key_cols.size();
      key_cols.push_back(c);
      out.columns.push_back(rs.columns[c]);
    }
    std::vector<Row> keys;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t r = 0; r < rs.rows.size(); ++r) {
      Row key;
      for (std::size_t c : key_cols) key.push_back(rs.rows[r][c]);
      auto it = std::find_if(keys.begin(), keys.end(), [&](const Row& k) { return rows_equal(k, key); });
      if (it == keys.end()) {
        keys.push_back(std::move(key));
        members.push_back({r});
      } else {
        members[static_cast<std::size_t>(it - keys.begin())].push_back(r);
      }
    }
    if (key_cols.empty() && keys.empty()) {
      keys.emplace_back();
      members.emplace_back();
    }
    for (std::size_t g = 0; g < keys.size(); ++g) {
      ResultSet slice;
      slice.columns = rs.columns;
      for (std::size_t r : members[g]) slice.add_row(rs.rows[r], rs.provenance[r]);
      Row row;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i]->agg) {
          row.push_back(keys[g][key_of_item[i]]);
        } else if (binds[i]->attribute) {
          column(rs, *binds[i], *binds[i]->attribute);
          row.push_back(aggregate(slice, *binds[i]->attribute, *items[i]->agg));
        } else {
          row.push_back(static_cast<double>(slice.rows.size()));
        }
      }
      out.add_row(std::move(row), binds[0]->source_id);
    }
    return out;
  }

  ResultSet select(const std::vector<ObjectItem>& items, const std::vector<Binding>& binds) {
    // Group items by entity in order of first appearance; keyword searches
    // stand alone.
    std::vector<std::pair<std::vector<const ObjectItem*>, std::vector<const Binding*>>> groups;
    std::vector<std::string> group_keys;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string key = binds[i].keyword ? "#" + std::to_string(i) : binds[i].model + "/" + binds[i].entity;
      auto it = std::find(group_keys.begin(), group_keys.end(), key);
      if (it == group_keys.end()) {
        group_keys.push_back(key);
        groups.push_back({{&items[i]}, {&binds[i]}});
      } else {
        auto& g = groups[static_cast<std::size_t>(it - group_keys.begin())];
        g.first.push_back(&items[i]);
        g.second.push_back(&binds[i]);
      }
    }
    std::vector<ResultSet> parts;
    for (const auto& [gi, gb] : groups) parts.push_back(select_group(gi, gb));
    return parts.size() == 1 ? std::move(parts.front()) : consolidate(parts);
  }

  /// Outer union of per-source results: columns matched by name, missing
  /// cells filled with null.
  static ResultSet consolidate(const std::vector<ResultSet>& parts) {
    ResultSet out;
    for (const auto& p : parts)
      for (const auto& c : p.columns) {
        auto idx = out.column_index(c.name);
        if (!idx) out.columns.push_back(c);
        else if (out.columns[*idx].type != c.type)
          throw Error(ErrorKind::ColumnMismatch, "column '" + c.name + "' is both number and text");
      }
    for (const auto& p : parts) {
      std::vector<std::size_t> map;
      for (const auto& c : p.columns) map.push_back(*out.column_index(c.name));
      for (std::size_t r = 0; r < p.rows.size(); ++r) {
        Row row(out.columns.size(), Null{});
        for (std::size_t c = 0; c < map.size(); ++c) row[map[c]] = p.rows[r][c];
        out.add_row(std::move(row), p.provenance[r]);
      }
    }
    return out;
  }

  ResultSet cons(const ConsQuery& x, const ValidatedQuery& vq) {
    const Binding& b = vq.bindings.at(0);
    const ResultSet& rs = data(b);
    struct Test {
      std::size_t column;
      Comparator cmp;
      double rhs;
    };
    std::vector<Test> tests;
    for (std::size_t i = 0; i < x.predicates.size(); ++i)
      tests.push_back({column(rs, b, vq.predicate_attributes.at(i)), x.predicates[i].comparator, evaluate(x.predicates[i].rhs)});
    ResultSet out;
    out.columns = rs.columns;
    for (std::size_t r = 0; r < rs.rows.size(); ++r) {
      const bool keep = std::all_of(tests.begin(), tests.end(), [&](const Test& t) {
        return satisfies(rs.rows[r][t.column], t.cmp, Value(t.rhs));
      });
      if (keep) out.add_row(rs.rows[r], rs.provenance[r]);
    }
    return out;
  }

  ResultSet semant(const SemantQuery& x, const Binding& b) {
    const SemanticNet net = build_semantic_net(source(b));
    ResultSet out;
    out.columns = {{"term", ColumnType::Text}, {"weight", ColumnType::Number}};
    for (const auto& [term, w] : net.neighbors(detail::lower_ascii(x.term)))
      out.add_row({Value(term), Value(static_cast<double>(w))}, b.source_id);
    return out;
  }

  const Catalog& catalog_;
  ProfileStore& profiles_;
  std::string user_;
  std::map<std::string, ResultSet> cache_;
};

}  // namespace detail

/// Evaluates a validated query against the catalog's sources. Only Profile
/// queries write, and only to `profiles`.
inline ResultSet execute(const ValidatedQuery& vq, const Catalog& catalog, ProfileStore& profiles,
                         const std::string& user = "default") {
  return detail::Executor(catalog, profiles, user).run(vq);
}

inline void profile_put(ProfileStore& store, const std::string& user, const std::string& object, std::int64_t weight) {
  store.put(user, object, weight);
}

inline std::int64_t profile_get(const ProfileStore& store, const std::string& user, const std::string& object) {
  return store.get(user, object);
}

// ---------------------------------------------------------------------------
// Rendering

/// Header line then one line per row, cells separated by '|'.
inline std::string render_table(const ResultSet& rs) {
  if (rs.columns.empty()) return {};
  std::string out;
  for (std::size_t i = 0; i < rs.columns.size(); ++i) out += (i ? "|" : "") + rs.columns[i].name;
  out += '\n';
  for (const auto& row : rs.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "|" : "") + render(row[i]);
    out += '\n';
  }
  return out;
}

inline std::string render_csv(const ResultSet& rs) {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  if (rs.columns.empty()) return {};
  std::string out;
  for (std::size_t i = 0; i < rs.columns.size(); ++i) out += (i ? "," : "") + cell(rs.columns[i].name);
  out += '\n';
  for (const auto& row : rs.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell(render(row[i]));
    out += '\n';
  }
  return out;
}

}  // namespace dsq
