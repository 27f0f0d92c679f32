#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dsq/agent.hpp"
#include "dsq/catalog.hpp"
#include "dsq/metalang.hpp"

namespace dsq::testing {

using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

/// letter {letter | digit | _}, never a reserved word.
inline std::string random_identifier(Rng& rng) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  static const std::string tail = letters + "0123456789_";
  for (;;) {
    std::string s(1, letters[pick(rng, letters.size())]);
    const std::size_t len = pick(rng, 8);
    for (std::size_t i = 0; i < len; ++i) s += tail[pick(rng, tail.size())];
    if (is_identifier(s)) return s;
  }
}

inline std::string random_digits(Rng& rng) {
  std::string s;
  const std::size_t len = 1 + pick(rng, 4);
  for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('0' + pick(rng, 10));
  return s;
}

/// Random expression tree that the printer/parser pair preserves: children
/// that bind looser than their parent are wrapped in parentheses.
inline Expr random_expr(Rng& rng, int depth) {
  if (depth <= 0 || coin(rng, 0.4)) {
    if (coin(rng, 0.8)) return Expr::number(random_digits(rng));
    return Expr::param(random_identifier(rng));
  }
  if (coin(rng, 0.2)) return Expr::paren(random_expr(rng, depth - 1));
  const ArithOp op = static_cast<ArithOp>(pick(rng, 4));
  auto prec_of = [](const Expr& e) {
    if (auto b = std::get_if<Expr::Binary>(&e.node)) return precedence(b->op);
    return 3;
  };
  Expr lhs = random_expr(rng, depth - 1);
  Expr rhs = random_expr(rng, depth - 1);
  if (prec_of(lhs) < precedence(op)) lhs = Expr::paren(std::move(lhs));
  if (prec_of(rhs) <= precedence(op)) rhs = Expr::paren(std::move(rhs));
  return Expr::binary(op, std::move(lhs), std::move(rhs));
}

inline ObjectItem random_item(Rng& rng, bool allow_agg) {
  ObjectItem item;
  item.object = random_identifier(rng);
  if (coin(rng, 0.7)) item.par = random_identifier(rng);
  if (allow_agg && coin(rng, 0.3)) item.agg = static_cast<AggKind>(pick(rng, 3));
  return item;
}

inline std::vector<ObjectItem> random_items(Rng& rng, std::size_t min, std::size_t max, bool allow_agg) {
  std::vector<ObjectItem> out;
  const std::size_t n = min + pick(rng, max - min + 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_item(rng, allow_agg));
  return out;
}

inline QueryAst random_ast(Rng& rng) {
  switch (pick(rng, 6)) {
    case 0: return SelectQuery{random_items(rng, 1, 4, true)};
    case 1: {
      QuestionQuery q;
      q.kind = static_cast<QuestionKind>(pick(rng, 5));
      const bool pair_only = q.kind == QuestionKind::What || q.kind == QuestionKind::Which;
      q.items = random_items(rng, 1, pair_only ? 2 : 4, false);
      return q;
    }
    case 2: {
      ConsQuery q;
      q.object = random_identifier(rng);
      const std::size_t n = pick(rng, 4);
      for (std::size_t i = 0; i < n; ++i)
        q.predicates.push_back({random_identifier(rng), static_cast<Comparator>(pick(rng, 6)), random_expr(rng, 3)});
      return q;
    }
    case 3: return SemantQuery{random_identifier(rng), random_identifier(rng)};
    case 4: {
      ProfileQuery q;
      const std::size_t n = 1 + pick(rng, 3);
      for (std::size_t i = 0; i < n; ++i)
        q.entries.push_back({random_identifier(rng), static_cast<std::int64_t>(pick(rng, 1000))});
      return q;
    }
    default: {
      SetOpQuery q;
      q.kind = static_cast<SetOpKind>(pick(rng, 3));
      q.items = q.kind == SetOpKind::Differ ? random_items(rng, 2, 2, false) : random_items(rng, 2, 5, false);
      return q;
    }
  }
}

// ---------------------------------------------------------------------------
// Sentence generator driven by the grammar productions, emitting raw token
// strings; whitespace between tokens is randomised on join.

class SentenceGenerator {
 public:
  explicit SentenceGenerator(Rng& rng) : rng_(rng) {}

  std::string sentence() {
    toks_.clear();
    static const char* const ops[] = {"Se", "who", "where", "what", "which", "how", "Cons",
                                      "Semant", "profile", "Union", "Inters", "Differ"};
    const std::string op = ops[pick(rng_, 12)];
    emit(op);
    emit("(");
    if (op == "Se") {
      item_list(1, 4, true);
    } else if (op == "what" || op == "which") {
      item_list(1, 2, false);
    } else if (op == "who" || op == "where" || op == "how") {
      item_list(1, 4, false);
    } else if (op == "Cons") {
      emit(random_identifier(rng_));
      const std::size_t n = pick(rng_, 4);
      for (std::size_t i = 0; i < n; ++i) {
        emit(",");
        emit(random_identifier(rng_));
        static const char* const cmps[] = {"=", "<>", "<", "<=", ">", ">="};
        emit(cmps[pick(rng_, 6)]);
        expr(3);
      }
    } else if (op == "Semant") {
      emit(random_identifier(rng_));
      emit(".");
      emit(random_identifier(rng_));
    } else if (op == "profile") {
      const std::size_t n = 1 + pick(rng_, 3);
      for (std::size_t i = 0; i < n; ++i) {
        if (i) emit(",");
        emit(random_identifier(rng_));
        if (coin(rng_, 0.7)) {
          emit(".");
          emit(random_digits(rng_));
        }
      }
    } else if (op == "Differ") {
      item_list(2, 2, false);
    } else {
      item_list(2, 5, false);
    }
    emit(")");
    return join();
  }

 private:
  void emit(std::string t) { toks_.push_back(std::move(t)); }

  void item_list(std::size_t min, std::size_t max, bool allow_agg) {
    const std::size_t n = min + pick(rng_, max - min + 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) emit(",");
      emit(random_identifier(rng_));
      if (coin(rng_, 0.7)) {
        emit(".");
        emit(random_identifier(rng_));
      }
      if (allow_agg && coin(rng_, 0.3)) {
        emit("Agg");
        static const char* const kinds[] = {"SUM", "COUNT", "AVG"};
        emit(kinds[pick(rng_, 3)]);
      }
    }
  }

  void operand(int depth) {
    if (depth > 0 && coin(rng_, 0.25)) {
      emit("(");
      expr(depth - 1);
      emit(")");
    } else if (coin(rng_, 0.8)) {
      emit(random_digits(rng_));
    } else {
      emit(random_identifier(rng_));
    }
  }

  void expr(int depth) {
    operand(depth);
    const std::size_t n = depth > 0 ? pick(rng_, 3) : 0;
    static const char* const ops[] = {"+", "-", "*", "/"};
    for (std::size_t i = 0; i < n; ++i) {
      emit(ops[pick(rng_, 4)]);
      operand(depth - 1);
    }
  }

  static bool wordish(char c) { return detail::is_letter(c) || detail::is_digit(c) || c == '_'; }

  std::string join() {
    static const char* const spaces[] = {"", " ", "  ", "\t", "\n"};
    std::string out;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      if (i) {
        std::string ws = spaces[pick(rng_, 5)];
        const char prev = out.back();
        const char next = toks_[i].front();
        const bool glue_cmp = (prev == '<' || prev == '>') && (next == '=' || next == '>');
        if (ws.empty() && ((wordish(prev) && wordish(next)) || glue_cmp)) ws = " ";
        out += ws;
      }
      out += toks_[i];
    }
    return out;
  }

  Rng& rng_;
  std::vector<std::string> toks_;
};

// ---------------------------------------------------------------------------
// Catalogs. Names carry a kind prefix so synonyms never shadow elements.

inline std::string random_text(Rng& rng) {
  static const char* const pieces[] = {"", "a", "Zz", " ", "\"q\"", "\\", "caf\xc3\xa9", "\xe2\x82\xac", "tab\t", "line\n", "9"};
  std::string s;
  const std::size_t n = pick(rng, 4);
  for (std::size_t i = 0; i < n; ++i) s += pieces[pick(rng, std::size(pieces))];
  return s;
}

inline double random_number(Rng& rng) {
  switch (pick(rng, 4)) {
    case 0: return static_cast<double>(static_cast<std::int64_t>(pick(rng, 2001)) - 1000);
    case 1: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 2: return std::ldexp(std::uniform_real_distribution<double>(0.5, 1.0)(rng), static_cast<int>(pick(rng, 200)) - 100);
    default: return 0.25 * static_cast<double>(pick(rng, 40));
  }
}

inline Value random_value_for(Rng& rng, const AttributeType& t) {
  if (t.kind == AttributeType::Kind::Number) return random_number(rng);
  return random_text(rng);
}

inline std::string prefixed(Rng& rng, const char* prefix) { return std::string(prefix) + random_identifier(rng); }

inline Model named_model(std::string name) {
  Model m;
  m.name = std::move(name);
  return m;
}

inline Cardinality random_cardinality(Rng& rng) {
  return coin(rng, 0.25) ? Cardinality::many() : Cardinality::of(pick(rng, 5));
}

inline Entity random_entity(Rng& rng, const std::vector<std::string>& peers) {
  Entity e;
  e.name = prefixed(rng, "e_");
  e.description = random_text(rng);
  e.entity_type = coin(rng) ? "" : random_text(rng);
  e.draw_type = coin(rng) ? "" : "csv";
  const std::size_t n_attr = pick(rng, 5);
  for (std::size_t i = 0; i < n_attr; ++i) {
    Attribute a;
    a.name = prefixed(rng, "a_");
    if (e.find_attribute(a.name)) continue;
    a.description = random_text(rng);
    const std::size_t t = pick(rng, 3);
    a.type = t == 0 ? AttributeType::number()
             : t == 1 || peers.empty() ? AttributeType::text()
                                       : AttributeType::reference(peers[pick(rng, peers.size())]);
    if (coin(rng, 0.4)) a.default_value = random_value_for(rng, a.type);
    e.attributes.push_back(a);
  }
  for (const auto& a : e.attributes) {
    if (!coin(rng, 0.5)) continue;
    Constraint k;
    k.attribute_name = a.name;
    k.sign = static_cast<Comparator>(pick(rng, 6));
    k.value = random_value_for(rng, a.type);
    k.error_message = random_text(rng);
    e.constraints.push_back(k);
  }
  for (std::size_t i = pick(rng, 3); i > 0; --i) e.operations.push_back(random_text(rng));
  for (std::size_t i = pick(rng, 3); i > 0; --i) e.values.push_back(random_text(rng));
  return e;
}

inline Relation random_relation(Rng& rng, const Model& m) {
  Relation r;
  r.name = prefixed(rng, "r_");
  r.description = random_text(rng);
  r.type = coin(rng) ? "association" : random_text(rng);
  r.start_entity = m.entities[pick(rng, m.entities.size())].name;
  r.end_entity = m.entities[pick(rng, m.entities.size())].name;
  r.start_min = random_cardinality(rng);
  r.start_max = random_cardinality(rng);
  if (!(r.start_min <= r.start_max)) std::swap(r.start_min, r.start_max);
  r.end_min = random_cardinality(rng);
  r.end_max = random_cardinality(rng);
  if (!(r.end_min <= r.end_max)) std::swap(r.end_min, r.end_max);
  if (const Entity* e = m.find_entity(r.start_entity); e && !e->attributes.empty() && coin(rng)) {
    const Attribute& a = e->attributes[pick(rng, e->attributes.size())];
    r.constraints.push_back({a.name, static_cast<Comparator>(pick(rng, 6)), random_value_for(rng, a.type), random_text(rng)});
  }
  return r;
}

/// A catalog that satisfies every audit rule.
inline Catalog random_catalog(Rng& rng) {
  Catalog c;
  const std::size_t n_src = pick(rng, 3);
  static const char* const exts[] = {".csv", ".xml", ".json", ".txt"};
  for (std::size_t i = 0; i < n_src; ++i) {
    SourceDescriptor s = describe_file(prefixed(rng, "src_") + exts[pick(rng, 4)]);
    if (coin(rng, 0.3)) s.options["delimiter"] = ";";
    if (!c.find_source(s.id)) c.sources.push_back(s);
  }
  const std::size_t n_models = pick(rng, 4);
  for (std::size_t i = 0; i < n_models; ++i) {
    Model m;
    m.name = prefixed(rng, "m_");
    if (c.find_model(m.name)) continue;
    m.description = random_text(rng);
    m.meta_model_name = coin(rng) ? "csv" : "";
    m.file_name = coin(rng) ? random_text(rng) : "";
    if (!c.sources.empty() && coin(rng)) m.connection = c.sources[pick(rng, c.sources.size())].id;
    std::vector<std::string> names;
    for (std::size_t k = pick(rng, 4); k > 0; --k) {
      Entity e = random_entity(rng, names);
      if (m.find_entity(e.name)) continue;
      names.push_back(e.name);
      m.entities.push_back(std::move(e));
    }
    if (!m.entities.empty())
      for (std::size_t k = pick(rng, 3); k > 0; --k) {
        Relation r = random_relation(rng, m);
        if (!m.find_relation(r.name)) m.relations.push_back(std::move(r));
      }
    c.models.push_back(std::move(m));
  }
  for (auto& m : c.models)
    for (const auto& other : c.models)
      if (other.name != m.name && coin(rng, 0.3)) m.linked_models.push_back(other.name);
  for (const auto& m : c.models)
    for (const auto& e : m.entities) {
      if (coin(rng, 0.3)) c.synonyms.add(prefixed(rng, "s_"), ElementPath::of_entity(m.name, e.name).to_string());
      for (const auto& a : e.attributes)
        if (coin(rng, 0.2))
          c.synonyms.add(prefixed(rng, "s_"), ElementPath::of_attribute(m.name, e.name, a.name).to_string());
    }
  for (std::size_t i = pick(rng, 3); i > 0; --i)
    c.profiles.put(random_text(rng), random_text(rng), static_cast<std::int64_t>(pick(rng, 100)));
  c.normalize();
  return c;
}

// ---------------------------------------------------------------------------
// State machines. Guards are "is<r>of<m>" and hold when ctx.value % m == r,
// so guards sharing (state, trigger, m) with distinct r are disjoint.

struct MachineContext {
  int value = 0;
  std::vector<std::string> log;
};

inline Behaviors<MachineContext> machine_behaviors(const StateMachineDef& def) {
  Behaviors<MachineContext> b;
  auto bind_action = [&](const std::optional<std::string>& id) {
    if (!id) return;
    const std::string name = *id;
    b.actions[name] = [name](MachineContext& c) {
      c.log.push_back(name);
      c.value += static_cast<int>(name.size());
    };
  };
  for (const auto& s : def.states) {
    bind_action(s.entry_action);
    bind_action(s.exit_action);
    bind_action(s.initial_activity);
    bind_action(s.final_activity);
  }
  for (const auto& t : def.transitions) {
    bind_action(t.action);
    if (!t.guard) continue;
    int r = 0;
    int m = 1;
    std::sscanf(t.guard->c_str(), "is%dof%d", &r, &m);
    b.guards[*t.guard] = [r, m](const MachineContext& c) { return c.value % m == r; };
  }
  return b;
}

/// A machine that passes validate_machine.
inline StateMachineDef random_machine(Rng& rng) {
  StateMachineDef def;
  def.name = "m";
  const std::size_t n = 2 + pick(rng, 5);
  auto name = [](std::size_t i) { return "S" + std::to_string(i); };
  for (std::size_t i = 0; i < n; ++i) {
    StateDef s;
    s.name = name(i);
    if (i == 0) {
      s.kind = StateKind::Initial;
      if (coin(rng)) s.initial_activity = "init";
    } else if (i == n - 1 || coin(rng, 0.15)) {
      s.kind = StateKind::Final;
      if (coin(rng)) s.final_activity = "fin:" + s.name;
    } else {
      if (coin(rng, 0.6)) s.entry_action = "entry:" + s.name;
      if (coin(rng, 0.6)) s.exit_action = "exit:" + s.name;
    }
    def.states.push_back(std::move(s));
  }
  static const char* const triggers[] = {"a", "b", "c"};
  // (from, trigger) -> modulus of its guarded group, or 0 when unguarded.
  std::map<std::pair<std::string, std::string>, int> groups;
  std::map<std::pair<std::string, std::string>, std::set<int>> used;
  auto add = [&](std::size_t from, std::size_t to, std::string trig) {
    const auto key = std::make_pair(name(from), trig);
    TransitionDef t{name(from), name(to), trig, std::nullopt, std::nullopt};
    if (coin(rng, 0.6)) t.action = "act:" + name(from) + ">" + name(to);
    auto g = groups.find(key);
    if (g == groups.end()) {
      const int m = coin(rng, 0.5) ? 0 : 2 + static_cast<int>(pick(rng, 2));
      groups[key] = m;
      if (m) {
        const int r = static_cast<int>(pick(rng, static_cast<std::size_t>(m)));
        used[key].insert(r);
        t.guard = "is" + std::to_string(r) + "of" + std::to_string(m);
      }
    } else {
      const int m = g->second;
      if (m == 0) return false;
      int r = -1;
      for (int k = 0; k < m; ++k)
        if (!used[key].count(k)) r = k;
      if (r < 0) return false;
      used[key].insert(r);
      t.guard = "is" + std::to_string(r) + "of" + std::to_string(m);
    }
    def.transitions.push_back(std::move(t));
    return true;
  };
  // Spanning edges on a per-target trigger keep every state reachable.
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t from = pick(rng, i);
    while (def.states[from].kind == StateKind::Final) from = pick(rng, i);
    add(from, i, "to" + std::to_string(i));
  }
  for (std::size_t k = pick(rng, 2 * n); k > 0; --k) {
    const std::size_t from = pick(rng, n);
    if (def.states[from].kind == StateKind::Final) continue;
    add(from, 1 + pick(rng, n - 1), triggers[pick(rng, 3)]);
  }
  return def;
}

inline std::vector<std::string> random_events(Rng& rng) {
  static const char* const triggers[] = {"a", "b", "c", "to1", "to2", "to3", "to4", "to5"};
  std::vector<std::string> out;
  for (std::size_t k = pick(rng, 8); k > 0; --k) out.push_back(triggers[pick(rng, 8)]);
  return out;
}

}  // namespace dsq::testing
