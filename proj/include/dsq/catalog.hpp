#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsq/error.hpp"
#include "dsq/metalang.hpp"
#include "dsq/profile.hpp"
#include "dsq/source.hpp"
#include "dsq/value.hpp"

namespace dsq {

// ---------------------------------------------------------------------------
// Class model

/// Relation end cardinality: a non-negative bound or unbounded ("N").
struct Cardinality {
  std::uint64_t value = 0;
  bool unbounded = false;

  static Cardinality of(std::uint64_t v) { return {v, false}; }
  static Cardinality many() { return {0, true}; }

  friend bool operator==(const Cardinality&, const Cardinality&) = default;
  friend bool operator<=(const Cardinality& a, const Cardinality& b) {
    if (b.unbounded) return true;
    if (a.unbounded) return false;
    return a.value <= b.value;
  }
};

struct AttributeType {
  enum class Kind { Number, Text, Reference };
  Kind kind = Kind::Text;
  std::string target;  // referenced entity, Reference only

  static AttributeType number() { return {Kind::Number, {}}; }
  static AttributeType text() { return {Kind::Text, {}}; }
  static AttributeType reference(std::string entity) { return {Kind::Reference, std::move(entity)}; }

  std::string to_string() const {
    switch (kind) {
      case Kind::Number: return "number";
      case Kind::Text: return "text";
      case Kind::Reference: return "reference:" + target;
    }
    return "text";
  }

  static std::optional<AttributeType> parse(std::string_view s) {
    if (s == "number") return number();
    if (s == "text") return text();
    constexpr std::string_view prefix = "reference:";
    if (s.substr(0, prefix.size()) == prefix && s.size() > prefix.size())
      return reference(std::string(s.substr(prefix.size())));
    return std::nullopt;
  }

  /// Whether a literal belongs to this domain. References hold text keys.
  bool admits(const Value& v) const {
    if (kind == Kind::Number) return is_number(v);
    return is_text(v);
  }

  friend bool operator==(const AttributeType&, const AttributeType&) = default;
};

struct Attribute {
  std::string name;
  std::string description;
  AttributeType type;
  std::optional<Value> default_value;
  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct Constraint {
  std::string attribute_name;
  Comparator sign = Comparator::Eq;
  Value value;
  std::string error_message;
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct Entity {
  std::string name;
  std::string description;
  std::string entity_type;
  std::string draw_type;
  std::vector<Attribute> attributes;
  std::vector<Constraint> constraints;
  std::vector<std::string> operations;
  std::vector<std::string> values;

  const Attribute* find_attribute(std::string_view n) const {
    for (const auto& a : attributes)
      if (a.name == n) return &a;
    return nullptr;
  }

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Relation {
  std::string name;
  std::string description;
  std::string type;
  std::string start_entity;
  std::string end_entity;
  Cardinality start_min = Cardinality::of(0);
  Cardinality start_max = Cardinality::many();
  Cardinality end_min = Cardinality::of(0);
  Cardinality end_max = Cardinality::many();
  std::vector<Constraint> constraints;
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct Model {
  std::string name;
  std::string description;
  std::string meta_model_name;
  std::string file_name;
  std::string connection;
  std::vector<std::string> linked_models;
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  std::size_t entity_count() const { return entities.size(); }

  const Entity* find_entity(std::string_view n) const {
    for (const auto& e : entities)
      if (e.name == n) return &e;
    return nullptr;
  }
  const Relation* find_relation(std::string_view n) const {
    for (const auto& r : relations)
      if (r.name == n) return &r;
    return nullptr;
  }

  friend bool operator==(const Model&, const Model&) = default;
};

inline std::size_t entity_count(const Model& m) { return m.entity_count(); }

using Element = std::variant<Model, Entity, Relation, Attribute, Constraint>;

/// Address of a catalogue element. String form: `model`, `model/entity`,
/// `model/entity/attribute`, `model/@relation`; constraints add `#sign` to
/// the attribute form.
struct ElementPath {
  enum class Kind { Model, Entity, Relation, Attribute, Constraint };
  Kind kind = Kind::Model;
  std::string model;
  std::string owner;       // entity or relation
  std::string name;        // attribute, or constrained attribute
  bool on_relation = false;
  Comparator sign = Comparator::Eq;

  static ElementPath of_model(std::string m) { return {Kind::Model, std::move(m), {}, {}, false, {}}; }
  static ElementPath of_entity(std::string m, std::string e) {
    return {Kind::Entity, std::move(m), std::move(e), {}, false, {}};
  }
  static ElementPath of_relation(std::string m, std::string r) {
    return {Kind::Relation, std::move(m), std::move(r), {}, true, {}};
  }
  static ElementPath of_attribute(std::string m, std::string e, std::string a) {
    return {Kind::Attribute, std::move(m), std::move(e), std::move(a), false, {}};
  }
  static ElementPath of_constraint(std::string m, std::string owner, std::string attr, Comparator sign,
                                   bool on_relation = false) {
    return {Kind::Constraint, std::move(m), std::move(owner), std::move(attr), on_relation, sign};
  }

  std::string to_string() const {
    const std::string owner_part = (on_relation ? "@" : "") + owner;
    switch (kind) {
      case Kind::Model: return model;
      case Kind::Entity:
      case Kind::Relation: return model + "/" + owner_part;
      case Kind::Attribute: return model + "/" + owner_part + "/" + name;
      case Kind::Constraint:
        return model + "/" + owner_part + "/" + name + "#" + std::string(dsq::to_string(sign));
    }
    return model;
  }

  static ElementPath parse(std::string_view text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
      if (c == '/') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    for (const auto& p : parts)
      if (p.empty() || p == "@") throw Error(ErrorKind::NotFound, "malformed path '" + std::string(text) + "'");
    if (parts.size() > 3) throw Error(ErrorKind::NotFound, "malformed path '" + std::string(text) + "'");
    if (parts.size() == 1) return of_model(parts[0]);
    const bool rel = parts[1].front() == '@';
    const std::string owner = rel ? parts[1].substr(1) : parts[1];
    if (parts.size() == 2) return rel ? of_relation(parts[0], owner) : of_entity(parts[0], owner);
    const auto hash = parts[2].find('#');
    if (hash != std::string::npos) {
      auto sign = parse_comparator(std::string_view(parts[2]).substr(hash + 1));
      if (!sign || hash == 0) throw Error(ErrorKind::NotFound, "malformed path '" + std::string(text) + "'");
      return of_constraint(parts[0], owner, parts[2].substr(0, hash), *sign, rel);
    }
    if (rel) throw Error(ErrorKind::NotFound, "relations have no attributes: '" + std::string(text) + "'");
    return of_attribute(parts[0], owner, parts[2]);
  }

  friend bool operator==(const ElementPath&, const ElementPath&) = default;
};

/// synonym -> element paths (`model/entity` or `model/entity/attribute`).
/// More than one target makes the synonym ambiguous.
struct SynonymTable {
  std::map<std::string, std::vector<std::string>> targets;

  void add(const std::string& synonym, const std::string& path) {
    auto& list = targets[synonym];
    if (std::find(list.begin(), list.end(), path) == list.end()) list.push_back(path);
    std::sort(list.begin(), list.end());
  }

  friend bool operator==(const SynonymTable&, const SynonymTable&) = default;
};

struct Violation {
  std::string attribute_name;
  std::string error_message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

enum class Direction { All, In, Out };

class Catalog;
std::vector<std::string> audit(const Catalog& c);

// ---------------------------------------------------------------------------
// Catalog

class Catalog {
 public:
  std::vector<Model> models;
  SynonymTable synonyms;
  std::vector<SourceDescriptor> sources;
  ProfileStore profiles;

  friend bool operator==(const Catalog&, const Catalog&) = default;

  const Model* find_model(std::string_view n) const {
    for (const auto& m : models)
      if (m.name == n) return &m;
    return nullptr;
  }

  const SourceDescriptor* find_source(std::string_view id) const {
    for (const auto& s : sources)
      if (s.id == id) return &s;
    return nullptr;
  }

  /// Sorts every named collection so equality and serialisation are
  /// insensitive to insertion order.
  void normalize() {
    auto by_name = [](const auto& a, const auto& b) { return a.name < b.name; };
    auto constraint_key = [](const Constraint& c) {
      return std::make_tuple(c.attribute_name, static_cast<int>(c.sign));
    };
    auto by_constraint = [&](const Constraint& a, const Constraint& b) {
      return constraint_key(a) < constraint_key(b);
    };
    std::sort(models.begin(), models.end(), by_name);
    for (auto& m : models) {
      std::sort(m.linked_models.begin(), m.linked_models.end());
      std::sort(m.entities.begin(), m.entities.end(), by_name);
      std::sort(m.relations.begin(), m.relations.end(), by_name);
      for (auto& e : m.entities) {
        std::sort(e.attributes.begin(), e.attributes.end(), by_name);
        std::sort(e.constraints.begin(), e.constraints.end(), by_constraint);
      }
      for (auto& r : m.relations) std::sort(r.constraints.begin(), r.constraints.end(), by_constraint);
    }
    std::sort(sources.begin(), sources.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& [_, list] : synonyms.targets) std::sort(list.begin(), list.end());
  }

  /// Inserts or replaces (by name) `element` under `parent`. Models take no
  /// parent. Strong guarantee: on error the catalog is unchanged.
  void upsert(const Element& element, const std::optional<ElementPath>& parent = std::nullopt) {
    Catalog next = *this;
    next.apply_upsert(element, parent);
    next.normalize();
    next.check();
    *this = std::move(next);
  }

  /// Removes the element at `path`, cascading to everything that refers to it.
  void remove(const ElementPath& path) {
    Catalog next = *this;
    next.apply_remove(path);
    next.normalize();
    next.check();
    *this = std::move(next);
  }

  void add_synonym(const std::string& synonym, const ElementPath& target) {
    if (target.kind != ElementPath::Kind::Entity && target.kind != ElementPath::Kind::Attribute)
      throw Error(ErrorKind::InvariantViolation, "synonyms may only name entities or attributes");
    Catalog next = *this;
    next.synonyms.add(synonym, target.to_string());
    next.check();
    *this = std::move(next);
  }

  void remove_synonym(const std::string& synonym) {
    if (synonyms.targets.erase(synonym) == 0)
      throw Error(ErrorKind::NotFound, "no synonym '" + synonym + "'");
  }

  void upsert_source(const SourceDescriptor& src) {
    if (!src.consistent())
      throw Error(ErrorKind::InvariantViolation,
                  "source " + src.id + ": format " + std::string(to_string(src.format)) +
                      " does not belong to category " + std::string(to_string(src.category)));
    auto it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.id == src.id; });
    if (it != sources.end()) *it = src;
    else sources.push_back(src);
    normalize();
  }

  /// Throws InvariantViolation describing the first audit finding.
  void check() const {
    const auto problems = audit(*this);
    if (!problems.empty()) throw Error(ErrorKind::InvariantViolation, problems.front());
  }

  Model& model_mut(const std::string& name) {
    for (auto& m : models)
      if (m.name == name) return m;
    throw Error(ErrorKind::NotFound, "no model '" + name + "'");
  }

  Entity& entity_mut(const std::string& model, const std::string& name) {
    for (auto& e : model_mut(model).entities)
      if (e.name == name) return e;
    throw Error(ErrorKind::NotFound, "no entity '" + model + "/" + name + "'");
  }

  Relation& relation_mut(const std::string& model, const std::string& name) {
    for (auto& r : model_mut(model).relations)
      if (r.name == name) return r;
    throw Error(ErrorKind::NotFound, "no relation '" + model + "/@" + name + "'");
  }

 private:
  template <typename T, typename Key>
  static void put_by(std::vector<T>& list, const T& item, Key key) {
    auto it = std::find_if(list.begin(), list.end(), [&](const T& x) { return key(x) == key(item); });
    if (it != list.end()) *it = item;
    else list.push_back(item);
  }

  void apply_upsert(const Element& element, const std::optional<ElementPath>& parent) {
    using K = ElementPath::Kind;
    auto by_name = [](const auto& x) { return x.name; };
    auto by_constraint = [](const Constraint& c) { return std::make_pair(c.attribute_name, c.sign); };
    auto need_parent = [&](std::initializer_list<K> kinds) -> const ElementPath& {
      if (!parent) throw Error(ErrorKind::UnknownParent, "element requires a parent path");
      if (std::find(kinds.begin(), kinds.end(), parent->kind) == kinds.end())
        throw Error(ErrorKind::UnknownParent, "invalid parent '" + parent->to_string() + "'");
      return *parent;
    };
    auto wrap_missing = [&](auto&& fn) -> decltype(auto) {
      try {
        return fn();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotFound) throw Error(ErrorKind::UnknownParent, e.detail());
        throw;
      }
    };

    if (auto m = std::get_if<Model>(&element)) {
      if (parent) throw Error(ErrorKind::UnknownParent, "models live at the catalog root");
      put_by(models, *m, by_name);
    } else if (auto e = std::get_if<Entity>(&element)) {
      const auto& p = need_parent({K::Model});
      wrap_missing([&]() -> auto& { return model_mut(p.model); });
      put_by(model_mut(p.model).entities, *e, by_name);
    } else if (auto r = std::get_if<Relation>(&element)) {
      const auto& p = need_parent({K::Model});
      wrap_missing([&]() -> auto& { return model_mut(p.model); });
      put_by(model_mut(p.model).relations, *r, by_name);
    } else if (auto a = std::get_if<Attribute>(&element)) {
      const auto& p = need_parent({K::Entity});
      auto& ent = wrap_missing([&]() -> auto& { return entity_mut(p.model, p.owner); });
      put_by(ent.attributes, *a, by_name);
    } else if (auto c = std::get_if<Constraint>(&element)) {
      const auto& p = need_parent({K::Entity, K::Relation});
      if (p.kind == K::Entity) {
        auto& ent = wrap_missing([&]() -> auto& { return entity_mut(p.model, p.owner); });
        put_by(ent.constraints, *c, by_constraint);
      } else {
        auto& rel = wrap_missing([&]() -> auto& { return relation_mut(p.model, p.owner); });
        put_by(rel.constraints, *c, by_constraint);
      }
    }
  }

  void drop_synonyms_under(const std::string& prefix) {
    for (auto it = synonyms.targets.begin(); it != synonyms.targets.end();) {
      auto& list = it->second;
      list.erase(std::remove_if(list.begin(), list.end(),
                                [&](const std::string& p) {
                                  return p == prefix || p.rfind(prefix + "/", 0) == 0;
                                }),
                 list.end());
      if (list.empty()) it = synonyms.targets.erase(it);
      else ++it;
    }
  }

  void apply_remove(const ElementPath& path) {
    using K = ElementPath::Kind;
    auto erase_one = [&](auto& list, auto pred) {
      auto it = std::find_if(list.begin(), list.end(), pred);
      if (it == list.end()) throw Error(ErrorKind::NotFound, "no element '" + path.to_string() + "'");
      list.erase(it);
    };
    switch (path.kind) {
      case K::Model: {
        erase_one(models, [&](const Model& m) { return m.name == path.model; });
        for (auto& m : models)
          std::erase(m.linked_models, path.model);
        drop_synonyms_under(path.model);
        break;
      }
      case K::Entity: {
        auto& model = model_mut(path.model);
        erase_one(model.entities, [&](const Entity& e) { return e.name == path.owner; });
        std::erase_if(model.relations, [&](const Relation& r) {
          return r.start_entity == path.owner || r.end_entity == path.owner;
        });
        drop_synonyms_under(path.model + "/" + path.owner);
        break;
      }
      case K::Relation: {
        erase_one(model_mut(path.model).relations, [&](const Relation& r) { return r.name == path.owner; });
        break;
      }
      case K::Attribute: {
        auto& model = model_mut(path.model);
        auto& ent = entity_mut(path.model, path.owner);
        erase_one(ent.attributes, [&](const Attribute& a) { return a.name == path.name; });
        std::erase_if(ent.constraints, [&](const Constraint& c) { return c.attribute_name == path.name; });
        for (auto& r : model.relations) {
          if (r.start_entity != path.owner && r.end_entity != path.owner) continue;
          std::erase_if(r.constraints, [&](const Constraint& c) {
            return c.attribute_name == path.name && !relation_attribute(model, r, c.attribute_name);
          });
        }
        drop_synonyms_under(path.model + "/" + path.owner + "/" + path.name);
        break;
      }
      case K::Constraint: {
        auto pred = [&](const Constraint& c) { return c.attribute_name == path.name && c.sign == path.sign; };
        if (path.on_relation) erase_one(relation_mut(path.model, path.owner).constraints, pred);
        else erase_one(entity_mut(path.model, path.owner).constraints, pred);
        break;
      }
    }
  }

 public:
  /// The attribute a relation constraint refers to, looked up on the start
  /// entity first, then the end entity.
  static const Attribute* relation_attribute(const Model& m, const Relation& r, std::string_view attr) {
    for (const auto& endpoint : {r.start_entity, r.end_entity})
      if (const Entity* e = m.find_entity(endpoint))
        if (const Attribute* a = e->find_attribute(attr)) return a;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Integrity audit

/// Every invariant of the class model, as a list of human-readable findings.
inline std::vector<std::string> audit(const Catalog& c) {
  std::vector<std::string> out;
  auto dup_check = [&](const auto& list, auto key, const std::string& what) {
    std::set<std::string> seen;
    for (const auto& x : list)
      if (!seen.insert(key(x)).second) out.push_back("duplicate " + what + " '" + key(x) + "'");
  };
  auto name_of = [](const auto& x) { return x.name; };

  dup_check(c.models, name_of, "model");
  dup_check(c.sources, [](const SourceDescriptor& s) { return s.id; }, "source");
  for (const auto& s : c.sources)
    if (!s.consistent()) out.push_back("source " + s.id + " has inconsistent category/format");

  auto check_constraint = [&](const std::string& where, const Constraint& k, const Attribute* attr) {
    if (!attr) {
      out.push_back(where + ": constraint names absent attribute '" + k.attribute_name + "'");
      return;
    }
    if (!attr->type.admits(k.value))
      out.push_back(where + ": constraint value on '" + k.attribute_name + "' does not match type " +
                    attr->type.to_string());
  };

  for (const auto& m : c.models) {
    const std::string mp = m.name;
    if (m.name.empty()) out.push_back("model with empty name");
    for (const auto& l : m.linked_models) {
      if (l == m.name) out.push_back(mp + ": links to itself");
      else if (!c.find_model(l)) out.push_back(mp + ": linked model '" + l + "' does not exist");
    }
    if (!m.connection.empty() && !c.find_source(m.connection))
      out.push_back(mp + ": connection '" + m.connection + "' names no source");
    dup_check(m.entities, name_of, "entity in " + mp);
    dup_check(m.relations, name_of, "relation in " + mp);
    for (const auto& e : m.entities) {
      const std::string ep = mp + "/" + e.name;
      dup_check(e.attributes, name_of, "attribute in " + ep);
      for (const auto& a : e.attributes)
        if (a.default_value && !a.type.admits(*a.default_value))
          out.push_back(ep + "/" + a.name + ": default does not match type " + a.type.to_string());
      std::set<std::pair<std::string, int>> keys;
      for (const auto& k : e.constraints) {
        if (!keys.insert({k.attribute_name, static_cast<int>(k.sign)}).second)
          out.push_back(ep + ": duplicate constraint on '" + k.attribute_name + "'");
        check_constraint(ep, k, e.find_attribute(k.attribute_name));
      }
    }
    for (const auto& r : m.relations) {
      const std::string rp = mp + "/@" + r.name;
      if (!m.find_entity(r.start_entity)) out.push_back(rp + ": start entity '" + r.start_entity + "' missing");
      if (!m.find_entity(r.end_entity)) out.push_back(rp + ": end entity '" + r.end_entity + "' missing");
      if (!(r.start_min <= r.start_max)) out.push_back(rp + ": startMin exceeds startMax");
      if (!(r.end_min <= r.end_max)) out.push_back(rp + ": endMin exceeds endMax");
      for (const auto& k : r.constraints)
        check_constraint(rp, k, Catalog::relation_attribute(m, r, k.attribute_name));
    }
  }

  for (const auto& [syn, targets] : c.synonyms.targets) {
    if (!is_identifier(syn)) out.push_back("synonym '" + syn + "' is not an identifier");
    if (targets.empty()) out.push_back("synonym '" + syn + "' has no target");
    for (const auto& t : targets) {
      ElementPath p;
      try {
        p = ElementPath::parse(t);
      } catch (const Error&) {
        out.push_back("synonym '" + syn + "' has malformed target '" + t + "'");
        continue;
      }
      const Model* m = c.find_model(p.model);
      const Entity* e = m ? m->find_entity(p.owner) : nullptr;
      const bool ok = (p.kind == ElementPath::Kind::Entity && e) ||
                      (p.kind == ElementPath::Kind::Attribute && e && e->find_attribute(p.name));
      if (!ok) {
        out.push_back("synonym '" + syn + "' targets missing element '" + t + "'");
        continue;
      }
      bool clash = m->name == syn || m->find_relation(syn) != nullptr;
      for (const auto& ent : m->entities)
        clash = clash || ent.name == syn || ent.find_attribute(syn) != nullptr;
      if (clash) out.push_back("synonym '" + syn + "' shadows an element name in model " + m->name);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queries over the catalog

using ElementRef =
    std::variant<const Model*, const Entity*, const Relation*, const Attribute*, const Constraint*>;

struct LookupResult {
  ElementPath path;
  ElementRef element;
};

inline LookupResult lookup(const Catalog& c, const ElementPath& path) {
  using K = ElementPath::Kind;
  auto missing = [&]() { return Error(ErrorKind::NotFound, "no element '" + path.to_string() + "'"); };
  const Model* m = c.find_model(path.model);
  if (!m) throw missing();
  if (path.kind == K::Model) return {path, m};
  if (path.kind == K::Relation || (path.kind == K::Constraint && path.on_relation)) {
    const Relation* r = m->find_relation(path.owner);
    if (!r) throw missing();
    if (path.kind == K::Relation) return {path, r};
    for (const auto& k : r->constraints)
      if (k.attribute_name == path.name && k.sign == path.sign) return {path, &k};
    throw missing();
  }
  const Entity* e = m->find_entity(path.owner);
  if (!e) throw missing();
  if (path.kind == K::Entity) return {path, e};
  if (path.kind == K::Attribute) {
    if (const Attribute* a = e->find_attribute(path.name)) return {path, a};
    throw missing();
  }
  for (const auto& k : e->constraints)
    if (k.attribute_name == path.name && k.sign == path.sign) return {path, &k};
  throw missing();
}

/// Name resolution: exact entity names, then model names, then synonyms.
inline LookupResult lookup(const Catalog& c, std::string_view name) {
  std::vector<ElementPath> hits;
  for (const auto& m : c.models)
    for (const auto& e : m.entities)
      if (e.name == name) hits.push_back(ElementPath::of_entity(m.name, e.name));
  if (hits.empty())
    for (const auto& m : c.models)
      if (m.name == name) hits.push_back(ElementPath::of_model(m.name));
  if (hits.empty()) {
    auto it = c.synonyms.targets.find(std::string(name));
    if (it != c.synonyms.targets.end())
      for (const auto& t : it->second) hits.push_back(ElementPath::parse(t));
  }
  if (hits.empty()) throw Error(ErrorKind::NotFound, "no element named '" + std::string(name) + "'");
  if (hits.size() > 1) {
    std::string candidates;
    for (const auto& h : hits) candidates += (candidates.empty() ? "" : ", ") + h.to_string();
    throw Error(ErrorKind::AmbiguousSynonym, "'" + std::string(name) + "' matches " + candidates);
  }
  return lookup(c, hits.front());
}

/// Relations touching an entity, sorted by name. Self-loops appear once in
/// `All` and in both `In` and `Out`.
inline std::vector<Relation> relations_of(const Catalog& c, const ElementPath& entity, Direction dir) {
  const Model* m = c.find_model(entity.model);
  if (!m || !m->find_entity(entity.owner))
    throw Error(ErrorKind::NotFound, "no entity '" + entity.to_string() + "'");
  std::vector<Relation> out;
  for (const auto& r : m->relations) {
    const bool out_edge = r.start_entity == entity.owner;
    const bool in_edge = r.end_entity == entity.owner;
    const bool keep = dir == Direction::Out ? out_edge : dir == Direction::In ? in_edge : (out_edge || in_edge);
    if (keep) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

inline std::vector<Relation> relations_of(const Catalog& c, std::string_view entity, Direction dir) {
  const auto found = lookup(c, entity);
  if (found.path.kind != ElementPath::Kind::Entity)
    throw Error(ErrorKind::NotFound, "'" + std::string(entity) + "' is not an entity");
  return relations_of(c, found.path, dir);
}

/// One violation per constraint whose comparison does not hold. A missing
/// or null cell violates every constraint on its attribute.
inline std::vector<Violation> check_constraints(const Entity& e, const std::map<std::string, Value>& row) {
  std::vector<Violation> out;
  for (const auto& k : e.constraints) {
    auto it = row.find(k.attribute_name);
    const bool ok = it != row.end() && satisfies(it->second, k.sign, k.value);
    if (!ok) out.push_back({k.attribute_name, k.error_message});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

using nlohmann::json;

inline json value_to_json(const Value& v) {
  if (is_null(v)) return nullptr;
  if (is_text(v)) return std::get<std::string>(v);
  const double d = std::get<double>(v);
  if (std::trunc(d) == d && std::fabs(d) < 9e15) return static_cast<std::int64_t>(d);
  return d;
}

inline json cardinality_to_json(const Cardinality& c) {
  if (c.unbounded) return "N";
  return c.value;
}

inline json constraint_to_json(const Constraint& k) {
  return json{{"attributeName", k.attribute_name},
              {"sign", std::string(to_string(k.sign))},
              {"value", value_to_json(k.value)},
              {"errorMessage", k.error_message}};
}

inline json to_json(const Catalog& c) {
  json models = json::array();
  for (const auto& m : c.models) {
    json entities = json::array();
    for (const auto& e : m.entities) {
      json attrs = json::array();
      for (const auto& a : e.attributes)
        attrs.push_back({{"name", a.name},
                         {"description", a.description},
                         {"type", a.type.to_string()},
                         {"default", a.default_value ? value_to_json(*a.default_value) : json(nullptr)}});
      json cons = json::array();
      for (const auto& k : e.constraints) cons.push_back(constraint_to_json(k));
      entities.push_back({{"name", e.name},
                          {"description", e.description},
                          {"entityType", e.entity_type},
                          {"drawType", e.draw_type},
                          {"attributes", attrs},
                          {"constraints", cons},
                          {"operations", e.operations},
                          {"values", e.values}});
    }
    json relations = json::array();
    for (const auto& r : m.relations) {
      json cons = json::array();
      for (const auto& k : r.constraints) cons.push_back(constraint_to_json(k));
      relations.push_back({{"name", r.name},
                           {"description", r.description},
                           {"type", r.type},
                           {"startEntity", r.start_entity},
                           {"endEntity", r.end_entity},
                           {"startMin", cardinality_to_json(r.start_min)},
                           {"startMax", cardinality_to_json(r.start_max)},
                           {"endMin", cardinality_to_json(r.end_min)},
                           {"endMax", cardinality_to_json(r.end_max)},
                           {"constraints", cons}});
    }
    models.push_back({{"name", m.name},
                      {"description", m.description},
                      {"metaModelName", m.meta_model_name},
                      {"fileName", m.file_name},
                      {"connection", m.connection},
                      {"linkedModels", m.linked_models},
                      {"entities", entities},
                      {"relations", relations}});
  }
  json syn = json::object();
  for (const auto& [k, v] : c.synonyms.targets) syn[k] = v;
  json sources = json::array();
  for (const auto& s : c.sources)
    sources.push_back({{"id", s.id},
                       {"category", std::string(to_string(s.category))},
                       {"format", std::string(to_string(s.format))},
                       {"location", s.location},
                       {"options", s.options}});
  json profiles = json::object();
  for (const auto& [key, w] : c.profiles.entries()) profiles[key.first][key.second] = w;
  return json{{"version", 1}, {"models", models}, {"synonyms", syn}, {"sources", sources}, {"profiles", profiles}};
}

/// Typed field access with FormatError naming the offending field.
class Reader {
 public:
  [[noreturn]] static void bad(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::FormatError, where + ": " + what);
  }

  static const json& field(const json& obj, const std::string& where, const char* name) {
    if (!obj.is_object()) bad(where, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end()) bad(where + "." + name, "missing field");
    return *it;
  }

  static std::string str(const json& obj, const std::string& where, const char* name, bool required = false) {
    if (!obj.is_object()) bad(where, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) {
      if (required) bad(where + "." + name, "missing field");
      return {};
    }
    if (!it->is_string()) bad(where + "." + name, "expected a string");
    return it->get<std::string>();
  }

  static const json& array(const json& obj, const std::string& where, const char* name) {
    static const json empty = json::array();
    if (!obj.is_object()) bad(where, "expected an object");
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) return empty;
    if (!it->is_array()) bad(where + "." + name, "expected an array");
    return *it;
  }

  static std::vector<std::string> strings(const json& obj, const std::string& where, const char* name) {
    std::vector<std::string> out;
    const json& arr = array(obj, where, name);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) bad(where + "." + name + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  }

  static Value value(const json& j, const std::string& where) {
    if (j.is_null()) return Null{};
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return j.get<double>();
    bad(where, "expected a number, string or null");
  }

  static Cardinality cardinality(const json& obj, const std::string& where, const char* name, Cardinality fallback) {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) return fallback;
    if (it->is_string() && it->get<std::string>() == "N") return Cardinality::many();
    if (it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0))
      return Cardinality::of(it->get<std::uint64_t>());
    bad(where + "." + name, "expected a non-negative integer or \"N\"");
  }

  static Constraint constraint(const json& j, const std::string& where) {
    Constraint k;
    k.attribute_name = str(j, where, "attributeName", true);
    const std::string sign = str(j, where, "sign", true);
    auto cmp = parse_comparator(sign);
    if (!cmp) bad(where + ".sign", "unknown comparator '" + sign + "'");
    k.sign = *cmp;
    k.value = value(field(j, where, "value"), where + ".value");
    if (is_null(k.value)) bad(where + ".value", "constraint value must not be null");
    k.error_message = str(j, where, "errorMessage");
    return k;
  }

  static Model model(const json& jm, const std::string& mw) {
    Model m;
    m.name = str(jm, mw, "name", true);
    m.description = str(jm, mw, "description");
    m.meta_model_name = str(jm, mw, "metaModelName");
    m.file_name = str(jm, mw, "fileName");
    m.connection = str(jm, mw, "connection");
    m.linked_models = strings(jm, mw, "linkedModels");
    const json& ents = array(jm, mw, "entities");
    for (std::size_t i = 0; i < ents.size(); ++i) {
      const std::string ew = mw + ".entities[" + std::to_string(i) + "]";
      const json& je = ents[i];
      Entity e;
      e.name = str(je, ew, "name", true);
      e.description = str(je, ew, "description");
      e.entity_type = str(je, ew, "entityType");
      e.draw_type = str(je, ew, "drawType");
      e.operations = strings(je, ew, "operations");
      e.values = strings(je, ew, "values");
      const json& attrs = array(je, ew, "attributes");
      for (std::size_t k = 0; k < attrs.size(); ++k) {
        const std::string aw = ew + ".attributes[" + std::to_string(k) + "]";
        Attribute a;
        a.name = str(attrs[k], aw, "name", true);
        a.description = str(attrs[k], aw, "description");
        const std::string type = str(attrs[k], aw, "type");
        auto parsed = AttributeType::parse(type.empty() ? "text" : type);
        if (!parsed) bad(aw + ".type", "unknown type '" + type + "'");
        a.type = *parsed;
        auto dit = attrs[k].find("default");
        if (dit != attrs[k].end() && !dit->is_null()) a.default_value = value(*dit, aw + ".default");
        e.attributes.push_back(std::move(a));
      }
      const json& cons = array(je, ew, "constraints");
      for (std::size_t k = 0; k < cons.size(); ++k)
        e.constraints.push_back(constraint(cons[k], ew + ".constraints[" + std::to_string(k) + "]"));
      m.entities.push_back(std::move(e));
    }
    const json& rels = array(jm, mw, "relations");
    for (std::size_t i = 0; i < rels.size(); ++i) {
      const std::string rw = mw + ".relations[" + std::to_string(i) + "]";
      const json& jr = rels[i];
      Relation r;
      r.name = str(jr, rw, "name", true);
      r.description = str(jr, rw, "description");
      r.type = str(jr, rw, "type");
      r.start_entity = str(jr, rw, "startEntity", true);
      r.end_entity = str(jr, rw, "endEntity", true);
      r.start_min = cardinality(jr, rw, "startMin", Cardinality::of(0));
      r.start_max = cardinality(jr, rw, "startMax", Cardinality::many());
      r.end_min = cardinality(jr, rw, "endMin", Cardinality::of(0));
      r.end_max = cardinality(jr, rw, "endMax", Cardinality::many());
      const json& cons = array(jr, rw, "constraints");
      for (std::size_t k = 0; k < cons.size(); ++k)
        r.constraints.push_back(constraint(cons[k], rw + ".constraints[" + std::to_string(k) + "]"));
      m.relations.push_back(std::move(r));
    }
    return m;
  }
};

inline Catalog from_json(const json& doc) {
  Catalog c;
  const json* models = &doc;
  if (doc.is_object()) {
    auto v = doc.find("version");
    if (v != doc.end() && !(v->is_number_integer() && v->get<int>() == 1))
      Reader::bad("version", "unsupported catalog version");
    models = &Reader::array(doc, "catalog", "models");
  } else if (!doc.is_array()) {
    Reader::bad("catalog", "expected an object or an array of models");
  }
  for (std::size_t i = 0; i < models->size(); ++i)
    c.models.push_back(Reader::model((*models)[i], "models[" + std::to_string(i) + "]"));

  if (doc.is_object()) {
    if (auto it = doc.find("synonyms"); it != doc.end() && !it->is_null()) {
      if (!it->is_object()) Reader::bad("synonyms", "expected an object");
      for (const auto& [syn, targets] : it->items()) {
        if (targets.is_string()) {
          c.synonyms.add(syn, targets.get<std::string>());
          continue;
        }
        for (const auto& t : Reader::strings(*it, "synonyms", syn.c_str())) c.synonyms.add(syn, t);
      }
    }
    const json& sources = Reader::array(doc, "catalog", "sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const std::string sw = "sources[" + std::to_string(i) + "]";
      SourceDescriptor s;
      s.id = Reader::str(sources[i], sw, "id", true);
      const std::string cat = Reader::str(sources[i], sw, "category", true);
      const std::string fmt = Reader::str(sources[i], sw, "format", true);
      auto pc = parse_category(cat);
      auto pf = parse_format(fmt);
      if (!pc) Reader::bad(sw + ".category", "unknown category '" + cat + "'");
      if (!pf) Reader::bad(sw + ".format", "unknown format '" + fmt + "'");
      s.category = *pc;
      s.format = *pf;
      s.location = Reader::str(sources[i], sw, "location", true);
      if (auto it = sources[i].find("options"); it != sources[i].end() && !it->is_null()) {
        if (!it->is_object()) Reader::bad(sw + ".options", "expected an object");
        for (const auto& [k, v] : it->items()) {
          if (!v.is_string()) Reader::bad(sw + ".options." + k, "expected a string");
          s.options[k] = v.get<std::string>();
        }
      }
      c.sources.push_back(std::move(s));
    }
    if (auto it = doc.find("profiles"); it != doc.end() && !it->is_null()) {
      if (!it->is_object()) Reader::bad("profiles", "expected an object");
      for (const auto& [user, objects] : it->items()) {
        if (!objects.is_object()) Reader::bad("profiles." + user, "expected an object");
        for (const auto& [object, w] : objects.items()) {
          if (!w.is_number_integer()) Reader::bad("profiles." + user + "." + object, "expected an integer");
          try {
            c.profiles.put(user, object, w.get<std::int64_t>());
          } catch (const Error& e) {
            throw Error(ErrorKind::InvariantViolation, e.detail());
          }
        }
      }
    }
  }
  c.normalize();
  c.check();
  return c;
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

/// Deterministic text form: sorted keys, sorted collections, two-space
/// indentation, trailing newline.
inline std::string serialize(const Catalog& c) {
  Catalog copy = c;
  copy.normalize();
  return detail::to_json(copy).dump(2) + "\n";
}

inline Catalog parse_catalog(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t line = detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorKind::FormatError, "line " + std::to_string(line) + ": " + e.what(), line);
  }
  return detail::from_json(doc);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

inline Catalog load(const std::filesystem::path& path) { return parse_catalog(read_file(path)); }

inline void save(const Catalog& c, const std::filesystem::path& path) { write_file(path, serialize(c)); }

}  // namespace dsq
