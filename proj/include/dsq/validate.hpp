#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dsq/catalog.hpp"
#include "dsq/error.hpp"
#include "dsq/metalang.hpp"
#include "dsq/source.hpp"

namespace dsq {

/// Where one query argument landed in the catalog.
struct Binding {
  std::string model;
  std::string entity;
  std::string source_id;
  Category category = Category::Structured;
  std::optional<std::string> attribute;  // resolved attribute name
  std::optional<std::string> keyword;    // text sources: par read as a search keyword
  friend bool operator==(const Binding&, const Binding&) = default;
};

/// A parsed query plus catalog resolution. `bindings` has one entry per
/// item (Se, questions, set ops), per profile entry, or a single entry for
/// the object of Cons/Semant. `predicate_attributes` holds the resolved
/// attribute of each Cons predicate.
struct ValidatedQuery {
  QueryAst query;
  std::vector<Binding> bindings;
  std::vector<std::string> predicate_attributes;
  friend bool operator==(const ValidatedQuery&, const ValidatedQuery&) = default;
};

/// Entity types that act as role tags for the question operators.
constexpr std::string_view role_tag(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::Who: return "agent";
    case QuestionKind::Where: return "location";
    case QuestionKind::What: return "subject";
    case QuestionKind::Which: return "selector";
    case QuestionKind::How: return "measure";
  }
  return "";
}

inline bool is_role_tag(std::string_view tag) {
  for (auto k : {QuestionKind::Who, QuestionKind::Where, QuestionKind::What, QuestionKind::Which, QuestionKind::How})
    if (role_tag(k) == tag) return true;
  return false;
}

namespace detail {

class Validator {
 public:
  explicit Validator(const Catalog& c) : catalog_(c) {
    for (const auto& m : c.models)
      for (const auto& e : m.entities)
        if (is_role_tag(e.entity_type)) role_tagged_ = true;
  }

  ValidatedQuery run(const QueryAst& q) {
    ValidatedQuery vq{q, {}, {}};
    std::visit([&](const auto& x) { bind(x, vq); }, q);
    return vq;
  }

 private:
  struct ObjectHit {
    const Model* model = nullptr;
    const Entity* entity = nullptr;
    std::optional<std::string> implied_attribute;
  };

  void bind(const SelectQuery& x, ValidatedQuery& vq) {
    bool any_agg = false;
    for (const auto& item : x.items) any_agg = any_agg || item.agg.has_value();
    for (const auto& item : x.items) {
      Binding b = bind_item(item);
      if (item.agg) {
        if (b.keyword)
          throw Error(ErrorKind::InvalidQuery, "cannot aggregate keyword search '" + *b.keyword + "'");
        if (*item.agg != AggKind::Count && !b.attribute)
          throw Error(ErrorKind::InvalidQuery, std::string(to_string(*item.agg)) + " over " + item.object + " needs an attribute");
      } else if (any_agg && !b.attribute) {
        throw Error(ErrorKind::InvalidQuery, "grouping by whole entity " + item.object + " is not supported");
      }
      vq.bindings.push_back(std::move(b));
    }
  }

  void bind(const QuestionQuery& x, ValidatedQuery& vq) {
    for (const auto& item : x.items) {
      Binding b = bind_item(item);
      if (role_tagged_) {
        const Entity* e = catalog_.find_model(b.model)->find_entity(b.entity);
        if (e->entity_type != role_tag(x.kind))
          throw Error(ErrorKind::RoleMismatch, std::string(to_string(x.kind)) + " expects an entity tagged '" +
                                                   std::string(role_tag(x.kind)) + "', " + b.entity + " is '" +
                                                   e->entity_type + "'");
      }
      vq.bindings.push_back(std::move(b));
    }
  }

  void bind(const ConsQuery& x, ValidatedQuery& vq) {
    const ObjectHit hit = resolve_object(x.object);
    vq.bindings.push_back(base_binding(hit));
    for (const auto& p : x.predicates) {
      auto attr = resolve_attribute(hit, p.attribute);
      if (!attr) throw Error(ErrorKind::UnknownAttribute, hit.entity->name + "." + p.attribute);
      vq.predicate_attributes.push_back(*attr);
    }
  }

  void bind(const SemantQuery& x, ValidatedQuery& vq) {
    const ObjectHit hit = resolve_object(x.object);
    Binding b = base_binding(hit);
    if (b.category != Category::Unstructured)
      throw Error(ErrorKind::InvalidQuery, "Semant needs a text source, " + x.object + " is " +
                                               std::string(to_string(b.category)));
    vq.bindings.push_back(std::move(b));
  }

  void bind(const ProfileQuery& x, ValidatedQuery& vq) {
    for (const auto& entry : x.entries) vq.bindings.push_back(base_binding(resolve_object(entry.object)));
  }

  void bind(const SetOpQuery& x, ValidatedQuery& vq) {
    for (const auto& item : x.items) vq.bindings.push_back(bind_item(item));
  }

  Binding bind_item(const ObjectItem& item) {
    const ObjectHit hit = resolve_object(item.object);
    Binding b = base_binding(hit);
    if (hit.implied_attribute) {
      if (item.par)
        throw Error(ErrorKind::InvalidQuery, "'" + item.object + "' already names attribute " +
                                                 hit.entity->name + "." + *hit.implied_attribute);
      b.attribute = hit.implied_attribute;
      return b;
    }
    if (!item.par) return b;
    if (auto attr = resolve_attribute(hit, *item.par)) {
      b.attribute = *attr;
    } else if (b.category == Category::Unstructured) {
      b.keyword = *item.par;
    } else {
      throw Error(ErrorKind::UnknownAttribute, hit.entity->name + "." + *item.par);
    }
    return b;
  }

  Binding base_binding(const ObjectHit& hit) const {
    Binding b;
    b.model = hit.model->name;
    b.entity = hit.entity->name;
    const SourceDescriptor* src = catalog_.find_source(hit.model->connection);
    if (!src)
      throw Error(ErrorKind::NotFound, "entity " + hit.entity->name + " has no registered source (model " +
                                           hit.model->name + ")");
    b.source_id = src->id;
    b.category = src->category;
    return b;
  }

  ObjectHit resolve_object(const std::string& name) const {
    std::vector<ObjectHit> hits;
    for (const auto& m : catalog_.models)
      for (const auto& e : m.entities)
        if (e.name == name) hits.push_back({&m, &e, std::nullopt});
    if (hits.size() > 1) throw ambiguous(name, hits.size());
    if (hits.size() == 1) return hits.front();

    auto it = catalog_.synonyms.targets.find(name);
    if (it == catalog_.synonyms.targets.end()) throw Error(ErrorKind::UnknownObject, name);
    if (it->second.size() > 1) throw ambiguous(name, it->second);
    const ElementPath p = ElementPath::parse(it->second.front());
    const Model* m = catalog_.find_model(p.model);
    const Entity* e = m ? m->find_entity(p.owner) : nullptr;
    if (!e) throw Error(ErrorKind::UnknownObject, name);
    ObjectHit hit{m, e, std::nullopt};
    if (p.kind == ElementPath::Kind::Attribute) hit.implied_attribute = p.name;
    return hit;
  }

  std::optional<std::string> resolve_attribute(const ObjectHit& hit, const std::string& name) const {
    if (hit.entity->find_attribute(name)) return name;
    auto it = catalog_.synonyms.targets.find(name);
    if (it == catalog_.synonyms.targets.end()) return std::nullopt;
    if (it->second.size() > 1) throw ambiguous(name, it->second);
    const ElementPath p = ElementPath::parse(it->second.front());
    if (p.kind == ElementPath::Kind::Attribute && p.model == hit.model->name && p.owner == hit.entity->name)
      return p.name;
    return std::nullopt;
  }

  static Error ambiguous(const std::string& name, const std::vector<std::string>& candidates) {
    std::string list;
    for (const auto& c : candidates) list += (list.empty() ? "" : ", ") + c;
    return Error(ErrorKind::AmbiguousSynonym, "'" + name + "' could mean " + list);
  }

  static Error ambiguous(const std::string& name, std::size_t count) {
    return Error(ErrorKind::AmbiguousSynonym, "'" + name + "' names " + std::to_string(count) + " entities");
  }

  const Catalog& catalog_;
  bool role_tagged_ = false;
};

}  // namespace detail

/// Resolves every object and par of `q` against `catalog`.
inline ValidatedQuery validate(const QueryAst& q, const Catalog& catalog) {
  return detail::Validator(catalog).run(q);
}

}  // namespace dsq
