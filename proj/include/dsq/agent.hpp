#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsq/adapters.hpp"
#include "dsq/catalog.hpp"
#include "dsq/error.hpp"
#include "dsq/source.hpp"

namespace dsq {

// ---------------------------------------------------------------------------
// Machine definitions

enum class StateKind { Initial, Intermediate, Final };

constexpr std::string_view to_string(StateKind k) {
  switch (k) {
    case StateKind::Initial: return "initial";
    case StateKind::Intermediate: return "intermediate";
    case StateKind::Final: return "final";
  }
  return "intermediate";
}

struct StateDef {
  std::string name;
  StateKind kind = StateKind::Intermediate;
  std::optional<std::string> entry_action;
  std::optional<std::string> exit_action;
  std::optional<std::string> initial_activity;
  std::optional<std::string> final_activity;
  friend bool operator==(const StateDef&, const StateDef&) = default;
};

struct TransitionLabel {
  std::string trigger;
  std::optional<std::string> guard;
  std::optional<std::string> action;
  friend bool operator==(const TransitionLabel&, const TransitionLabel&) = default;
};

struct TransitionDef {
  std::string from;
  std::string to;
  std::string trigger;
  std::optional<std::string> guard;
  std::optional<std::string> action;

  std::string label() const {
    std::string s = trigger;
    if (guard) s += " [" + *guard + "]";
    if (action) s += " / " + *action;
    return s;
  }

  friend bool operator==(const TransitionDef&, const TransitionDef&) = default;
};

struct StateMachineDef {
  std::string name;
  std::vector<StateDef> states;
  std::vector<TransitionDef> transitions;

  const StateDef* find_state(std::string_view n) const {
    for (const auto& s : states)
      if (s.name == n) return &s;
    return nullptr;
  }

  const StateDef* initial_state() const {
    for (const auto& s : states)
      if (s.kind == StateKind::Initial) return &s;
    return nullptr;
  }

  friend bool operator==(const StateMachineDef&, const StateMachineDef&) = default;
};

/// Parses "Trigger [Guard] / Action"; guard and action are optional.
inline TransitionLabel parse_transition_label(std::string_view text) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::LabelSyntaxError, why + " in label '" + std::string(text) + "'");
  };
  auto trim = [](std::string_view s) { return detail::trim(s); };
  TransitionLabel out;
  std::string_view rest = text;
  const auto open = text.find('[');
  const auto slash_before = text.find('/');
  std::size_t after_guard = 0;
  if (open != std::string_view::npos && (slash_before == std::string_view::npos || open < slash_before)) {
    const auto close = text.find(']', open);
    if (close == std::string_view::npos) throw fail("unbalanced '['");
    const std::string guard = trim(text.substr(open + 1, close - open - 1));
    if (guard.empty()) throw fail("empty guard");
    if (guard.find('[') != std::string::npos) throw fail("nested '['");
    out.guard = guard;
    out.trigger = trim(text.substr(0, open));
    after_guard = close + 1;
    rest = text.substr(after_guard);
    const std::string between = trim(rest.substr(0, rest.find('/')));
    if (!between.empty()) throw fail("unexpected text after guard");
  } else {
    if (text.find(']') != std::string_view::npos && (slash_before == std::string_view::npos || text.find(']') < slash_before))
      throw fail("unbalanced ']'");
    out.trigger = trim(text.substr(0, slash_before == std::string_view::npos ? text.size() : slash_before));
    rest = slash_before == std::string_view::npos ? std::string_view{} : text.substr(slash_before);
  }
  if (out.trigger.empty()) throw fail("empty trigger");
  const auto slash = rest.find('/');
  if (slash != std::string_view::npos) {
    const std::string action = trim(rest.substr(slash + 1));
    if (action.empty()) throw fail("empty action");
    if (action.find_first_of("[]/") != std::string::npos) throw fail("malformed action");
    out.action = action;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

enum class MachineIssueKind {
  InitialCount,
  NoFinalState,
  DuplicateState,
  UnknownState,
  MisplacedAction,
  Nondeterminism,
  Unreachable,
};

struct MachineIssue {
  MachineIssueKind kind;
  std::string message;
  friend bool operator==(const MachineIssue&, const MachineIssue&) = default;
};

/// All structural problems of `def`; empty means the machine is valid.
/// Determinism is checked conservatively: two transitions from one state on
/// one trigger conflict when their guards are identical or either is absent
/// (an unguarded transition is always enabled).
inline std::vector<MachineIssue> validate_machine(const StateMachineDef& def) {
  std::vector<MachineIssue> out;
  auto issue = [&](MachineIssueKind k, std::string m) { out.push_back({k, std::move(m)}); };

  std::set<std::string> names;
  std::size_t initials = 0;
  std::size_t finals = 0;
  for (const auto& s : def.states) {
    if (!names.insert(s.name).second) issue(MachineIssueKind::DuplicateState, "state '" + s.name + "' declared twice");
    if (s.kind == StateKind::Initial) {
      ++initials;
      if (s.entry_action || s.exit_action || s.final_activity)
        issue(MachineIssueKind::MisplacedAction, "initial state '" + s.name + "' may only carry an initial activity");
    } else if (s.kind == StateKind::Final) {
      ++finals;
      if (s.entry_action || s.exit_action || s.initial_activity)
        issue(MachineIssueKind::MisplacedAction, "final state '" + s.name + "' may only carry a final activity");
    } else if (s.initial_activity || s.final_activity) {
      issue(MachineIssueKind::MisplacedAction, "intermediate state '" + s.name + "' cannot carry initial/final activities");
    }
  }
  if (initials != 1) issue(MachineIssueKind::InitialCount, "expected exactly one initial state, found " + std::to_string(initials));
  if (finals == 0) issue(MachineIssueKind::NoFinalState, "no final state");

  for (const auto& t : def.transitions) {
    if (!names.count(t.from)) issue(MachineIssueKind::UnknownState, "transition '" + t.label() + "' leaves undeclared state '" + t.from + "'");
    if (!names.count(t.to)) issue(MachineIssueKind::UnknownState, "transition '" + t.label() + "' enters undeclared state '" + t.to + "'");
  }
  for (std::size_t i = 0; i < def.transitions.size(); ++i)
    for (std::size_t j = i + 1; j < def.transitions.size(); ++j) {
      const auto& a = def.transitions[i];
      const auto& b = def.transitions[j];
      if (a.from == b.from && a.trigger == b.trigger && (a.guard == b.guard || !a.guard || !b.guard))
        issue(MachineIssueKind::Nondeterminism,
              "state '" + a.from + "' has overlapping transitions on '" + a.trigger + "': '" + a.label() + "' and '" + b.label() + "'");
    }

  if (const StateDef* init = def.initial_state(); init && initials == 1) {
    std::set<std::string> seen{init->name};
    std::deque<std::string> queue{init->name};
    while (!queue.empty()) {
      const std::string cur = queue.front();
      queue.pop_front();
      for (const auto& t : def.transitions)
        if (t.from == cur && names.count(t.to) && seen.insert(t.to).second) queue.push_back(t.to);
    }
    for (const auto& s : def.states)
      if (!seen.count(s.name)) issue(MachineIssueKind::Unreachable, "state '" + s.name + "' is unreachable");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

/// Host callables that guard and action ids are bound to.
template <typename Context>
struct Behaviors {
  std::map<std::string, std::function<bool(const Context&)>> guards;
  std::map<std::string, std::function<void(Context&)>> actions;
};

struct StepResult {
  std::string next;
  std::vector<std::string> fired;
};

namespace detail {

template <typename Context>
void fire(const std::string& id, Context& ctx, const Behaviors<Context>& behaviors, std::vector<std::string>& fired) {
  auto it = behaviors.actions.find(id);
  if (it == behaviors.actions.end()) throw Error(ErrorKind::ActionError, "no action bound to '" + id + "'");
  it->second(ctx);
  fired.push_back(id);
}

}  // namespace detail

/// Takes the single enabled transition for `event`, firing
/// exit(current), the transition action, then entry(next).
template <typename Context>
StepResult step(const StateMachineDef& def, const std::string& current, const std::string& event, Context& ctx,
                const Behaviors<Context>& behaviors) {
  const TransitionDef* chosen = nullptr;
  for (const auto& t : def.transitions) {
    if (t.from != current || t.trigger != event) continue;
    bool enabled = true;
    if (t.guard) {
      auto g = behaviors.guards.find(*t.guard);
      if (g == behaviors.guards.end()) throw Error(ErrorKind::GuardEvalError, "no guard bound to '" + *t.guard + "'");
      try {
        enabled = g->second(static_cast<const Context&>(ctx));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::GuardEvalError, "guard '" + *t.guard + "' failed: " + e.what());
      }
    }
    if (!enabled) continue;
    if (chosen)
      throw Error(ErrorKind::GuardEvalError, "transitions '" + chosen->label() + "' and '" + t.label() + "' are both enabled");
    chosen = &t;
  }
  if (!chosen) throw Error(ErrorKind::NoTransition, "no transition from '" + current + "' on '" + event + "'");

  const StateDef* from = def.find_state(current);
  const StateDef* to = def.find_state(chosen->to);
  if (!from || !to) throw Error(ErrorKind::NoTransition, "transition '" + chosen->label() + "' names an undeclared state");
  StepResult result{to->name, {}};
  if (from->exit_action) detail::fire(*from->exit_action, ctx, behaviors, result.fired);
  if (chosen->action) detail::fire(*chosen->action, ctx, behaviors, result.fired);
  if (to->entry_action) detail::fire(*to->entry_action, ctx, behaviors, result.fired);
  return result;
}

enum class RunStatus { Finished, Stuck, Error };

struct RunTrace {
  struct Entry {
    std::string state;
    std::optional<std::string> event;  // absent for the initial entry
    std::vector<std::string> actions;
  };
  std::vector<Entry> entries;
  RunStatus status = RunStatus::Stuck;
  std::optional<Error> error;

  std::vector<std::string> all_actions() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.insert(out.end(), e.actions.begin(), e.actions.end());
    return out;
  }
};

/// Fires the initial activity, folds `step` over `events`, and fires the
/// final activity when the run ends in a final state. Errors stop the run
/// and are kept with the partial trace.
template <typename Context>
RunTrace run(const StateMachineDef& def, const std::vector<std::string>& events, Context& ctx,
             const Behaviors<Context>& behaviors) {
  RunTrace trace;
  const StateDef* init = def.initial_state();
  if (!init) {
    trace.status = RunStatus::Error;
    trace.error = Error(ErrorKind::NoTransition, "machine has no initial state");
    return trace;
  }
  trace.entries.push_back({init->name, std::nullopt, {}});
  try {
    if (init->initial_activity) detail::fire(*init->initial_activity, ctx, behaviors, trace.entries.back().actions);
    std::string current = init->name;
    for (const auto& ev : events) {
      StepResult r = step(def, current, ev, ctx, behaviors);
      trace.entries.push_back({r.next, ev, std::move(r.fired)});
      current = trace.entries.back().state;
    }
    const StateDef* last = def.find_state(current);
    if (last && last->kind == StateKind::Final) {
      if (last->final_activity) detail::fire(*last->final_activity, ctx, behaviors, trace.entries.back().actions);
      trace.status = RunStatus::Finished;
    } else {
      trace.status = RunStatus::Stuck;
    }
  } catch (const Error& e) {
    trace.status = RunStatus::Error;
    trace.error = e;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Machine definition files

namespace detail {

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorKind::FormatError, where + "." + key + ": expected a string");
  return it->get<std::string>();
}

}  // namespace detail

/// Machine document: `name`, `states` (name, kind, entryAction, exitAction,
/// initialActivity, finalActivity) and `transitions` (from, to, and either
/// `label` in "Trigger [Guard] / Action" form or trigger/guard/action).
inline StateMachineDef parse_machine(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::FormatError, std::string("machine: ") + e.what());
  }
  using R = detail::Reader;
  StateMachineDef def;
  def.name = R::str(doc, "machine", "name");
  const auto& states = R::array(doc, "machine", "states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::string w = "states[" + std::to_string(i) + "]";
    StateDef s;
    s.name = R::str(states[i], w, "name", true);
    const std::string kind = R::str(states[i], w, "kind", true);
    if (kind == "initial") s.kind = StateKind::Initial;
    else if (kind == "intermediate") s.kind = StateKind::Intermediate;
    else if (kind == "final") s.kind = StateKind::Final;
    else R::bad(w + ".kind", "unknown state kind '" + kind + "'");
    s.entry_action = detail::opt_string(states[i], "entryAction", w);
    s.exit_action = detail::opt_string(states[i], "exitAction", w);
    s.initial_activity = detail::opt_string(states[i], "initialActivity", w);
    s.final_activity = detail::opt_string(states[i], "finalActivity", w);
    def.states.push_back(std::move(s));
  }
  const auto& transitions = R::array(doc, "machine", "transitions");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const std::string w = "transitions[" + std::to_string(i) + "]";
    TransitionDef t;
    t.from = R::str(transitions[i], w, "from", true);
    t.to = R::str(transitions[i], w, "to", true);
    if (auto label = detail::opt_string(transitions[i], "label", w)) {
      TransitionLabel l = parse_transition_label(*label);
      t.trigger = l.trigger;
      t.guard = l.guard;
      t.action = l.action;
    } else {
      t.trigger = R::str(transitions[i], w, "trigger", true);
      t.guard = detail::opt_string(transitions[i], "guard", w);
      t.action = detail::opt_string(transitions[i], "action", w);
    }
    def.transitions.push_back(std::move(t));
  }
  return def;
}

inline std::string serialize_machine(const StateMachineDef& def) {
  nlohmann::json states = nlohmann::json::array();
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  for (const auto& s : def.states)
    states.push_back({{"name", s.name},
                      {"kind", std::string(to_string(s.kind))},
                      {"entryAction", opt(s.entry_action)},
                      {"exitAction", opt(s.exit_action)},
                      {"initialActivity", opt(s.initial_activity)},
                      {"finalActivity", opt(s.final_activity)}});
  nlohmann::json transitions = nlohmann::json::array();
  for (const auto& t : def.transitions) transitions.push_back({{"from", t.from}, {"to", t.to}, {"label", t.label()}});
  return nlohmann::json{{"name", def.name}, {"states", states}, {"transitions", transitions}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Source discovery

inline constexpr std::string_view kDiscoveryMachine = R"json({
  "name": "source-discovery",
  "states": [
    {"name": "Initial", "kind": "initial", "initialActivity": "beginDiscovery"},
    {"name": "Probe", "kind": "intermediate", "entryAction": "detectKind"},
    {"name": "ExtractSchema", "kind": "intermediate"},
    {"name": "Register", "kind": "intermediate", "entryAction": "registerModel"},
    {"name": "Final", "kind": "final", "finalActivity": "endDiscovery"}
  ],
  "transitions": [
    {"from": "Initial", "to": "Probe", "label": "start"},
    {"from": "Probe", "to": "ExtractSchema", "label": "fileFound [isCsv] / inferCsvSchema"},
    {"from": "Probe", "to": "ExtractSchema", "label": "fileFound [isXml] / inferXmlSchema"},
    {"from": "Probe", "to": "ExtractSchema", "label": "fileFound [isJson] / inferJsonSchema"},
    {"from": "Probe", "to": "ExtractSchema", "label": "fileFound [isTxt] / inferTextSchema"},
    {"from": "ExtractSchema", "to": "Register", "label": "schemaReady / buildModel"},
    {"from": "Register", "to": "Final", "label": "registered"}
  ]
})json";

inline const std::vector<std::string>& discovery_events() {
  static const std::vector<std::string> events = {"start", "fileFound", "schemaReady", "registered"};
  return events;
}

inline const StateMachineDef& discovery_machine() {
  static const StateMachineDef def = [] {
    StateMachineDef d = parse_machine(kDiscoveryMachine);
    if (auto issues = validate_machine(d); !issues.empty())
      throw Error(ErrorKind::InvariantViolation, "discovery machine: " + issues.front().message);
    return d;
  }();
  return def;
}

struct DiscoveryContext {
  SourceDescriptor source;
  bool described = false;
  Entity entity;
  Model model;
  Catalog catalog;
};

inline Behaviors<DiscoveryContext> discovery_behaviors() {
  Behaviors<DiscoveryContext> b;
  auto is = [](Format f) { return [f](const DiscoveryContext& c) { return c.source.format == f; }; };
  b.guards["isCsv"] = is(Format::Csv);
  b.guards["isXml"] = is(Format::Xml);
  b.guards["isJson"] = is(Format::Json);
  b.guards["isTxt"] = is(Format::Txt);

  auto infer = [](DiscoveryContext& c) { c.entity = infer_schema(c.source); };
  b.actions["beginDiscovery"] = [](DiscoveryContext&) {};
  b.actions["endDiscovery"] = [](DiscoveryContext&) {};
  b.actions["detectKind"] = [](DiscoveryContext& c) {
    if (c.described) return;
    const std::string location = c.source.location;
    c.source = describe_file(location);
    c.described = true;
  };
  b.actions["inferCsvSchema"] = infer;
  b.actions["inferXmlSchema"] = infer;
  b.actions["inferJsonSchema"] = infer;
  b.actions["inferTextSchema"] = infer;
  b.actions["buildModel"] = [](DiscoveryContext& c) {
    Model m;
    m.name = c.entity.name;
    m.description = "discovered " + std::string(to_string(c.source.format)) + " source";
    m.meta_model_name = std::string(to_string(c.source.format));
    m.file_name = c.source.location;
    m.connection = c.source.id;
    m.entities.push_back(c.entity);
    c.model = std::move(m);
  };
  b.actions["registerModel"] = [](DiscoveryContext& c) {
    Catalog next = c.catalog;
    next.upsert_source(c.source);
    // Synonyms into the previous version of this model survive only if
    // their target still exists.
    for (auto it = next.synonyms.targets.begin(); it != next.synonyms.targets.end();) {
      auto& list = it->second;
      std::erase_if(list, [&](const std::string& t) {
        const ElementPath p = ElementPath::parse(t);
        if (p.model != c.model.name) return false;
        const Entity* e = c.model.find_entity(p.owner);
        return !e || (p.kind == ElementPath::Kind::Attribute && !e->find_attribute(p.name));
      });
      it = list.empty() ? next.synonyms.targets.erase(it) : std::next(it);
    }
    next.upsert(c.model);
    c.catalog = std::move(next);
  };
  return b;
}

namespace detail {

inline Catalog run_discovery(DiscoveryContext ctx) {
  static const Behaviors<DiscoveryContext> behaviors = discovery_behaviors();
  RunTrace trace = run(discovery_machine(), discovery_events(), ctx, behaviors);
  if (trace.status == RunStatus::Error) throw *trace.error;
  if (trace.status != RunStatus::Finished)
    throw Error(ErrorKind::InvariantViolation, "discovery stopped in state " + trace.entries.back().state);
  return std::move(ctx.catalog);
}

}  // namespace detail

/// Runs the discovery machine for `source` and returns the updated catalog.
/// Rediscovering a known source replaces its model.
inline Catalog discover(const SourceDescriptor& source, const Catalog& catalog) {
  DiscoveryContext ctx;
  ctx.source = source;
  ctx.described = true;
  ctx.catalog = catalog;
  return detail::run_discovery(std::move(ctx));
}

/// As above, for a file whose kind is detected from its extension.
inline Catalog discover(const std::filesystem::path& path, const Catalog& catalog) {
  DiscoveryContext ctx;
  ctx.source.location = path.string();
  ctx.catalog = catalog;
  return detail::run_discovery(std::move(ctx));
}

}  // namespace dsq
