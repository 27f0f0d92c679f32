#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "dsq/agent.hpp"
#include "dsq/catalog.hpp"
#include "dsq/engine.hpp"
#include "dsq/error.hpp"
#include "dsq/metalang.hpp"
#include "dsq/sqlgen.hpp"
#include "dsq/validate.hpp"

namespace dsq::cli {

enum class OutputMode { Table, Csv };

struct CliConfig {
  std::filesystem::path catalog = "dataspace.json";
  std::string user = "default";
  OutputMode output = OutputMode::Table;
};

/// Flag beats environment beats default.
inline std::filesystem::path resolve_catalog_path(const std::string& flag, const char* env) {
  if (!flag.empty()) return flag;
  if (env && *env) return env;
  return "dataspace.json";
}

inline std::filesystem::path history_path(const std::filesystem::path& catalog) {
  return catalog.string() + ".runtime.json";
}

/// Exclusive advisory lock on `<catalog>.lock` for the lifetime of the object.
class CatalogLock {
 public:
  explicit CatalogLock(const std::filesystem::path& catalog) {
    const std::string path = catalog.string() + ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorKind::IoError, "cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorKind::IoError, "cannot lock " + path);
    }
  }
  CatalogLock(const CatalogLock&) = delete;
  CatalogLock& operator=(const CatalogLock&) = delete;
  ~CatalogLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_ = -1;
};

/// Deterministic listing of sources, models and synonyms.
inline std::string describe(const Catalog& c) {
  std::string out = "sources:\n";
  for (const auto& s : c.sources) {
    out += "  " + s.id + " " + std::string(to_string(s.category)) + " " + std::string(to_string(s.format)) + " " + s.location;
    for (const auto& [k, v] : s.options) out += " " + k + "=" + v;
    out += "\n";
  }
  out += "models:\n";
  for (const auto& m : c.models) {
    out += "  " + m.name;
    if (!m.meta_model_name.empty()) out += " (" + m.meta_model_name + ")";
    if (!m.connection.empty()) out += " <- " + m.connection;
    out += "\n";
    for (const auto& e : m.entities) {
      out += "    entity " + e.name;
      if (!e.entity_type.empty()) out += " [" + e.entity_type + "]";
      out += "\n";
      for (const auto& a : e.attributes) out += "      " + a.name + ": " + a.type.to_string() + "\n";
      for (const auto& k : e.constraints)
        out += "      check " + k.attribute_name + " " + std::string(to_string(k.sign)) + " " + render(k.value) + "\n";
    }
    for (const auto& r : m.relations) out += "    relation " + r.name + ": " + r.start_entity + " -> " + r.end_entity + "\n";
  }
  out += "synonyms:\n";
  for (const auto& [syn, targets] : c.synonyms.targets) {
    out += "  " + syn + " ->";
    for (const auto& t : targets) out += " " + t;
    out += "\n";
  }
  return out;
}

/// Runs one dsq invocation. Exit codes: 0 success, 1 usage, 2 domain error.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
               const char* env_catalog = std::getenv("DSQ_CATALOG")) {
  CLI::App app{"dsq - query a dataspace of heterogeneous sources", "dsq"};
  app.require_subcommand(1);

  std::string catalog_flag;
  std::string user = "default";
  std::string output = "table";
  app.add_option("--catalog", catalog_flag, "Catalog file (env DSQ_CATALOG, default ./dataspace.json)");
  app.add_option("--user", user, "User id for profile weights")->capture_default_str();
  app.add_option("--output", output, "Result format")->check(CLI::IsMember({"table", "csv"}))->capture_default_str();

  bool force = false;
  auto* init = app.add_subcommand("init", "Create an empty catalog");
  init->add_flag("--force", force, "Overwrite an existing catalog");

  std::string source_path;
  std::string source_id;
  std::string delimiter;
  auto* add_source = app.add_subcommand("add-source", "Register a data file as a source");
  add_source->add_option("path", source_path, "Data file (.csv, .xml, .json, .txt)")->required();
  add_source->add_option("--id", source_id, "Source id (default: file stem)");
  add_source->add_option("--delimiter", delimiter, "CSV delimiter");

  std::string discover_target;
  auto* discover_cmd = app.add_subcommand("discover", "Infer a source's structure and register it");
  discover_cmd->add_option("source", discover_target, "Source id or file path")->required();

  auto* show = app.add_subcommand("show", "Print the catalog");

  std::string query_text;
  bool estimate = false;
  auto* query = app.add_subcommand("query", "Run a metalanguage query");
  query->add_option("text", query_text, "Query text")->required();
  query->add_flag("--estimate", estimate, "Print the expected runtime instead of running");

  std::string translate_text;
  auto* translate_cmd = app.add_subcommand("translate", "Print the SQL form of a query");
  translate_cmd->add_option("text", translate_text, "Query text")->required();

  auto* profile = app.add_subcommand("profile", "Read or write profile weights");
  profile->require_subcommand(1);
  std::string profile_object;
  std::int64_t profile_weight = 0;
  auto* profile_get_cmd = profile->add_subcommand("get", "Print a weight");
  profile_get_cmd->add_option("object", profile_object)->required();
  auto* profile_set_cmd = profile->add_subcommand("set", "Store a weight");
  profile_set_cmd->add_option("object", profile_object)->required();
  profile_set_cmd->add_option("weight", profile_weight)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dsq: " << e.what() << "\n";
    return 1;
  }

  CliConfig cfg;
  cfg.catalog = resolve_catalog_path(catalog_flag, env_catalog);
  cfg.user = user;
  cfg.output = output == "csv" ? OutputMode::Csv : OutputMode::Table;
  if (cfg.catalog.empty()) {
    err << "dsq: empty catalog path\n";
    return 1;
  }

  try {
    if (init->parsed()) {
      CatalogLock lock(cfg.catalog);
      if (std::filesystem::exists(cfg.catalog) && !force)
        throw Error(ErrorKind::IoError, cfg.catalog.string() + " already exists (use --force)");
      save(Catalog{}, cfg.catalog);
      out << "initialised " << cfg.catalog.string() << "\n";
    } else if (add_source->parsed()) {
      CatalogLock lock(cfg.catalog);
      Catalog c = load(cfg.catalog);
      SourceDescriptor src = describe_file(source_path);
      if (!std::filesystem::exists(source_path)) throw Error(ErrorKind::IoError, "no such file " + source_path);
      if (!source_id.empty()) src.id = source_id;
      if (!delimiter.empty()) src.options["delimiter"] = delimiter;
      c.upsert_source(src);
      save(c, cfg.catalog);
      out << "added " << src.id << " (" << to_string(src.category) << ", " << to_string(src.format) << ")\n";
    } else if (discover_cmd->parsed()) {
      CatalogLock lock(cfg.catalog);
      Catalog c = load(cfg.catalog);
      if (const SourceDescriptor* src = c.find_source(discover_target)) {
        c = discover(*src, c);
      } else if (std::filesystem::exists(discover_target)) {
        c = discover(std::filesystem::path(discover_target), c);
      } else {
        throw Error(ErrorKind::NotFound, "no source or file named '" + discover_target + "'");
      }
      save(c, cfg.catalog);
      out << "discovered " << discover_target << "\n";
    } else if (show->parsed()) {
      out << describe(load(cfg.catalog));
    } else if (query->parsed()) {
      const QueryAst ast = parse(query_text);
      const bool writes = std::holds_alternative<ProfileQuery>(ast);
      std::optional<CatalogLock> lock;
      if (writes || !estimate) lock.emplace(cfg.catalog);
      Catalog c = load(cfg.catalog);
      const ValidatedQuery vq = validate(ast, c);
      const std::filesystem::path hist_path = history_path(cfg.catalog);
      RuntimeHistory history;
      if (std::filesystem::exists(hist_path)) history = RuntimeHistory::parse(read_file(hist_path));
      const std::string key = shape_key(vq);
      if (estimate) {
        auto ms = history.estimate(key);
        out << (ms ? format_number(*ms) + "ms" : std::string("unknown")) << "\n";
        return 0;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const ResultSet rs = execute(vq, c, c.profiles, cfg.user);
      const auto t1 = std::chrono::steady_clock::now();
      history.record(key, std::chrono::duration<double, std::milli>(t1 - t0).count());
      write_file(hist_path, history.serialize());
      if (writes) save(c, cfg.catalog);
      out << (cfg.output == OutputMode::Csv ? render_csv(rs) : render_table(rs));
    } else if (translate_cmd->parsed()) {
      const Catalog c = load(cfg.catalog);
      out << translate(validate(parse(translate_text), c)).statement << "\n";
    } else if (profile_get_cmd->parsed()) {
      const Catalog c = load(cfg.catalog);
      out << c.profiles.get(cfg.user, profile_object) << "\n";
    } else if (profile_set_cmd->parsed()) {
      CatalogLock lock(cfg.catalog);
      Catalog c = load(cfg.catalog);
      c.profiles.put(cfg.user, profile_object, profile_weight);
      save(c, cfg.catalog);
    }
  } catch (const Error& e) {
    err << "dsq: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace dsq::cli
