// Discovers every file in a directory, then runs a few queries against the
// resulting dataspace and prints their SQL form where one exists.
//
//   dsq_quickstart [dir]   (default: the bundled sample corpus)

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "dsq/agent.hpp"
#include "dsq/engine.hpp"
#include "dsq/sqlgen.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path(DSQ_SAMPLE_DIR);
  fs::current_path(dir);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator("."))
    if (e.is_regular_file()) files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());

  dsq::Catalog catalog;
  for (const auto& f : files) {
    try {
      catalog = dsq::discover(f, catalog);
      std::cout << "discovered " << f.string() << "\n";
    } catch (const dsq::Error& e) {
      std::cout << "skipped " << f.string() << ": " << e.what() << "\n";
    }
  }

  const std::vector<std::string> queries = {
      "Se(orders.region, orders.amount Agg SUM)",
      "Cons(orders, amount >= 10)",
      "Union(orders.region, orders.region)",
      "Semant(notes.packaging)",
  };
  dsq::ProfileStore profiles;
  for (const auto& q : queries) {
    std::cout << "\n> " << q << "\n";
    try {
      const dsq::QueryAst ast = dsq::parse(q);
      const dsq::ValidatedQuery vq = dsq::validate(ast, catalog);
      std::string sql;
      try {
        sql = dsq::translate(vq).statement;
      } catch (const dsq::Error& e) {
        sql = std::string("n/a (") + e.what() + ")";
      }
      std::cout << "sql: " << sql << "\n";
      std::cout << dsq::render_table(dsq::execute(vq, catalog, profiles));
    } catch (const dsq::Error& e) {
      std::cout << e.what() << "\n";
    }
  }
}
