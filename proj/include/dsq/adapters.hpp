#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "dsq/catalog.hpp"
#include "dsq/error.hpp"
#include "dsq/source.hpp"
#include "dsq/value.hpp"

namespace dsq {

enum class ColumnType { Number, Text };

constexpr std::string_view to_string(ColumnType t) { return t == ColumnType::Number ? "number" : "text"; }

struct Column {
  std::string name;
  ColumnType type = ColumnType::Text;
  friend bool operator==(const Column&, const Column&) = default;
};

using Row = std::vector<Value>;

/// Uniform tabular result shared by every reader and by the engine.
struct ResultSet {
  std::vector<Column> columns;
  std::vector<Row> rows;
  std::vector<std::string> provenance;  // source id, one per row

  std::size_t row_count() const { return rows.size(); }

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }

  void add_row(Row row, std::string source) {
    rows.push_back(std::move(row));
    provenance.push_back(std::move(source));
  }

  /// Row as attribute -> value map, for constraint checks.
  std::map<std::string, Value> row_map(std::size_t r) const {
    std::map<std::string, Value> out;
    for (std::size_t i = 0; i < columns.size(); ++i) out.emplace(columns[i].name, rows[r][i]);
    return out;
  }

  /// Invariant check: row arity and numeric column contents.
  bool well_formed() const {
    if (provenance.size() != rows.size()) return false;
    for (const auto& row : rows) {
      if (row.size() != columns.size()) return false;
      for (std::size_t i = 0; i < row.size(); ++i)
        if (columns[i].type == ColumnType::Number && !is_number(row[i]) && !is_null(row[i])) return false;
    }
    return true;
  }

  friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// RFC 4180 records: quoted fields may contain delimiters, doubled quotes and
/// line breaks; CRLF and LF both end a record; blank lines are skipped.
inline std::vector<CsvRecord> parse_csv(std::string_view text, char delim) {
  std::vector<CsvRecord> out;
  std::size_t i = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < n) {
    if (text[i] == '\n' || (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n')) {
      i += text[i] == '\r' ? 2 : 1;
      ++line;
      continue;
    }
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool done = false;
    while (!done) {
      if (i < n && text[i] == '"') {
        ++i;
        for (;;) {
          if (i >= n) throw Error(ErrorKind::MalformedDocument, "unterminated quote starting on line " + std::to_string(rec.line), rec.line);
          if (text[i] == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field += '"';
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          field += text[i++];
        }
      }
      while (i < n && text[i] != delim && text[i] != '\n' && !(text[i] == '\r' && i + 1 < n && text[i + 1] == '\n')) {
        field += text[i++];
      }
      rec.fields.push_back(std::move(field));
      field.clear();
      if (i < n && text[i] == delim) {
        ++i;
        continue;
      }
      if (i < n) {
        i += text[i] == '\r' ? 2 : 1;
        ++line;
      }
      done = true;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// number iff every non-empty cell parses and at least one cell is non-empty.
inline ColumnType infer_column_type(const std::vector<std::vector<std::string>>& cells, std::size_t col) {
  bool any = false;
  for (const auto& row : cells) {
    if (row[col].empty()) continue;
    any = true;
    if (!parse_number(row[col])) return ColumnType::Text;
  }
  return any ? ColumnType::Number : ColumnType::Text;
}

inline Value typed_cell(const std::string& cell, ColumnType type) {
  if (cell.empty()) return Null{};
  if (type == ColumnType::Number) return *parse_number(cell);
  return cell;
}

inline char delimiter_of(const SourceDescriptor& src) {
  auto it = src.options.find("delimiter");
  if (it == src.options.end() || it->second.empty()) return ',';
  if (it->second == "\\t" || it->second == "tab") return '\t';
  return it->second.front();
}

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace detail

inline ResultSet read_structured(const SourceDescriptor& src) {
  if (src.format != Format::Csv)
    throw Error(ErrorKind::UnsupportedFormat, "structured reader expects csv, got " + std::string(to_string(src.format)));
  const std::string text = read_file(src.location);
  auto records = detail::parse_csv(text, detail::delimiter_of(src));
  if (records.empty()) throw Error(ErrorKind::MalformedDocument, src.location + ": missing header row");
  const auto& header = records.front().fields;
  std::vector<std::vector<std::string>> cells;
  cells.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != header.size())
      throw Error(ErrorKind::RaggedRow,
                  src.location + " line " + std::to_string(records[r].line) + ": expected " +
                      std::to_string(header.size()) + " cells, found " + std::to_string(records[r].fields.size()),
                  records[r].line);
    cells.push_back(std::move(records[r].fields));
  }
  ResultSet rs;
  for (std::size_t c = 0; c < header.size(); ++c)
    rs.columns.push_back({header[c], detail::infer_column_type(cells, c)});
  for (const auto& row : cells) {
    Row out;
    out.reserve(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out.push_back(detail::typed_cell(row[c], rs.columns[c].type));
    rs.add_row(std::move(out), src.id);
  }
  return rs;
}

// ---------------------------------------------------------------------------
// JSON / XML

namespace detail {

/// Accumulates flattened records: leaf path -> raw cell.
class Flattener {
 public:
  struct Cell {
    Value value;
    bool json_number = false;
  };
  using Record = std::map<std::string, Cell>;

  void begin_record() { records_.emplace_back(); }

  void leaf(const std::string& path, Cell cell) {
    if (!seen_.count(path)) {
      seen_.insert(path);
      order_.push_back(path);
    }
    auto [it, inserted] = records_.back().emplace(path, std::move(cell));
    if (!inserted) throw Error(ErrorKind::NestedArrayUnsupported, "repeated element '" + path + "' in one record");
  }

  /// `numeric_text`: text cells that parse as numbers count as numbers (XML).
  ResultSet finish(const std::string& source, bool numeric_text) const {
    ResultSet rs;
    for (const auto& path : order_) {
      bool any = false;
      bool number = true;
      for (const auto& rec : records_) {
        auto it = rec.find(path);
        if (it == rec.end() || is_null(it->second.value)) continue;
        any = true;
        const auto& v = it->second.value;
        const bool num = it->second.json_number || (numeric_text && is_text(v) && parse_number(std::get<std::string>(v)));
        if (!num) number = false;
      }
      rs.columns.push_back({path, any && number ? ColumnType::Number : ColumnType::Text});
    }
    for (const auto& rec : records_) {
      Row row;
      for (const auto& col : rs.columns) {
        auto it = rec.find(col.name);
        if (it == rec.end() || is_null(it->second.value)) {
          row.push_back(Null{});
        } else if (col.type == ColumnType::Number) {
          const auto& v = it->second.value;
          row.push_back(is_number(v) ? v : Value(*parse_number(std::get<std::string>(v))));
        } else {
          row.push_back(Value(render(it->second.value)));
        }
      }
      rs.add_row(std::move(row), source);
    }
    return rs;
  }

 private:
  std::vector<Record> records_;
  std::vector<std::string> order_;
  std::set<std::string> seen_;
};

inline std::string join_path(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "/" + name;
}

inline void flatten_json(const nlohmann::ordered_json& node, const std::string& path, Flattener& out) {
  using Cell = Flattener::Cell;
  if (node.is_array()) throw Error(ErrorKind::NestedArrayUnsupported, "array at '" + path + "'");
  if (node.is_object()) {
    for (const auto& [key, child] : node.items()) flatten_json(child, join_path(path, key), out);
    return;
  }
  if (node.is_null()) out.leaf(path, Cell{Null{}, false});
  else if (node.is_number()) out.leaf(path, Cell{node.get<double>(), true});
  else if (node.is_boolean()) out.leaf(path, Cell{std::string(node.get<bool>() ? "true" : "false"), false});
  else out.leaf(path, Cell{node.get<std::string>(), false});
}

inline bool is_xml_meta(const std::string& key) { return key == "<xmlattr>" || key == "<xmlcomment>"; }

inline void flatten_xml(const boost::property_tree::ptree& node, const std::string& path, Flattener& out) {
  using Cell = Flattener::Cell;
  bool has_children = false;
  for (const auto& [key, child] : node) {
    if (key == "<xmlattr>") {
      for (const auto& [attr, value] : child) {
        const std::string v = value.data();
        out.leaf(join_path(path, "@" + attr), Cell{v.empty() ? Value(Null{}) : Value(v), false});
      }
    } else if (!is_xml_meta(key)) {
      has_children = true;
    }
  }
  if (!has_children) {
    const std::string v = node.data();
    out.leaf(path, Cell{v.empty() ? Value(Null{}) : Value(v), false});
    return;
  }
  for (const auto& [key, child] : node)
    if (!is_xml_meta(key)) flatten_xml(child, join_path(path, key), out);
}

}  // namespace detail

/// Each top-level record becomes a row whose columns are slash-joined leaf
/// paths. JSON: elements of the top-level array. XML: children of the root.
inline ResultSet read_semistructured(const SourceDescriptor& src) {
  const std::string text = read_file(src.location);
  detail::Flattener flat;
  if (src.format == Format::Json) {
    nlohmann::ordered_json doc;
    try {
      doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::MalformedDocument, src.location + ": " + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorKind::MalformedDocument, src.location + ": top level must be an array of records");
    for (const auto& rec : doc) {
      if (!rec.is_object()) {
        if (rec.is_array()) throw Error(ErrorKind::NestedArrayUnsupported, src.location + ": nested array record");
        throw Error(ErrorKind::MalformedDocument, src.location + ": records must be objects");
      }
      flat.begin_record();
      detail::flatten_json(rec, "", flat);
    }
    return flat.finish(src.id, false);
  }
  if (src.format == Format::Xml) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
      boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::trim_whitespace);
    } catch (const boost::property_tree::xml_parser_error& e) {
      throw Error(ErrorKind::MalformedDocument, src.location + ": " + e.what());
    }
    const boost::property_tree::ptree* root = nullptr;
    for (const auto& [key, child] : tree) {
      if (detail::is_xml_meta(key)) continue;
      if (root) throw Error(ErrorKind::MalformedDocument, src.location + ": multiple root elements");
      root = &child;
    }
    if (!root) throw Error(ErrorKind::MalformedDocument, src.location + ": no root element");
    for (const auto& [key, rec] : *root) {
      if (detail::is_xml_meta(key)) continue;
      flat.begin_record();
      bool leaf_record = true;
      for (const auto& [k, _] : rec)
        if (!detail::is_xml_meta(k)) leaf_record = false;
      detail::flatten_xml(rec, leaf_record ? key : "", flat);
    }
    return flat.finish(src.id, true);
  }
  throw Error(ErrorKind::UnsupportedFormat,
              "semi-structured reader expects xml or json, got " + std::string(to_string(src.format)));
}

// ---------------------------------------------------------------------------
// Text

namespace detail {

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(std::move(cur));
  }
  return lines;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || u >= 0x80;
}

}  // namespace detail

/// Unstructured text as a single `content` column, one row per non-blank line.
inline ResultSet read_unstructured(const SourceDescriptor& src) {
  const std::string text = read_file(src.location);
  ResultSet rs;
  rs.columns.push_back({"content", ColumnType::Text});
  for (const auto& line : detail::split_lines(text)) {
    auto t = detail::trim(line);
    if (!t.empty()) rs.add_row({Value(t)}, src.id);
  }
  return rs;
}

/// Lines containing `keyword` as a whole word, case-insensitively.
inline ResultSet keyword_search(const SourceDescriptor& src, std::string_view keyword) {
  const std::string text = read_file(src.location);
  const std::string needle = detail::lower_ascii(keyword);
  const std::string file = std::filesystem::path(src.location).filename().string();
  ResultSet rs;
  rs.columns = {{"file", ColumnType::Text}, {"line", ColumnType::Number}, {"snippet", ColumnType::Text}};
  if (needle.empty()) return rs;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string hay = detail::lower_ascii(lines[i]);
    bool hit = false;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos && !hit; pos = hay.find(needle, pos + 1)) {
      const bool left = pos == 0 || !detail::is_word_byte(hay[pos - 1]);
      const std::size_t end = pos + needle.size();
      const bool right = end == hay.size() || !detail::is_word_byte(hay[end]);
      hit = left && right;
    }
    if (hit) rs.add_row({Value(file), Value(static_cast<double>(i + 1)), Value(detail::trim(lines[i]))}, src.id);
  }
  return rs;
}

/// Undirected weighted co-occurrence graph over lowercased terms.
class SemanticNet {
 public:
  void add_node(const std::string& term) { nodes_.insert(term); }

  void add_edge(const std::string& a, const std::string& b, std::int64_t w = 1) {
    if (a == b) return;
    add_node(a);
    add_node(b);
    edges_[ordered(a, b)] += w;
  }

  std::int64_t weight(const std::string& a, const std::string& b) const {
    auto it = edges_.find(ordered(a, b));
    return it == edges_.end() ? 0 : it->second;
  }

  /// Neighbours of `term`, heaviest first, ties by term.
  std::vector<std::pair<std::string, std::int64_t>> neighbors(const std::string& term) const {
    std::vector<std::pair<std::string, std::int64_t>> out;
    for (const auto& [key, w] : edges_) {
      if (key.first == term) out.emplace_back(key.second, w);
      else if (key.second == term) out.emplace_back(key.first, w);
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
      return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    return out;
  }

  const std::set<std::string>& nodes() const { return nodes_; }
  const std::map<std::pair<std::string, std::string>, std::int64_t>& edges() const { return edges_; }

  std::int64_t total_weight() const {
    std::int64_t sum = 0;
    for (const auto& [_, w] : edges_) sum += w;
    return sum;
  }

  friend bool operator==(const SemanticNet&, const SemanticNet&) = default;

 private:
  static std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  std::set<std::string> nodes_;
  std::map<std::pair<std::string, std::string>, std::int64_t> edges_;
};

/// Distinct qualifying words (length >= 3, lowercased) of each sentence.
/// Sentences end at '.', '!' or '?'.
inline std::vector<std::vector<std::string>> sentence_terms(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> sentence;
  std::string word;
  auto flush_word = [&]() {
    if (word.size() >= 3 && std::find(sentence.begin(), sentence.end(), word) == sentence.end())
      sentence.push_back(word);
    word.clear();
  };
  auto flush_sentence = [&]() {
    flush_word();
    if (!sentence.empty()) out.push_back(std::move(sentence));
    sentence.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') flush_sentence();
    else if (detail::is_word_byte(c) && c != '_') word += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    else flush_word();
  }
  flush_sentence();
  return out;
}

inline SemanticNet build_semantic_net_from_text(std::string_view text) {
  SemanticNet net;
  for (const auto& terms : sentence_terms(text)) {
    for (const auto& t : terms) net.add_node(t);
    for (std::size_t i = 0; i < terms.size(); ++i)
      for (std::size_t j = i + 1; j < terms.size(); ++j) net.add_edge(terms[i], terms[j]);
  }
  return net;
}

inline SemanticNet build_semantic_net(const SourceDescriptor& src) {
  if (src.format != Format::Txt)
    throw Error(ErrorKind::UnsupportedFormat, "semantic net needs a txt source, got " + std::string(to_string(src.format)));
  return build_semantic_net_from_text(read_file(src.location));
}

// ---------------------------------------------------------------------------
// Dispatch and schema inference

/// Reads any source into a ResultSet according to its category.
inline ResultSet read_source(const SourceDescriptor& src) {
  switch (src.category) {
    case Category::Structured: return read_structured(src);
    case Category::Semistructured: return read_semistructured(src);
    case Category::Unstructured: return read_unstructured(src);
  }
  throw Error(ErrorKind::UnsupportedFormat, "unknown category");
}

/// Entity named after the file stem; attributes in column order.
inline Entity infer_schema(const SourceDescriptor& src) {
  Entity e;
  e.name = std::filesystem::path(src.location).stem().string();
  e.entity_type = std::string(to_string(src.category));
  e.draw_type = std::string(to_string(src.format));
  if (src.category == Category::Unstructured) {
    read_file(src.location);
    e.attributes.push_back({"content", "", AttributeType::text(), std::nullopt});
    return e;
  }
  const ResultSet rs = read_source(src);
  for (const auto& col : rs.columns)
    e.attributes.push_back({col.name, "",
                            col.type == ColumnType::Number ? AttributeType::number() : AttributeType::text(),
                            std::nullopt});
  return e;
}

}  // namespace dsq
