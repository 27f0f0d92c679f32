#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "dsq/adapters.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace dsq;
namespace dt = dsq::testing;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::InvariantViolation;
}

class TempFiles : public ::testing::Test {
 protected:
  fs::path dir = dt::temp_dir("adapters");
  ~TempFiles() override { fs::remove_all(dir); }

  SourceDescriptor file(const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    return describe_file(dir / name);
  }
};

SourceDescriptor fixture(const std::string& name) { return describe_file(dt::fixture_dir() / name); }

const Row& row(const ResultSet& rs, std::size_t i) { return rs.rows.at(i); }

}  // namespace

// --- detect_kind ------------------------------------------------------------

TEST(DetectKind, MapsByExtension) {
  EXPECT_EQ(detect_kind("sales.csv"), std::make_pair(Category::Structured, Format::Csv));
  EXPECT_EQ(detect_kind("reviews.txt"), std::make_pair(Category::Unstructured, Format::Txt));
  EXPECT_EQ(detect_kind("a/b.xml"), std::make_pair(Category::Semistructured, Format::Xml));
  EXPECT_EQ(detect_kind("b.json"), std::make_pair(Category::Semistructured, Format::Json));
  EXPECT_EQ(kind_of([] { detect_kind("img.png"); }), ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { detect_kind("noext"); }), ErrorKind::UnsupportedFormat);
}

TEST(SourceDescriptor, CategoryFormatPairs) {
  SourceDescriptor s = describe_file("x.csv");
  EXPECT_TRUE(s.consistent());
  s.format = Format::Txt;
  EXPECT_FALSE(s.consistent());
}

// --- structured -------------------------------------------------------------

TEST(ReadStructured, SalesFixture) {
  const ResultSet rs = read_structured(fixture("sales.csv"));
  ASSERT_EQ(rs.columns, (std::vector<Column>{{"region", ColumnType::Text}, {"amount", ColumnType::Number}}));
  ASSERT_EQ(rs.row_count(), 3u);
  EXPECT_EQ(row(rs, 0), (Row{std::string("east"), 10.0}));
  EXPECT_EQ(row(rs, 2), (Row{std::string("east"), 5.0}));
  EXPECT_EQ(rs.provenance, std::vector<std::string>(3, "sales"));
  EXPECT_TRUE(rs.well_formed());
}

TEST_F(TempFiles, HeaderOnly) {
  const ResultSet rs = read_structured(file("h.csv", "a,b\n"));
  EXPECT_EQ(rs.columns.size(), 2u);
  EXPECT_EQ(rs.row_count(), 0u);
}

TEST_F(TempFiles, RaggedRowReportsLine) {
  try {
    read_structured(file("r.csv", "a,b\n1,2\n1,2,3\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RaggedRow);
    EXPECT_EQ(e.position(), 3u);
  }
}

TEST_F(TempFiles, QuotingAndEmptyCells) {
  const ResultSet rs = read_structured(file("q.csv", "name,qty,note\r\n\"Smith, J\",,\"say \"\"hi\"\"\"\r\nx,2.5,\"two\nlines\"\r\n"));
  ASSERT_EQ(rs.row_count(), 2u);
  EXPECT_EQ(rs.columns[1].type, ColumnType::Number);
  EXPECT_EQ(row(rs, 0), (Row{std::string("Smith, J"), Null{}, std::string("say \"hi\"")}));
  EXPECT_EQ(row(rs, 1), (Row{std::string("x"), 2.5, std::string("two\nlines")}));
}

TEST_F(TempFiles, DelimiterOption) {
  SourceDescriptor src = file("d.csv", "a;b\n1;x\n");
  src.options["delimiter"] = ";";
  const ResultSet rs = read_structured(src);
  EXPECT_EQ(row(rs, 0), (Row{1.0, std::string("x")}));
}

TEST_F(TempFiles, MixedColumnIsText) {
  const ResultSet rs = read_structured(file("m.csv", "v,e\n1,\nabc,\n"));
  EXPECT_EQ(rs.columns[0].type, ColumnType::Text);
  EXPECT_EQ(rs.columns[1].type, ColumnType::Text);
  EXPECT_EQ(row(rs, 0)[0], Value(std::string("1")));
}

TEST_F(TempFiles, MalformedCsv) {
  EXPECT_EQ(kind_of([&] { read_structured(file("e.csv", "")); }), ErrorKind::MalformedDocument);
  EXPECT_EQ(kind_of([&] { read_structured(file("u.csv", "a\n\"open\n")); }), ErrorKind::MalformedDocument);
  EXPECT_EQ(kind_of([&] { read_structured(describe_file(dir / "missing.csv")); }), ErrorKind::IoError);
}

// --- semistructured ---------------------------------------------------------

TEST_F(TempFiles, JsonUnionOfPaths) {
  const ResultSet rs = read_semistructured(file("j.json", R"([{"a":1},{"a":2,"b":"x"}])"));
  EXPECT_EQ(rs.columns, (std::vector<Column>{{"a", ColumnType::Number}, {"b", ColumnType::Text}}));
  EXPECT_EQ(row(rs, 0), (Row{1.0, Null{}}));
  EXPECT_EQ(row(rs, 1), (Row{2.0, std::string("x")}));
}

TEST_F(TempFiles, JsonNestedObjectsFlatten) {
  const ResultSet rs = read_semistructured(file("n.json", R"([{"id":1,"who":{"name":"ann","age":30}}])"));
  std::vector<std::string> names;
  for (const auto& c : rs.columns) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"id", "who/name", "who/age"}));
}

TEST_F(TempFiles, JsonNestedArrayRejected) {
  EXPECT_EQ(kind_of([&] { read_semistructured(file("a.json", R"([{"a":[1,2]}])")); }), ErrorKind::NestedArrayUnsupported);
  EXPECT_EQ(kind_of([&] { read_semistructured(file("b.json", R"({"a":1})")); }), ErrorKind::MalformedDocument);
  EXPECT_EQ(kind_of([&] { read_semistructured(file("c.json", R"([{"a":1)")); }), ErrorKind::MalformedDocument);
}

TEST_F(TempFiles, XmlLeafUnderRecord) {
  const ResultSet rs = read_semistructured(file("x.xml", "<r><i><a>1</a></i></r>"));
  EXPECT_EQ(rs.columns, (std::vector<Column>{{"a", ColumnType::Number}}));
  EXPECT_EQ(row(rs, 0), (Row{1.0}));
}

TEST_F(TempFiles, XmlAttributesAndMissingPaths) {
  const ResultSet rs = read_semistructured(
      file("y.xml", "<?xml version=\"1.0\"?>\n<root>\n  <item id=\"7\"><name>pen</name></item>\n"
                    "  <!-- note -->\n  <item id=\"8\"><name>ink</name><price>2.5</price></item>\n</root>\n"));
  std::vector<std::string> names;
  for (const auto& c : rs.columns) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"@id", "name", "price"}));
  EXPECT_EQ(row(rs, 0), (Row{7.0, std::string("pen"), Null{}}));
  EXPECT_EQ(row(rs, 1), (Row{8.0, std::string("ink"), 2.5}));
}

TEST_F(TempFiles, XmlRepeatedElementRejected) {
  EXPECT_EQ(kind_of([&] { read_semistructured(file("z.xml", "<r><i><a>1</a><a>2</a></i></r>")); }),
            ErrorKind::NestedArrayUnsupported);
  EXPECT_EQ(kind_of([&] { read_semistructured(file("w.xml", "<r><i>")); }), ErrorKind::MalformedDocument);
}

TEST_F(TempFiles, JsonRecordOrderPermutesRows) {
  dt::Rng rng(5);
  std::vector<std::string> recs = {R"({"a":1,"b":"p"})", R"({"c":2.5})", R"({"a":3,"d":{"e":"q"}})", R"({"b":"r"})"};
  const ResultSet base = read_semistructured(file("p0.json", "[" + recs[0] + "," + recs[1] + "," + recs[2] + "," + recs[3] + "]"));
  std::set<std::string> base_cols;
  for (const auto& c : base.columns) base_cols.insert(c.name + ":" + std::string(to_string(c.type)));
  for (int t = 0; t < 10; ++t) {
    std::vector<std::size_t> perm(recs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::string doc = "[";
    for (std::size_t i = 0; i < perm.size(); ++i) doc += (i ? "," : "") + recs[perm[i]];
    const ResultSet rs = read_semistructured(file("p.json", doc + "]"));
    std::set<std::string> cols;
    for (const auto& c : rs.columns) cols.insert(c.name + ":" + std::string(to_string(c.type)));
    EXPECT_EQ(cols, base_cols);
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (const auto& c : base.columns)
        EXPECT_EQ(rs.row_map(i).at(c.name), base.row_map(perm[i]).at(c.name));
  }
}

// --- text -------------------------------------------------------------------

TEST(KeywordSearch, FixtureLine) {
  const ResultSet rs = keyword_search(fixture("reviews.txt"), "east");
  ASSERT_EQ(rs.row_count(), 1u);
  EXPECT_EQ(row(rs, 0), (Row{std::string("reviews.txt"), 2.0, std::string("east region improving")}));
  EXPECT_EQ(rs.columns[1].type, ColumnType::Number);
}

TEST(KeywordSearch, AbsentAndPartialWords) {
  EXPECT_EQ(keyword_search(fixture("reviews.txt"), "south").row_count(), 0u);
  EXPECT_EQ(keyword_search(fixture("reviews.txt"), "eas").row_count(), 0u);
}

TEST(KeywordSearch, CaseInsensitiveInFileOrder) {
  const ResultSet rs = keyword_search(fixture("reviews.txt"), "WEST");
  ASSERT_EQ(rs.row_count(), 2u);
  EXPECT_EQ(row(rs, 0)[1], Value(1.0));
  EXPECT_EQ(row(rs, 1)[1], Value(4.0));
}

TEST(ReadUnstructured, OneRowPerLine) {
  const ResultSet rs = read_unstructured(fixture("reviews.txt"));
  EXPECT_EQ(rs.columns, (std::vector<Column>{{"content", ColumnType::Text}}));
  EXPECT_EQ(rs.row_count(), 4u);
}

TEST(SemanticNet, TwoSentences) {
  const SemanticNet net = build_semantic_net(fixture("bigdata.txt"));
  EXPECT_EQ(net.weight("big", "data"), 1);
  EXPECT_EQ(net.weight("big", "analysis"), 1);
  EXPECT_EQ(net.weight("data", "analysis"), 0);
  EXPECT_EQ(net.edges().size(), 2u);
}

TEST(SemanticNet, EmptyAndSelfEdges) {
  EXPECT_TRUE(build_semantic_net_from_text("").edges().empty());
  const SemanticNet net = build_semantic_net_from_text("data data data.");
  EXPECT_TRUE(net.edges().empty());
  EXPECT_EQ(net.nodes(), std::set<std::string>{"data"});
}

TEST(SemanticNet, FiveSentenceFixture) {
  const SemanticNet net = build_semantic_net(fixture("semantic.txt"));
  EXPECT_EQ(net.weight("data", "quality"), 3);
  EXPECT_EQ(net.weight("trust", "data"), 2);
  EXPECT_EQ(net.weight("big", "wins"), 1);
  EXPECT_EQ(net.weight("big", "data"), 0);
  EXPECT_EQ(net.total_weight(), 16);
  using P = std::pair<std::string, std::int64_t>;
  EXPECT_EQ(net.neighbors("data"),
            (std::vector<P>{{"quality", 3}, {"trust", 2}, {"drives", 1}, {"matters", 1}, {"needs", 1}, {"wins", 1}}));
}

TEST(SemanticNet, SymmetryAndTotalWeight) {
  dt::Rng rng(17);
  static const char* const words[] = {"alpha", "beta", "gamma", "Delta", "eps", "zz", "a", "omega"};
  static const char* const seps[] = {" ", " ", ", ", ". ", "! ", "? "};
  for (int t = 0; t < 200; ++t) {
    std::string text;
    for (std::size_t i = dt::pick(rng, 30); i > 0; --i)
      text += std::string(words[dt::pick(rng, 8)]) + seps[dt::pick(rng, 6)];
    const SemanticNet net = build_semantic_net_from_text(text);
    std::int64_t expected = 0;
    for (const auto& s : sentence_terms(text)) expected += static_cast<std::int64_t>(s.size() * (s.size() - 1) / 2);
    EXPECT_EQ(net.total_weight(), expected) << text;
    for (const auto& a : net.nodes())
      for (const auto& b : net.nodes()) EXPECT_EQ(net.weight(a, b), net.weight(b, a));
    for (const auto& [k, w] : net.edges()) {
      EXPECT_NE(k.first, k.second);
      EXPECT_GE(w, 1);
    }
  }
}

// --- schema inference -------------------------------------------------------

TEST(InferSchema, Csv) {
  const Entity e = infer_schema(fixture("sales.csv"));
  EXPECT_EQ(e.name, "sales");
  ASSERT_EQ(e.attributes.size(), 2u);
  EXPECT_EQ(e.attributes[0].name, "region");
  EXPECT_EQ(e.attributes[0].type, AttributeType::text());
  EXPECT_EQ(e.attributes[1].name, "amount");
  EXPECT_EQ(e.attributes[1].type, AttributeType::number());
}

TEST(InferSchema, Text) {
  const Entity e = infer_schema(fixture("reviews.txt"));
  EXPECT_EQ(e.name, "reviews");
  ASSERT_EQ(e.attributes.size(), 1u);
  EXPECT_EQ(e.attributes[0].name, "content");
  EXPECT_EQ(e.attributes[0].type, AttributeType::text());
}

TEST_F(TempFiles, InferSchemaEmptyCsv) {
  EXPECT_EQ(kind_of([&] { infer_schema(file("empty.csv", "")); }), ErrorKind::MalformedDocument);
}

// --- properties -------------------------------------------------------------

TEST_F(TempFiles, ReadersAreDeterministicAndTypeSound) {
  dt::Rng rng(23);
  static const char* const cells[] = {"", "1", "-2.5", "1e3", "x", "\"a,b\"", "0", "nan", "7"};
  for (int t = 0; t < 50; ++t) {
    const std::size_t cols = 1 + dt::pick(rng, 4);
    std::string text;
    for (std::size_t c = 0; c < cols; ++c) text += (c ? "," : "") + std::string("c") + std::to_string(c);
    text += "\n";
    for (std::size_t r = dt::pick(rng, 8); r > 0; --r) {
      for (std::size_t c = 0; c < cols; ++c) text += (c ? "," : "") + std::string(cells[dt::pick(rng, 9)]);
      text += "\n";
    }
    const SourceDescriptor src = file("p.csv", text);
    const ResultSet a = read_structured(src);
    EXPECT_EQ(a, read_structured(src));
    EXPECT_TRUE(a.well_formed()) << text;
  }
}
