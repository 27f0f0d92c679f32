#pragma once

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dsq/error.hpp"
#include "dsq/value.hpp"

namespace dsq {

// ---------------------------------------------------------------------------
// Tokens

enum class TokenKind {
  Keyword,
  Identifier,
  Number,
  AggKind,
  Comparator,
  ArithOp,
  LParen,
  RParen,
  Comma,
  Dot,
};

constexpr std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "operator keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::AggKind: return "aggregate kind";
    case TokenKind::Comparator: return "comparator";
    case TokenKind::ArithOp: return "arithmetic operator";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::Comma: return "','";
    case TokenKind::Dot: return "'.'";
  }
  return "token";
}

/// Half-open byte range [begin, end) into the query text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  TokenKind kind;
  std::string text;
  Span span;
  friend bool operator==(const Token&, const Token&) = default;
};

inline constexpr std::array<std::string_view, 13> kOperatorKeywords = {
    "where", "who", "how", "Se", "what", "which", "Semant",
    "Cons", "profile", "Union", "Inters", "Differ", "Agg"};

inline constexpr std::array<std::string_view, 3> kAggKinds = {"SUM", "COUNT", "AVG"};

inline bool is_operator_keyword(std::string_view word) {
  for (auto kw : kOperatorKeywords)
    if (kw == word) return true;
  return false;
}

inline bool is_agg_word(std::string_view word) {
  for (auto kw : kAggKinds)
    if (kw == word) return true;
  return false;
}

namespace detail {
constexpr bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
constexpr bool is_digit(char c) { return c >= '0' && c <= '9'; }
constexpr bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
}  // namespace detail

/// letter {letter | digit | _}, and not a reserved word.
inline bool is_identifier(std::string_view text) {
  if (text.empty() || !detail::is_letter(text.front())) return false;
  for (char c : text)
    if (!detail::is_letter(c) && !detail::is_digit(c) && c != '_') return false;
  return !is_operator_keyword(text) && !is_agg_word(text);
}

/// Maximal-munch lexer. Keywords are case-sensitive.
inline std::vector<Token> tokenize(std::string_view text) {
  using namespace detail;
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](TokenKind kind, std::size_t begin, std::size_t end) {
    out.push_back(Token{kind, std::string(text.substr(begin, end - begin)), Span{begin, end}});
  };
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_letter(c)) {
      while (i < n && (is_letter(text[i]) || is_digit(text[i]) || text[i] == '_')) ++i;
      const auto word = text.substr(start, i - start);
      TokenKind kind = TokenKind::Identifier;
      if (is_operator_keyword(word)) kind = TokenKind::Keyword;
      else if (is_agg_word(word)) kind = TokenKind::AggKind;
      push(kind, start, i);
      continue;
    }
    if (is_digit(c)) {
      while (i < n && is_digit(text[i])) ++i;
      push(TokenKind::Number, start, i);
      continue;
    }
    switch (c) {
      case '(': push(TokenKind::LParen, i, i + 1); ++i; continue;
      case ')': push(TokenKind::RParen, i, i + 1); ++i; continue;
      case ',': push(TokenKind::Comma, i, i + 1); ++i; continue;
      case '.': push(TokenKind::Dot, i, i + 1); ++i; continue;
      case '+':
      case '-':
      case '*':
      case '/': push(TokenKind::ArithOp, i, i + 1); ++i; continue;
      case '=': push(TokenKind::Comparator, i, i + 1); ++i; continue;
      case '<':
        if (i + 1 < n && (text[i + 1] == '=' || text[i + 1] == '>')) {
          push(TokenKind::Comparator, i, i + 2);
          i += 2;
        } else {
          push(TokenKind::Comparator, i, i + 1);
          ++i;
        }
        continue;
      case '>':
        if (i + 1 < n && text[i + 1] == '=') {
          push(TokenKind::Comparator, i, i + 2);
          i += 2;
        } else {
          push(TokenKind::Comparator, i, i + 1);
          ++i;
        }
        continue;
      default:
        throw Error(ErrorKind::LexError,
                    "unexpected character at offset " + std::to_string(i), i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// AST

/// Owning pointer with value semantics, for recursive AST nodes.
template <typename T>
class Box {
 public:
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  const T& operator*() const { return *ptr_; }
  const T* operator->() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a == *b; }

 private:
  std::unique_ptr<T> ptr_;
};

enum class AggKind { Sum, Count, Avg };

constexpr std::string_view to_string(AggKind kind) {
  switch (kind) {
    case AggKind::Sum: return "SUM";
    case AggKind::Count: return "COUNT";
    case AggKind::Avg: return "AVG";
  }
  return "SUM";
}

inline std::optional<AggKind> parse_agg_kind(std::string_view text) {
  if (text == "SUM") return AggKind::Sum;
  if (text == "COUNT") return AggKind::Count;
  if (text == "AVG") return AggKind::Avg;
  return std::nullopt;
}

struct ObjectItem {
  std::string object;
  std::optional<std::string> par;
  std::optional<AggKind> agg;
  friend bool operator==(const ObjectItem&, const ObjectItem&) = default;
};

enum class ArithOp { Add, Sub, Mul, Div };

constexpr char to_char(ArithOp op) {
  switch (op) {
    case ArithOp::Add: return '+';
    case ArithOp::Sub: return '-';
    case ArithOp::Mul: return '*';
    case ArithOp::Div: return '/';
  }
  return '+';
}

constexpr int precedence(ArithOp op) {
  return (op == ArithOp::Mul || op == ArithOp::Div) ? 2 : 1;
}

struct Expr {
  struct Number {
    std::string digits;
    friend bool operator==(const Number&, const Number&) = default;
  };
  struct Param {
    std::string name;
    friend bool operator==(const Param&, const Param&) = default;
  };
  struct Paren {
    Box<Expr> inner;
    friend bool operator==(const Paren&, const Paren&) = default;
  };
  struct Binary {
    ArithOp op;
    Box<Expr> lhs;
    Box<Expr> rhs;
    friend bool operator==(const Binary&, const Binary&) = default;
  };

  std::variant<Number, Param, Paren, Binary> node;

  static Expr number(std::string digits) { return Expr{Number{std::move(digits)}}; }
  static Expr param(std::string name) { return Expr{Param{std::move(name)}}; }
  static Expr paren(Expr inner) { return Expr{Paren{Box<Expr>(std::move(inner))}}; }
  static Expr binary(ArithOp op, Expr lhs, Expr rhs) {
    return Expr{Binary{op, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))}};
  }

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Predicate {
  std::string attribute;
  Comparator comparator = Comparator::Eq;
  Expr rhs;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct SelectQuery {
  std::vector<ObjectItem> items;
  friend bool operator==(const SelectQuery&, const SelectQuery&) = default;
};

enum class QuestionKind { Who, Where, What, Which, How };

constexpr std::string_view to_string(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::Who: return "who";
    case QuestionKind::Where: return "where";
    case QuestionKind::What: return "what";
    case QuestionKind::Which: return "which";
    case QuestionKind::How: return "how";
  }
  return "who";
}

struct QuestionQuery {
  QuestionKind kind = QuestionKind::Who;
  std::vector<ObjectItem> items;
  friend bool operator==(const QuestionQuery&, const QuestionQuery&) = default;
};

struct ConsQuery {
  std::string object;
  std::vector<Predicate> predicates;
  friend bool operator==(const ConsQuery&, const ConsQuery&) = default;
};

struct SemantQuery {
  std::string object;
  std::string term;
  friend bool operator==(const SemantQuery&, const SemantQuery&) = default;
};

struct ProfileEntry {
  std::string object;
  std::int64_t weight = 1;
  friend bool operator==(const ProfileEntry&, const ProfileEntry&) = default;
};

struct ProfileQuery {
  std::vector<ProfileEntry> entries;
  friend bool operator==(const ProfileQuery&, const ProfileQuery&) = default;
};

enum class SetOpKind { Union, Inters, Differ };

constexpr std::string_view to_string(SetOpKind kind) {
  switch (kind) {
    case SetOpKind::Union: return "Union";
    case SetOpKind::Inters: return "Inters";
    case SetOpKind::Differ: return "Differ";
  }
  return "Union";
}

struct SetOpQuery {
  SetOpKind kind = SetOpKind::Union;
  std::vector<ObjectItem> items;
  friend bool operator==(const SetOpQuery&, const SetOpQuery&) = default;
};

using QueryAst =
    std::variant<SelectQuery, QuestionQuery, ConsQuery, SemantQuery, ProfileQuery, SetOpQuery>;

/// Leading keyword of the query, e.g. "Se", "who", "Union".
inline std::string operator_name(const QueryAst& q) {
  struct V {
    std::string operator()(const SelectQuery&) const { return "Se"; }
    std::string operator()(const QuestionQuery& x) const { return std::string(to_string(x.kind)); }
    std::string operator()(const ConsQuery&) const { return "Cons"; }
    std::string operator()(const SemantQuery&) const { return "Semant"; }
    std::string operator()(const ProfileQuery&) const { return "profile"; }
    std::string operator()(const SetOpQuery& x) const { return std::string(to_string(x.kind)); }
  };
  return std::visit(V{}, q);
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class Parser {
 public:
  Parser(std::string_view text) : text_(text), tokens_(tokenize(text)) {}

  QueryAst parse_query() {
    const Token& head = peek_or_fail("operator keyword");
    if (head.kind != TokenKind::Keyword || head.text == "Agg")
      fail("operator keyword", head);
    ++pos_;
    const std::string op = head.text;
    QueryAst result = dispatch(op);
    if (pos_ < tokens_.size()) fail("end of input", tokens_[pos_]);
    return result;
  }

 private:
  QueryAst dispatch(const std::string& op) {
    expect(TokenKind::LParen);
    if (at(TokenKind::RParen))
      throw Error(ErrorKind::EmptyArgList, op + "() requires at least one argument",
                  tokens_[pos_].span.begin);
    if (op == "Se") {
      SelectQuery q{item_list(true)};
      expect(TokenKind::RParen);
      return q;
    }
    if (op == "who" || op == "where" || op == "what" || op == "which" || op == "how") {
      QuestionQuery q;
      q.kind = op == "who"     ? QuestionKind::Who
               : op == "where" ? QuestionKind::Where
               : op == "what"  ? QuestionKind::What
               : op == "which" ? QuestionKind::Which
                               : QuestionKind::How;
      const std::size_t open = tokens_[pos_].span.begin;
      q.items = item_list(false);
      if ((q.kind == QuestionKind::What || q.kind == QuestionKind::Which) && q.items.size() > 2)
        throw Error(ErrorKind::ParseError, op + " accepts at most two items", open);
      expect(TokenKind::RParen);
      return q;
    }
    if (op == "Cons") {
      ConsQuery q;
      q.object = identifier();
      while (accept(TokenKind::Comma)) q.predicates.push_back(predicate());
      expect(TokenKind::RParen);
      return q;
    }
    if (op == "Semant") {
      SemantQuery q;
      q.object = identifier();
      expect(TokenKind::Dot);
      q.term = identifier();
      expect(TokenKind::RParen);
      return q;
    }
    if (op == "profile") {
      ProfileQuery q;
      do {
        ProfileEntry entry;
        entry.object = identifier();
        if (accept(TokenKind::Dot)) entry.weight = weight();
        q.entries.push_back(std::move(entry));
      } while (accept(TokenKind::Comma));
      expect(TokenKind::RParen);
      return q;
    }
    // Union / Inters / Differ
    SetOpQuery q;
    q.kind = op == "Union" ? SetOpKind::Union : op == "Inters" ? SetOpKind::Inters : SetOpKind::Differ;
    const std::size_t open = tokens_[pos_].span.begin;
    q.items = item_list(false);
    if (q.kind == SetOpKind::Differ && q.items.size() != 2)
      throw Error(ErrorKind::ParseError, "Differ requires exactly two items", open);
    if (q.kind != SetOpKind::Differ && q.items.size() < 2)
      throw Error(ErrorKind::ParseError, op + " requires at least two items", open);
    expect(TokenKind::RParen);
    return q;
  }

  std::vector<ObjectItem> item_list(bool allow_agg) {
    std::vector<ObjectItem> items;
    do {
      ObjectItem item;
      item.object = identifier();
      if (accept(TokenKind::Dot)) item.par = identifier();
      if (allow_agg && at_keyword("Agg")) {
        ++pos_;
        const Token& t = peek_or_fail("aggregate kind");
        if (t.kind != TokenKind::AggKind) fail("aggregate kind", t);
        item.agg = parse_agg_kind(t.text);
        ++pos_;
      }
      items.push_back(std::move(item));
    } while (accept(TokenKind::Comma));
    return items;
  }

  Predicate predicate() {
    Predicate p;
    p.attribute = identifier();
    const Token& t = peek_or_fail("comparator");
    if (t.kind != TokenKind::Comparator) fail("comparator", t);
    p.comparator = *parse_comparator(t.text);
    ++pos_;
    p.rhs = expr();
    return p;
  }

  Expr expr() {
    Expr lhs = term();
    while (at_arith('+') || at_arith('-')) {
      const ArithOp op = tokens_[pos_++].text == "+" ? ArithOp::Add : ArithOp::Sub;
      lhs = Expr::binary(op, std::move(lhs), term());
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = operand();
    while (at_arith('*') || at_arith('/')) {
      const ArithOp op = tokens_[pos_++].text == "*" ? ArithOp::Mul : ArithOp::Div;
      lhs = Expr::binary(op, std::move(lhs), operand());
    }
    return lhs;
  }

  Expr operand() {
    const Token& t = peek_or_fail("operand");
    if (t.kind == TokenKind::LParen) {
      ++pos_;
      Expr inner = expr();
      expect(TokenKind::RParen);
      return Expr::paren(std::move(inner));
    }
    if (t.kind == TokenKind::Number) {
      ++pos_;
      return Expr::number(t.text);
    }
    if (t.kind == TokenKind::Identifier) {
      ++pos_;
      return Expr::param(t.text);
    }
    fail("operand", t);
  }

  std::int64_t weight() {
    const Token& t = peek_or_fail("number");
    if (t.kind != TokenKind::Number) fail("number", t);
    ++pos_;
    std::int64_t value = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
    if (res.ec != std::errc{})
      throw Error(ErrorKind::ParseError, "weight out of range: " + t.text, t.span.begin);
    return value;
  }

  std::string identifier() {
    const Token& t = peek_or_fail("identifier");
    if (t.kind != TokenKind::Identifier) fail("identifier", t);
    ++pos_;
    return t.text;
  }

  bool at(TokenKind kind) const { return pos_ < tokens_.size() && tokens_[pos_].kind == kind; }
  bool at_keyword(std::string_view kw) const {
    return at(TokenKind::Keyword) && tokens_[pos_].text == kw;
  }
  bool at_arith(char c) const {
    return at(TokenKind::ArithOp) && tokens_[pos_].text.size() == 1 && tokens_[pos_].text[0] == c;
  }
  bool accept(TokenKind kind) {
    if (!at(kind)) return false;
    ++pos_;
    return true;
  }
  void expect(TokenKind kind) {
    const Token& t = peek_or_fail(to_string(kind));
    if (t.kind != kind) fail(to_string(kind), t);
    ++pos_;
  }

  const Token& peek_or_fail(std::string_view expected) const {
    if (pos_ >= tokens_.size())
      throw Error(ErrorKind::ParseError,
                  "expected " + std::string(expected) + ", found end of input at offset " +
                      std::to_string(text_.size()),
                  text_.size());
    return tokens_[pos_];
  }

  [[noreturn]] void fail(std::string_view expected, const Token& found) const {
    throw Error(ErrorKind::ParseError,
                "expected " + std::string(expected) + ", found '" + found.text + "' at offset " +
                    std::to_string(found.span.begin),
                found.span.begin);
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline QueryAst parse(std::string_view text) { return detail::Parser(text).parse_query(); }

// ---------------------------------------------------------------------------
// Canonical printer

inline std::string print_expr(const Expr& e) {
  struct V {
    std::string operator()(const Expr::Number& n) const { return n.digits; }
    std::string operator()(const Expr::Param& p) const { return p.name; }
    std::string operator()(const Expr::Paren& p) const { return "(" + print_expr(*p.inner) + ")"; }
    std::string operator()(const Expr::Binary& b) const {
      return print_expr(*b.lhs) + to_char(b.op) + print_expr(*b.rhs);
    }
  };
  return std::visit(V{}, e.node);
}

namespace detail {

inline std::string print_item(const ObjectItem& item) {
  std::string out = item.object;
  if (item.par) out += "." + *item.par;
  if (item.agg) out += " Agg " + std::string(to_string(*item.agg));
  return out;
}

inline std::string print_items(const std::vector<ObjectItem>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += print_item(items[i]);
  }
  return out;
}

}  // namespace detail

inline std::string print_predicate(const Predicate& p) {
  return p.attribute + " " + std::string(to_string(p.comparator)) + " " + print_expr(p.rhs);
}

/// Canonical form: one space after each comma and around comparators and
/// `Agg`, nothing else.
inline std::string pretty_print(const QueryAst& q) {
  struct V {
    std::string operator()(const SelectQuery& x) const {
      return "Se(" + detail::print_items(x.items) + ")";
    }
    std::string operator()(const QuestionQuery& x) const {
      return std::string(to_string(x.kind)) + "(" + detail::print_items(x.items) + ")";
    }
    std::string operator()(const ConsQuery& x) const {
      std::string out = "Cons(" + x.object;
      for (const auto& p : x.predicates) out += ", " + print_predicate(p);
      return out + ")";
    }
    std::string operator()(const SemantQuery& x) const {
      return "Semant(" + x.object + "." + x.term + ")";
    }
    std::string operator()(const ProfileQuery& x) const {
      std::string out = "profile(";
      for (std::size_t i = 0; i < x.entries.size(); ++i) {
        if (i) out += ", ";
        out += x.entries[i].object + "." + std::to_string(x.entries[i].weight);
      }
      return out + ")";
    }
    std::string operator()(const SetOpQuery& x) const {
      return std::string(to_string(x.kind)) + "(" + detail::print_items(x.items) + ")";
    }
  };
  return std::visit(V{}, q);
}

// ---------------------------------------------------------------------------
// Structural checks

namespace detail {

inline bool expr_well_formed(const Expr& e) {
  if (auto n = std::get_if<Expr::Number>(&e.node)) {
    if (n->digits.empty()) return false;
    for (char c : n->digits)
      if (!is_digit(c)) return false;
    return true;
  }
  if (auto p = std::get_if<Expr::Param>(&e.node)) return is_identifier(p->name);
  if (auto p = std::get_if<Expr::Paren>(&e.node)) return expr_well_formed(*p->inner);
  const auto& b = std::get<Expr::Binary>(e.node);
  // A child that binds looser than its parent (or equally, on the right) must
  // be parenthesised, otherwise the printed text would reparse differently.
  auto binary_prec = [](const Expr& child) -> int {
    if (auto cb = std::get_if<Expr::Binary>(&child.node)) return precedence(cb->op);
    return 3;
  };
  if (binary_prec(*b.lhs) < precedence(b.op)) return false;
  if (binary_prec(*b.rhs) <= precedence(b.op)) return false;
  return expr_well_formed(*b.lhs) && expr_well_formed(*b.rhs);
}

inline bool items_well_formed(const std::vector<ObjectItem>& items, bool allow_agg) {
  if (items.empty()) return false;
  for (const auto& item : items) {
    if (!is_identifier(item.object)) return false;
    if (item.par && !is_identifier(*item.par)) return false;
    if (item.agg && !allow_agg) return false;
  }
  return true;
}

}  // namespace detail

/// True when `q` satisfies every AST invariant, i.e. it is something `parse`
/// could have produced.
inline bool well_formed(const QueryAst& q) {
  struct V {
    bool operator()(const SelectQuery& x) const { return detail::items_well_formed(x.items, true); }
    bool operator()(const QuestionQuery& x) const {
      if (!detail::items_well_formed(x.items, false)) return false;
      const bool pair_only = x.kind == QuestionKind::What || x.kind == QuestionKind::Which;
      return !pair_only || x.items.size() <= 2;
    }
    bool operator()(const ConsQuery& x) const {
      if (!is_identifier(x.object)) return false;
      for (const auto& p : x.predicates)
        if (!is_identifier(p.attribute) || !detail::expr_well_formed(p.rhs)) return false;
      return true;
    }
    bool operator()(const SemantQuery& x) const {
      return is_identifier(x.object) && is_identifier(x.term);
    }
    bool operator()(const ProfileQuery& x) const {
      if (x.entries.empty()) return false;
      for (const auto& e : x.entries)
        if (!is_identifier(e.object) || e.weight < 0) return false;
      return true;
    }
    bool operator()(const SetOpQuery& x) const {
      if (!detail::items_well_formed(x.items, false)) return false;
      return x.kind == SetOpKind::Differ ? x.items.size() == 2 : x.items.size() >= 2;
    }
  };
  return std::visit(V{}, q);
}

}  // namespace dsq
