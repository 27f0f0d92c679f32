#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

namespace dsq {

struct Null {
  friend bool operator==(Null, Null) = default;
};

/// A cell value: null, a decimal number, or text.
using Value = std::variant<Null, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<Null>(v); }
inline bool is_number(const Value& v) { return std::holds_alternative<double>(v); }
inline bool is_text(const Value& v) { return std::holds_alternative<std::string>(v); }

/// Integral values print without a fractional part; everything else uses the
/// shortest representation that round-trips.
inline std::string format_number(double d) {
  if (d == 0.0) return "0";
  if (std::isfinite(d) && std::trunc(d) == d && std::fabs(d) < 1e15) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(d));
    return std::string(buf, res.ptr);
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

/// Full-match decimal parse; rejects empty input, surrounding whitespace and
/// non-finite spellings such as "inf" or "nan".
inline std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const char first = text.front();
  if (!(first == '-' || first == '.' || (first >= '0' && first <= '9'))) return std::nullopt;
  double out = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(out)) return std::nullopt;
  return out;
}

inline std::string render(const Value& v) {
  if (is_null(v)) return {};
  if (is_number(v)) return format_number(std::get<double>(v));
  return std::get<std::string>(v);
}

/// Natural total order used for deterministic output: null < number < text.
inline std::strong_ordering natural_compare(const Value& a, const Value& b) {
  if (a.index() != b.index()) return a.index() <=> b.index();
  if (is_number(a)) {
    const double x = std::get<double>(a);
    const double y = std::get<double>(b);
    if (x < y) return std::strong_ordering::less;
    if (x > y) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }
  if (is_text(a)) return std::get<std::string>(a).compare(std::get<std::string>(b)) <=> 0;
  return std::strong_ordering::equal;
}

enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };

constexpr std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::Eq: return "=";
    case Comparator::Ne: return "<>";
    case Comparator::Lt: return "<";
    case Comparator::Le: return "<=";
    case Comparator::Gt: return ">";
    case Comparator::Ge: return ">=";
  }
  return "=";
}

inline std::optional<Comparator> parse_comparator(std::string_view text) {
  if (text == "=") return Comparator::Eq;
  if (text == "<>") return Comparator::Ne;
  if (text == "<") return Comparator::Lt;
  if (text == "<=") return Comparator::Le;
  if (text == ">") return Comparator::Gt;
  if (text == ">=") return Comparator::Ge;
  return std::nullopt;
}

/// `lhs sign rhs`. Nulls and mismatched types never satisfy a comparison.
inline bool satisfies(const Value& lhs, Comparator sign, const Value& rhs) {
  if (is_null(lhs) || is_null(rhs) || lhs.index() != rhs.index()) return false;
  const auto ord = natural_compare(lhs, rhs);
  switch (sign) {
    case Comparator::Eq: return ord == 0;
    case Comparator::Ne: return ord != 0;
    case Comparator::Lt: return ord < 0;
    case Comparator::Le: return ord <= 0;
    case Comparator::Gt: return ord > 0;
    case Comparator::Ge: return ord >= 0;
  }
  return false;
}

}  // namespace dsq
