#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "dsq/error.hpp"

namespace dsq {

enum class Category { Structured, Semistructured, Unstructured };
enum class Format { Csv, Xml, Json, Txt };

constexpr std::string_view to_string(Category c) {
  switch (c) {
    case Category::Structured: return "structured";
    case Category::Semistructured: return "semistructured";
    case Category::Unstructured: return "unstructured";
  }
  return "structured";
}

constexpr std::string_view to_string(Format f) {
  switch (f) {
    case Format::Csv: return "csv";
    case Format::Xml: return "xml";
    case Format::Json: return "json";
    case Format::Txt: return "txt";
  }
  return "csv";
}

inline std::optional<Category> parse_category(std::string_view s) {
  if (s == "structured") return Category::Structured;
  if (s == "semistructured") return Category::Semistructured;
  if (s == "unstructured") return Category::Unstructured;
  return std::nullopt;
}

inline std::optional<Format> parse_format(std::string_view s) {
  if (s == "csv") return Format::Csv;
  if (s == "xml") return Format::Xml;
  if (s == "json") return Format::Json;
  if (s == "txt") return Format::Txt;
  return std::nullopt;
}

constexpr Category category_of(Format f) {
  switch (f) {
    case Format::Csv: return Category::Structured;
    case Format::Xml:
    case Format::Json: return Category::Semistructured;
    case Format::Txt: return Category::Unstructured;
  }
  return Category::Structured;
}

struct SourceDescriptor {
  std::string id;
  Category category = Category::Structured;
  Format format = Format::Csv;
  std::string location;
  std::map<std::string, std::string> options;

  bool consistent() const { return category_of(format) == category; }

  friend bool operator==(const SourceDescriptor&, const SourceDescriptor&) = default;
};

/// Maps a file extension to its (category, format) pair.
inline std::pair<Category, Format> detect_kind(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return {Category::Structured, Format::Csv};
  if (ext == ".xml") return {Category::Semistructured, Format::Xml};
  if (ext == ".json") return {Category::Semistructured, Format::Json};
  if (ext == ".txt") return {Category::Unstructured, Format::Txt};
  throw Error(ErrorKind::UnsupportedFormat,
              "unsupported extension '" + ext + "' for " + path.string());
}

/// Descriptor for a file on disk; the id is the file stem.
inline SourceDescriptor describe_file(const std::filesystem::path& path) {
  const auto [category, format] = detect_kind(path);
  SourceDescriptor src;
  src.id = path.stem().string();
  src.category = category;
  src.format = format;
  src.location = path.string();
  return src;
}

}  // namespace dsq
