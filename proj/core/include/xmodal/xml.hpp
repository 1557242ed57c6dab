#pragma once

// A small non-validating XML reader: elements, attributes, character data,
// CDATA, comments, processing instructions and DOCTYPE (skipped), and the
// predefined plus numeric character references. Enough for report files.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xmodal::xml {

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;  // character data directly inside this element
  std::vector<std::size_t> child_offsets;  // offset into `text` where each child starts

  const std::string* attribute(std::string_view key) const;

  /// Text of this element and all descendants, in document order.
  std::string text_content() const;

  /// Depth-first (pre-order) search over descendants, excluding this element.
  std::vector<const Element*> descendants(std::string_view name) const;
};

/// Throws ParseError with the 1-based line/column of the failure.
Element parse(std::string_view document);

}  // namespace xmodal::xml
