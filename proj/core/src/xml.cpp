#include "xmodal/xml.hpp"

#include <cstdint>

#include "xmodal/error.hpp"

namespace xmodal::xml {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_name_start(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':' || u >= 0x80;
}

bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Parser {
 public:
  explicit Parser(std::string_view doc) : doc_(doc) {}

  Element parse_document() {
    if (doc_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
    skip_misc();
    if (eof()) fail("document has no root element");
    if (peek() != '<') fail("unexpected character data before root element");
    Element root = parse_element();
    skip_misc();
    if (!eof()) fail("unexpected content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }

  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < doc_.size(); ++i) {
      if (doc_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }

  bool eof() const { return pos_ >= doc_.size(); }
  char peek() const { return doc_[pos_]; }
  bool starts_with(std::string_view s) const { return doc_.substr(pos_, s.size()) == s; }

  void expect(std::string_view s) {
    if (!starts_with(s)) {
      fail(eof() ? "unexpected end of input, expected '" + std::string(s) + "'"
                 : "expected '" + std::string(s) + "'");
    }
    pos_ += s.size();
  }

  void skip_space() {
    while (!eof() && is_space(peek())) ++pos_;
  }

  void skip_until(std::string_view terminator, const char* construct) {
    const std::size_t start = pos_;
    const auto end = doc_.find(terminator, pos_);
    if (end == std::string_view::npos) {
      fail_at(std::string("unterminated ") + construct, start);
    }
    pos_ = end + terminator.size();
  }

  // Whitespace, comments, processing instructions and DOCTYPE outside the root.
  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<!DOCTYPE")) {
        skip_doctype();
      } else {
        return;
      }
    }
  }

  void skip_doctype() {
    const std::size_t start = pos_;
    int depth = 0;
    while (!eof()) {
      const char c = peek();
      ++pos_;
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == '>' && depth <= 0) return;
    }
    fail_at("unterminated DOCTYPE", start);
  }

  std::string parse_name() {
    if (eof()) fail("unexpected end of input, expected a name");
    if (!is_name_start(peek())) fail("invalid name character");
    const std::size_t start = pos_;
    while (!eof() && is_name_char(peek())) ++pos_;
    return std::string(doc_.substr(start, pos_ - start));
  }

  void parse_reference(std::string& out) {
    const std::size_t start = pos_;
    ++pos_;  // '&'
    const auto semi = doc_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 16) {
      fail_at("unterminated character reference", start);
    }
    const std::string_view ref = doc_.substr(pos_, semi - pos_);
    pos_ = semi + 1;
    if (ref == "amp") out.push_back('&');
    else if (ref == "lt") out.push_back('<');
    else if (ref == "gt") out.push_back('>');
    else if (ref == "quot") out.push_back('"');
    else if (ref == "apos") out.push_back('\'');
    else if (ref.size() > 1 && ref[0] == '#') {
      std::uint32_t cp = 0;
      const bool hex = ref[1] == 'x' || ref[1] == 'X';
      const std::string_view digits = ref.substr(hex ? 2 : 1);
      if (digits.empty()) fail_at("empty numeric character reference", start);
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else fail_at("invalid numeric character reference", start);
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        if (cp > 0x10FFFF) fail_at("character reference out of range", start);
      }
      append_utf8(out, cp);
    } else {
      fail_at("unknown entity '&" + std::string(ref) + ";'", start);
    }
  }

  std::string parse_attribute_value() {
    if (eof()) fail("unexpected end of input in attribute");
    const char quote = peek();
    if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
    ++pos_;
    std::string value;
    for (;;) {
      if (eof()) fail("unexpected end of input in attribute value");
      const char c = peek();
      if (c == quote) {
        ++pos_;
        return value;
      }
      if (c == '<') fail("'<' not allowed in attribute value");
      if (c == '&') {
        parse_reference(value);
      } else {
        value.push_back(c);
        ++pos_;
      }
    }
  }

  Element parse_element() {
    const std::size_t open_at = pos_;
    expect("<");
    Element el;
    el.name = parse_name();
    for (;;) {
      const bool had_space = !eof() && is_space(peek());
      skip_space();
      if (eof()) fail("unexpected end of input in start tag <" + el.name + ">");
      if (starts_with("/>")) {
        pos_ += 2;
        return el;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      if (!had_space) fail("expected whitespace between attributes");
      std::string key = parse_name();
      skip_space();
      expect("=");
      skip_space();
      std::string value = parse_attribute_value();
      if (el.attribute(key)) fail("duplicate attribute '" + key + "'");
      el.attributes.emplace_back(std::move(key), std::move(value));
    }

    for (;;) {
      if (eof()) {
        fail("unexpected end of input, element <" + el.name + "> opened at line " +
             position_string(open_at) + " is not closed");
      }
      if (starts_with("</")) {
        pos_ += 2;
        const std::size_t name_at = pos_;
        const std::string closing = parse_name();
        if (closing != el.name) {
          fail_at("mismatched closing tag </" + closing + ">, expected </" + el.name + ">",
                  name_at);
        }
        skip_space();
        expect(">");
        return el;
      }
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<![CDATA[")) {
        const std::size_t start = pos_;
        pos_ += 9;
        const auto end = doc_.find("]]>", pos_);
        if (end == std::string_view::npos) fail_at("unterminated CDATA section", start);
        el.text.append(doc_.substr(pos_, end - pos_));
        pos_ = end + 3;
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek() == '<') {
        el.child_offsets.push_back(el.text.size());
        el.children.push_back(parse_element());
      } else if (peek() == '&') {
        parse_reference(el.text);
      } else {
        el.text.push_back(peek());
        ++pos_;
      }
    }
  }

  std::string position_string(std::size_t at) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at; ++i) {
      if (doc_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return std::to_string(line) + ", column " + std::to_string(col);
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

void collect(const Element& el, std::string_view name, std::vector<const Element*>& out) {
  for (const auto& child : el.children) {
    if (child.name == name) out.push_back(&child);
    collect(child, name, out);
  }
}

void append_text(const Element& el, std::string& out) {
  std::size_t from = 0;
  for (std::size_t i = 0; i < el.children.size(); ++i) {
    out.append(el.text, from, el.child_offsets[i] - from);
    from = el.child_offsets[i];
    append_text(el.children[i], out);
  }
  out.append(el.text, from);
}

}  // namespace

const std::string* Element::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

std::string Element::text_content() const {
  std::string out;
  append_text(*this, out);
  return out;
}

std::vector<const Element*> Element::descendants(std::string_view name) const {
  std::vector<const Element*> out;
  collect(*this, name, out);
  return out;
}

Element parse(std::string_view document) { return Parser(document).parse_document(); }

}  // namespace xmodal::xml
