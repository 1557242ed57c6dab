#include <gtest/gtest.h>

#include "xmodal/error.hpp"
#include "xmodal/xml.hpp"

using namespace xmodal;

namespace {

ParseError parse_error_of(std::string_view doc) {
  try {
    xml::parse(doc);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ParseError for: " << doc;
  return ParseError("none", 0, 0);
}

}  // namespace

TEST(Xml, ElementsAttributesAndText) {
  const auto root = xml::parse(R"(<?xml version="1.0"?><a x="1" y='two'>hi<b>there</b> you</a>)");
  EXPECT_EQ(root.name, "a");
  ASSERT_NE(root.attribute("y"), nullptr);
  EXPECT_EQ(*root.attribute("y"), "two");
  EXPECT_EQ(root.attribute("z"), nullptr);
  ASSERT_EQ(root.children.size(), 1u);
  EXPECT_EQ(root.text_content(), "hithere you");
}

TEST(Xml, EntitiesAndCdata) {
  const auto root = xml::parse("<a>&lt;&amp;&gt;&quot;&apos;&#65;&#x263A;<![CDATA[<raw>&amp;]]></a>");
  EXPECT_EQ(root.text_content(), "<&>\"'A\xE2\x98\xBA<raw>&amp;");
}

TEST(Xml, SkipsCommentsPisDoctypeAndBom) {
  const auto root = xml::parse(
      "\xEF\xBB\xBF<?xml version=\"1.0\"?>\n<!DOCTYPE r [ <!ELEMENT r ANY> ]>\n"
      "<!-- c --><r><?pi x?><!-- inner --><s/></r>\n<!-- trailing -->");
  EXPECT_EQ(root.name, "r");
  ASSERT_EQ(root.children.size(), 1u);
  EXPECT_EQ(root.children[0].name, "s");
}

TEST(Xml, DescendantsArePreOrder) {
  const auto root = xml::parse("<r><x id='1'><x id='2'/></x><y><x id='3'/></y></r>");
  const auto xs = root.descendants("x");
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_EQ(*xs[0]->attribute("id"), "1");
  EXPECT_EQ(*xs[1]->attribute("id"), "2");
  EXPECT_EQ(*xs[2]->attribute("id"), "3");
}

TEST(Xml, TruncatedReportsPosition) {
  const auto e = parse_error_of("<a>\n  <b>text");
  EXPECT_EQ(e.kind(), ErrorKind::Parse);
  EXPECT_EQ(e.line(), 2u);
  EXPECT_GT(e.column(), 0u);
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
}

TEST(Xml, MismatchedTag) {
  const auto e = parse_error_of("<a>\n<b></c>\n</a>");
  EXPECT_EQ(e.line(), 2u);
  EXPECT_NE(std::string(e.what()).find("</c>"), std::string::npos) << e.what();
}

TEST(Xml, MalformedInputs) {
  for (const char* doc : {"", "just text", "<a></a><b/>", "<a x=1/>", "<a x='1' x='2'/>",
                          "<a>&bogus;</a>", "<a><!-- unterminated </a>", "<a x='<'/>",
                          "<1a/>", "<a>&#xZZ;</a>"}) {
    EXPECT_THROW(xml::parse(doc), ParseError) << doc;
  }
}
