#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "xmodal/error.hpp"
#include "xmodal/report.hpp"
#include "xmodal/synthetic.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path report(const char* name) { return fs::path(XMODAL_FIXTURE_DIR) / "reports" / name; }

EmbeddingSet labelled_set(std::size_t normals, std::size_t abnormals, std::size_t unlabeled = 0) {
  EmbeddingSet s;
  s.dim = 2;
  std::size_t i = 0;
  auto add = [&](Label l) {
    s.records.push_back({"S" + std::to_string(i), l, {1.0, static_cast<double>(i)}, {0.0, 1.0}});
    ++i;
  };
  // Interleave so the split has to pick across the input order.
  while (normals + abnormals + unlabeled > 0) {
    if (abnormals) { add(Label::Abnormal); --abnormals; }
    if (normals) { add(Label::Normal); --normals; }
    if (unlabeled) { add(Label::Unlabeled); --unlabeled; }
  }
  return s;
}

std::set<std::string> ids(const EmbeddingSet& s) {
  std::set<std::string> out;
  for (const auto& r : s.records) out.insert(r.study_id);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- reports

TEST(Report, NormalFindingsOnly) {
  const StudyRecord r = parse_report(slurp(report("normal.xml")));
  EXPECT_EQ(r.study_id, "CXR1");
  EXPECT_EQ(r.findings, "Lungs are clear.");
  EXPECT_EQ(r.impression, "");
  EXPECT_EQ(r.caption, "FINDINGS: Lungs are clear.");
  EXPECT_EQ(r.label, Label::Normal);
}

TEST(Report, ImpressionOnlyAbnormal) {
  const StudyRecord r = parse_report(slurp(report("opacity.xml")));
  EXPECT_EQ(r.study_id, "CXR2");
  EXPECT_EQ(r.findings, "");
  EXPECT_EQ(r.caption, "IMPRESSION: Right lower lobe opacity.");
  EXPECT_EQ(r.label, Label::Abnormal);
}

TEST(Report, BothSectionsWithMarkupFeatures) {
  const StudyRecord r = parse_report(slurp(report("both_sections.xml")));
  EXPECT_EQ(r.caption, "FINDINGS: Heart size normal & lungs clear. IMPRESSION: No acute disease.");
  EXPECT_EQ(r.label, Label::Normal);  // any major term "normal", case-insensitive
}

TEST(Report, FallbackIdWhenNoUid) {
  const StudyRecord r = parse_report(slurp(report("no_uid.xml")), "MANIFEST7");
  EXPECT_EQ(r.study_id, "MANIFEST7");
  EXPECT_EQ(r.label, Label::Abnormal);  // no MeSH at all
}

TEST(Report, EmptySectionsRejected) {
  EXPECT_THROW(parse_report(slurp(report("empty_sections.xml"))), EmptyReportError);
}

TEST(Report, TruncatedNamesPosition) {
  try {
    parse_report(slurp(report("truncated.xml")));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
  }
}

TEST(Report, EveryFixtureYieldsRecordOrTypedError) {
  for (const auto& entry : fs::directory_iterator(fs::path(XMODAL_FIXTURE_DIR) / "reports")) {
    try {
      const StudyRecord r = parse_report(slurp(entry.path()), "X");
      EXPECT_FALSE(r.caption.empty());
    } catch (const Error& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::EmptyReport)
          << entry.path();
    }
  }
}

TEST(Report, Helpers) {
  EXPECT_EQ(normalize_whitespace("  a \n\t b  "), "a b");
  EXPECT_EQ(normalize_whitespace("   "), "");
  EXPECT_EQ(compose_caption("", ""), "");
  EXPECT_EQ(compose_caption("f", "i"), "FINDINGS: f IMPRESSION: i");
}

TEST(Manifest, IngestCollectsFailuresInOrder) {
  const fs::path dir = fs::temp_directory_path() / "xmodal_manifest_test";
  fs::create_directories(dir);
  {
    std::ofstream m(dir / "manifest.jsonl");
    const std::string reports = (fs::path(XMODAL_FIXTURE_DIR) / "reports").string();
    m << R"({"study_id":"A","image_path":"a.png","report_path":")" << reports << "/normal.xml\"}\n";
    m << R"({"study_id":"B","image_path":"b.png","report_path":")" << reports << "/truncated.xml\"}\n";
    m << "\n";
    m << R"({"study_id":"C","image_path":"c.png","report_path":")" << reports << "/opacity.xml\"}\n";
    m << R"({"study_id":"D","image_path":"d.png","report_path":"missing.xml"})" << "\n";
  }
  const auto manifest = read_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(manifest.size(), 4u);
  EXPECT_EQ(manifest[0].image_path, dir / "a.png");
  const IngestResult r = ingest_manifest(manifest);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].study_id, "A");
  EXPECT_EQ(r.records[1].study_id, "C");
  ASSERT_EQ(r.failures.size(), 2u);
  EXPECT_EQ(r.failures[0].study_id, "B");
  EXPECT_EQ(r.failures[1].study_id, "D");

  write_study_corpus(r.records, dir / "studies.jsonl");
  const std::string out = slurp(dir / "studies.jsonl");
  EXPECT_EQ(out.substr(0, out.find('\n')),
            R"({"study_id":"A","findings":"Lungs are clear.","impression":"","caption":"FINDINGS: Lungs are clear.","label":"normal"})");
  fs::remove_all(dir);
}

TEST(Manifest, MalformedLineIsFormatError) {
  const fs::path p = fs::temp_directory_path() / "xmodal_bad_manifest.jsonl";
  {
    std::ofstream m(p);
    m << "{\"study_id\": \"A\"}\n";
  }
  EXPECT_THROW(read_manifest(p), FormatError);
  fs::remove(p);
  EXPECT_THROW(read_manifest("/nonexistent/manifest.jsonl"), IoError);
}

// ---------------------------------------------------------------- split

TEST(Split, FullCorpusCounts) {
  const EmbeddingSet s = labelled_set(400, 600);
  const CorpusSplit c = split_corpus(s, {200, 0.1, 42});
  EXPECT_EQ(c.test.size(), 400u);
  EXPECT_EQ(c.val.size(), 60u);
  EXPECT_EQ(c.train.size(), 540u);
  const auto labels = c.test.binary_labels();
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 0), 200);
}

TEST(Split, DisjointExhaustiveAndOrdered) {
  const EmbeddingSet s = labelled_set(50, 70, 10);
  const CorpusSplit c = split_corpus(s, {20, 0.25, 3});
  EXPECT_EQ(c.train.size() + c.val.size() + c.test.size(), s.size());
  std::set<std::string> all;
  for (const auto* part : {&c.train, &c.val, &c.test}) {
    for (const auto& id : ids(*part)) EXPECT_TRUE(all.insert(id).second) << id;
    // input order preserved: record ids S<i> have increasing i
    for (std::size_t i = 1; i < part->size(); ++i) {
      EXPECT_LT(std::stoi(part->records[i - 1].study_id.substr(1)),
                std::stoi(part->records[i].study_id.substr(1)));
    }
  }
  EXPECT_EQ(all, ids(s));
  for (const auto& r : c.test.records) EXPECT_NE(r.label, Label::Unlabeled);
}

TEST(Split, SeedDeterminism) {
  const EmbeddingSet s = labelled_set(30, 30);
  const auto a = split_corpus(s, {5, 0.2, 9});
  const auto b = split_corpus(s, {5, 0.2, 9});
  const auto c = split_corpus(s, {5, 0.2, 10});
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(ids(a.test), ids(c.test));
}

TEST(Split, ZeroTestPerClass) {
  const EmbeddingSet s = labelled_set(10, 10);
  const auto c = split_corpus(s, {0, 0.1, 1});
  EXPECT_TRUE(c.test.empty());
  EXPECT_EQ(c.train.size() + c.val.size(), 20u);
  EXPECT_EQ(c.val.size(), 2u);
}

TEST(Split, InsufficientClassNamed) {
  const EmbeddingSet s = labelled_set(3, 10);
  try {
    split_corpus(s, {5, 0.1, 1});
    FAIL() << "expected SplitError";
  } catch (const SplitError& e) {
    EXPECT_NE(std::string(e.what()).find("'normal'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(split_corpus(labelled_set(10, 10), {1, 0.0, 1}), ParameterError);
  EXPECT_THROW(split_corpus(labelled_set(10, 10), {1, 1.0, 1}), ParameterError);
}

// ---------------------------------------------------------------- synthetic

TEST(Synthetic, ShapesLabelsAndDeterminism) {
  SynthSpec spec;
  spec.n = 40;
  spec.dim = 8;
  spec.seed = 5;
  const EmbeddingSet a = make_synthetic(spec);
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(a.dim, 8u);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.records[7].study_id, "SYN07");
  const auto y = a.binary_labels();
  EXPECT_EQ(std::count(y.begin(), y.end(), 1), 20);
  EXPECT_EQ(make_synthetic(spec), a);
  spec.seed = 6;
  EXPECT_NE(make_synthetic(spec), a);
}

TEST(Synthetic, IdenticalModalities) {
  SynthSpec spec;
  spec.n = 10;
  spec.identical_modalities = true;
  for (const auto& r : make_synthetic(spec).records) EXPECT_EQ(r.image, r.text);
}
