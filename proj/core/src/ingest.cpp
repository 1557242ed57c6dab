#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include "binary_io.hpp"
#include "json.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/error.hpp"
#include "xmodal/report.hpp"
#include "xmodal/xml.hpp"

namespace xmodal {

namespace {

constexpr std::string_view kEmbeddingMagic = "CMXE";
constexpr std::uint16_t kEmbeddingVersion = 1;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

EmbeddingSet subset(const EmbeddingSet& set, const std::vector<std::size_t>& indices) {
  EmbeddingSet out;
  out.dim = set.dim;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(set.records[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- labels

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Normal: return "normal";
    case Label::Abnormal: return "abnormal";
    case Label::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<Label> label_from_byte(std::uint8_t b) {
  switch (b) {
    case 0: return Label::Normal;
    case 1: return Label::Abnormal;
    case 255: return Label::Unlabeled;
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------- EmbeddingSet

Matrix EmbeddingSet::image_matrix() const {
  Matrix m(records.size(), dim);
  for (std::size_t i = 0; i < records.size(); ++i)
    std::copy(records[i].image.begin(), records[i].image.end(), m.row(i).begin());
  return m;
}

Matrix EmbeddingSet::text_matrix() const {
  Matrix m(records.size(), dim);
  for (std::size_t i = 0; i < records.size(); ++i)
    std::copy(records[i].text.begin(), records[i].text.end(), m.row(i).begin());
  return m;
}

std::vector<int> EmbeddingSet::binary_labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.label == Label::Unlabeled) {
      throw LabelError("study " + r.study_id + " is unlabeled");
    }
    out.push_back(static_cast<int>(r.label));
  }
  return out;
}

const EmbeddingRecord* EmbeddingSet::find(std::string_view study_id) const {
  for (const auto& r : records)
    if (r.study_id == study_id) return &r;
  return nullptr;
}

void EmbeddingSet::validate() const {
  if (dim == 0) throw FormatError("embedding dimension must be positive");
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records) {
    if (r.image.size() != dim || r.text.size() != dim) {
      throw FormatError("study " + r.study_id + " has vectors of the wrong dimension");
    }
    if (!all_finite(r.image) || !all_finite(r.text)) {
      throw FormatError("study " + r.study_id + " has non-finite values");
    }
    if (!seen.insert(r.study_id).second) {
      throw FormatError("duplicate study id " + r.study_id);
    }
  }
}

// ---------------------------------------------------------------- CMXE

std::string encode_embeddings(const EmbeddingSet& set) {
  set.validate();
  detail::ByteWriter w;
  w.magic(kEmbeddingMagic);
  w.u16(kEmbeddingVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(set.dim));
  w.u64(set.records.size());
  for (const auto& r : set.records) {
    if (r.study_id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("study id too long: " + r.study_id.substr(0, 32) + "...");
    }
    w.u16(static_cast<std::uint16_t>(r.study_id.size()));
    w.bytes(r.study_id);
    w.u8(static_cast<std::uint8_t>(r.label));
    for (double x : r.image) w.f32(static_cast<float>(x));
    for (double x : r.text) w.f32(static_cast<float>(x));
  }
  return w.buffer();
}

EmbeddingSet decode_embeddings(std::string_view bytes) {
  detail::ByteReader r(bytes, "CMXE");
  r.expect_magic(kEmbeddingMagic);
  const std::uint16_t version = r.u16();
  if (version != kEmbeddingVersion) r.fail("unsupported version " + std::to_string(version));
  if (r.u16() != 0) r.fail("reserved field must be zero");
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  if (dim == 0) r.fail("dimension must be positive");
  // Smallest possible record: empty id + label + two vectors.
  const std::uint64_t min_record = 2 + 1 + 8ULL * dim;
  if (count > r.remaining() / min_record) {
    r.fail("declared count " + std::to_string(count) + " exceeds the file's payload");
  }

  EmbeddingSet set;
  set.dim = dim;
  set.records.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.study_id = r.bytes(r.u16());
    const auto label = label_from_byte(r.u8());
    if (!label) r.fail("record " + std::to_string(i) + " has an invalid label byte");
    rec.label = *label;
    rec.image.resize(dim);
    rec.text.resize(dim);
    for (double& x : rec.image) x = r.f32();
    for (double& x : rec.text) x = r.f32();
    if (!all_finite(rec.image) || !all_finite(rec.text)) {
      r.fail("record " + std::to_string(i) + " (" + rec.study_id + ") has non-finite values");
    }
    if (!seen.insert(rec.study_id).second) r.fail("duplicate study id " + rec.study_id);
    set.records.push_back(std::move(rec));
  }
  r.expect_end();
  return set;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  detail::write_file(path, encode_embeddings(set));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(detail::read_file(path));
}

// ---------------------------------------------------------------- split

CorpusSplit split_corpus(const EmbeddingSet& set, const SplitSpec& spec) {
  if (!(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
    throw ParameterError("val_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> normal, abnormal, other;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    switch (set.records[i].label) {
      case Label::Normal: normal.push_back(i); break;
      case Label::Abnormal: abnormal.push_back(i); break;
      case Label::Unlabeled: other.push_back(i); break;
    }
  }
  if (normal.size() < spec.test_per_class) {
    throw SplitError("class 'normal' has " + std::to_string(normal.size()) +
                     " records, fewer than test_per_class=" +
                     std::to_string(spec.test_per_class));
  }
  if (abnormal.size() < spec.test_per_class) {
    throw SplitError("class 'abnormal' has " + std::to_string(abnormal.size()) +
                     " records, fewer than test_per_class=" +
                     std::to_string(spec.test_per_class));
  }

  std::mt19937_64 rng(spec.seed);
  std::shuffle(normal.begin(), normal.end(), rng);
  std::shuffle(abnormal.begin(), abnormal.end(), rng);

  std::vector<std::size_t> test(normal.begin(), normal.begin() + spec.test_per_class);
  test.insert(test.end(), abnormal.begin(), abnormal.begin() + spec.test_per_class);

  std::vector<std::size_t> rest(normal.begin() + spec.test_per_class, normal.end());
  rest.insert(rest.end(), abnormal.begin() + spec.test_per_class, abnormal.end());
  rest.insert(rest.end(), other.begin(), other.end());
  std::sort(rest.begin(), rest.end());
  std::shuffle(rest.begin(), rest.end(), rng);

  const auto n_val = static_cast<std::size_t>(
      std::llround(spec.val_fraction * static_cast<double>(rest.size())));
  std::vector<std::size_t> val(rest.begin(), rest.begin() + n_val);
  std::vector<std::size_t> train(rest.begin() + n_val, rest.end());

  std::sort(test.begin(), test.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {subset(set, train), subset(set, val), subset(set, test)};
}

// ---------------------------------------------------------------- reports

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string compose_caption(std::string_view findings, std::string_view impression) {
  std::string caption;
  if (!findings.empty()) caption += "FINDINGS: " + std::string(findings);
  if (!impression.empty()) {
    if (!caption.empty()) caption.push_back(' ');
    caption += "IMPRESSION: " + std::string(impression);
  }
  return caption;
}

StudyRecord parse_report(std::string_view xml_text, std::string_view fallback_id) {
  const xml::Element root = xml::parse(xml_text);
  StudyRecord rec;
  for (const xml::Element* el : root.descendants("AbstractText")) {
    const std::string* label = el->attribute("Label");
    if (!label) continue;
    const std::string text = normalize_whitespace(el->text_content());
    if (iequals(*label, "FINDINGS")) {
      if (rec.findings.empty()) rec.findings = text;
    } else if (iequals(*label, "IMPRESSION")) {
      if (rec.impression.empty()) rec.impression = text;
    }
  }

  rec.study_id = std::string(fallback_id);
  for (const xml::Element* el : root.descendants("uId")) {
    if (const std::string* id = el->attribute("id"); id && !id->empty()) {
      rec.study_id = *id;
      break;
    }
  }

  if (rec.findings.empty() && rec.impression.empty()) {
    throw EmptyReportError("report " + (rec.study_id.empty() ? std::string("<unknown>")
                                                             : rec.study_id) +
                           " has neither FINDINGS nor IMPRESSION text");
  }
  rec.caption = compose_caption(rec.findings, rec.impression);

  rec.label = Label::Abnormal;
  for (const xml::Element* mesh : root.descendants("MeSH")) {
    for (const xml::Element* major : mesh->descendants("major")) {
      if (iequals(normalize_whitespace(major->text_content()), "normal")) {
        rec.label = Label::Normal;
      }
    }
  }
  return rec;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.study_id = j.at("study_id").get<std::string>();
      e.image_path = j.at("image_path").get<std::string>();
      e.report_path = j.at("report_path").get<std::string>();
      if (e.image_path.is_relative()) e.image_path = base / e.image_path;
      if (e.report_path.is_relative()) e.report_path = base / e.report_path;
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("manifest " + path.string() + " line " + std::to_string(line_no) +
                        ": " + ex.what());
    }
  }
  return out;
}

IngestResult ingest_manifest(const std::vector<ManifestEntry>& manifest) {
  IngestResult result;
  std::set<std::string> seen;
  for (const auto& entry : manifest) {
    try {
      if (!seen.insert(entry.study_id).second) {
        throw FormatError("duplicate study id in manifest");
      }
      StudyRecord rec = parse_report(detail::read_file(entry.report_path), entry.study_id);
      if (!entry.study_id.empty()) rec.study_id = entry.study_id;
      result.records.push_back(std::move(rec));
    } catch (const Error& e) {
      result.failures.push_back({entry.study_id, e.what()});
    }
  }
  return result;
}

std::string study_record_json(const StudyRecord& r) {
  nlohmann::ordered_json j;
  j["study_id"] = r.study_id;
  j["findings"] = r.findings;
  j["impression"] = r.impression;
  j["caption"] = r.caption;
  j["label"] = to_string(r.label);
  return j.dump();
}

void write_study_corpus(const std::vector<StudyRecord>& records,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << study_record_json(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace xmodal
