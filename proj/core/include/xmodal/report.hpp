#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/dataset.hpp"

namespace xmodal {

struct StudyRecord {
  std::string study_id;
  std::string findings;
  std::string impression;
  std::string caption;
  Label label = Label::Abnormal;

  bool operator==(const StudyRecord&) const = default;
};

/// Parses an OpenI-style report. Findings/impression come from AbstractText
/// elements labelled FINDINGS / IMPRESSION (case-insensitive); the study is
/// normal iff a MeSH major term equals "normal". The study id comes from the
/// uId element when present, else `fallback_id`.
///
/// Throws ParseError on malformed markup and EmptyReportError when both
/// sections are empty.
StudyRecord parse_report(std::string_view xml_text, std::string_view fallback_id = {});

/// "FINDINGS: ... IMPRESSION: ..." with empty sections omitted.
std::string compose_caption(std::string_view findings, std::string_view impression);

/// Collapses whitespace runs to single spaces and trims.
std::string normalize_whitespace(std::string_view s);

struct ManifestEntry {
  std::string study_id;
  std::filesystem::path image_path;
  std::filesystem::path report_path;
};

/// Line-delimited JSON {study_id, image_path, report_path}. Relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct IngestFailure {
  std::string study_id;
  std::string message;
};

struct IngestResult {
  std::vector<StudyRecord> records;
  std::vector<IngestFailure> failures;
};

/// Parses every report in the manifest, in manifest order. Per-study parse
/// failures are collected rather than thrown.
IngestResult ingest_manifest(const std::vector<ManifestEntry>& manifest);

std::string study_record_json(const StudyRecord& r);
void write_study_corpus(const std::vector<StudyRecord>& records,
                        const std::filesystem::path& path);

}  // namespace xmodal
