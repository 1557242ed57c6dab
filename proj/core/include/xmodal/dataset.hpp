#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/numerics.hpp"

namespace xmodal {

enum class Label : std::uint8_t { Normal = 0, Abnormal = 1, Unlabeled = 255 };

std::string_view to_string(Label label);
std::optional<Label> label_from_byte(std::uint8_t b);

struct EmbeddingRecord {
  std::string study_id;
  Label label = Label::Unlabeled;
  Vector image;
  Vector text;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Paired image/text backbone embeddings, one record per study.
struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  Matrix image_matrix() const;
  Matrix text_matrix() const;
  /// Labels as 0/1 ints; throws LabelError on unlabeled records.
  std::vector<int> binary_labels() const;
  const EmbeddingRecord* find(std::string_view study_id) const;

  /// Dimension, finiteness and id uniqueness; throws FormatError.
  void validate() const;

  bool operator==(const EmbeddingSet&) const = default;
};

// CMXE: "CMXE" u16 version=1 u16 reserved=0 u32 dim u64 count, then per record
// u16 id length, id bytes, u8 label, dim f32 image values, dim f32 text values.
// All integers and floats little-endian.
std::string encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::string_view bytes);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

struct SplitSpec {
  std::size_t test_per_class = 200;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  EmbeddingSet train;
  EmbeddingSet val;
  EmbeddingSet test;
};

/// Held-out test set with exactly test_per_class records of each label, then
/// a val_fraction / (1 - val_fraction) split of the rest. Each partition keeps
/// the input's record order.
CorpusSplit split_corpus(const EmbeddingSet& set, const SplitSpec& spec);

}  // namespace xmodal
