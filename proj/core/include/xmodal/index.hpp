#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/model.hpp"

namespace xmodal {

enum class Modality { Image, Text };

std::string_view to_string(Modality m);
std::optional<Modality> modality_from_string(std::string_view s);

struct IndexEntry {
  std::string study_id;
  Label label = Label::Unlabeled;
  Vector vector;  // unit-norm fused embedding

  bool operator==(const IndexEntry&) const = default;
};

struct SearchHit {
  std::string study_id;
  Label label = Label::Unlabeled;
  double score = 0.0;
  std::size_t position = 0;  // insertion order within the index

  bool operator==(const SearchHit&) const = default;
};

/// Ranked by nonincreasing score; ties in insertion order.
using SearchResult = std::vector<SearchHit>;

/// Flat exact inner-product index over unit-norm fused embeddings.
/// Immutable once built, so concurrent searches are safe.
class FusedIndex {
 public:
  FusedIndex() = default;
  FusedIndex(std::size_t dim, std::vector<IndexEntry> entries);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }

  /// Normalizes `query` then scans every entry. If `exclude_id` is set, the
  /// entry with that study id is skipped. k larger than the index returns all.
  SearchResult search(std::span<const double> query, std::size_t k,
                      std::optional<std::string_view> exclude_id = std::nullopt) const;

  bool operator==(const FusedIndex&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<IndexEntry> entries_;
};

/// Adapted (eval-mode), normalized embedding for one modality of one record.
/// A null `params` means the raw backbone embedding.
Vector embed_modality(const ModelParams* params, const EmbeddingRecord& rec, Modality m);

/// l2n((l2n(adapted image) + l2n(adapted text)) / 2)
Vector fuse(std::span<const double> image_unit, std::span<const double> text_unit);

/// Builds the fused index. `params == nullptr` indexes the raw embeddings.
FusedIndex build_index(const ModelParams* params, const EmbeddingSet& set);
inline FusedIndex build_index(const ModelParams& params, const EmbeddingSet& set) {
  return build_index(&params, set);
}
inline FusedIndex build_index(const EmbeddingSet& set) { return build_index(nullptr, set); }

SearchResult query_by_id(const FusedIndex& index, const EmbeddingSet& set,
                         const ModelParams* params, std::string_view study_id,
                         Modality modality, std::size_t k, bool exclude_self = false);

// CMXI: "CMXI" u16 version=1 u32 dim u64 count, then per entry u16 id
// length, id bytes, u8 label, dim f32 fused values. Little-endian.
std::string encode_index(const FusedIndex& index);
FusedIndex decode_index(std::string_view bytes);
void save_index(const FusedIndex& index, const std::filesystem::path& path);
FusedIndex load_index(const std::filesystem::path& path);

}  // namespace xmodal
