#include "xmodal/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "xmodal/error.hpp"

namespace xmodal {

namespace {

constexpr std::string_view kIndexMagic = "CMXI";
constexpr std::uint16_t kIndexVersion = 1;

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

std::optional<Modality> modality_from_string(std::string_view s) {
  if (s == "image") return Modality::Image;
  if (s == "text") return Modality::Text;
  return std::nullopt;
}

FusedIndex::FusedIndex(std::size_t dim, std::vector<IndexEntry> entries)
    : dim_(dim), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.vector.size() != dim_) {
      throw ShapeError("index entry " + e.study_id + " has dimension " +
                       std::to_string(e.vector.size()) + ", expected " + std::to_string(dim_));
    }
    if (!all_finite(e.vector) || std::abs(norm(e.vector) - 1.0) > 1e-6) {
      throw BuildError("index entry " + e.study_id + " is not a finite unit vector");
    }
  }
}

SearchResult FusedIndex::search(std::span<const double> query, std::size_t k,
                                std::optional<std::string_view> exclude_id) const {
  if (k == 0) throw ParameterError("k must be at least 1");
  if (query.size() != dim_) {
    throw ShapeError("query has dimension " + std::to_string(query.size()) + ", index expects " +
                     std::to_string(dim_));
  }
  if (!all_finite(query)) throw ParameterError("query contains non-finite values");
  const Vector q = l2_normalize(query);

  std::vector<std::size_t> order;
  std::vector<double> scores(entries_.size());
  order.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (exclude_id && entries_[i].study_id == *exclude_id) continue;
    scores[i] = dot(q, entries_[i].vector);
    order.push_back(i);
  }
  const std::size_t take = std::min(k, order.size());
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), better);

  SearchResult out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto& e = entries_[order[r]];
    out.push_back({e.study_id, e.label, scores[order[r]], order[r]});
  }
  return out;
}

Vector embed_modality(const ModelParams* params, const EmbeddingRecord& rec, Modality m) {
  const Vector& raw = m == Modality::Image ? rec.image : rec.text;
  try {
    if (!params) return l2_normalize(raw);
    const Affine& adapter = m == Modality::Image ? params->image_adapter : params->text_adapter;
    return l2_normalize(apply_affine(adapter, raw));
  } catch (const DegenerateVectorError&) {
    throw DegenerateVectorError("study " + rec.study_id + ": " + std::string(to_string(m)) +
                                " embedding has zero norm");
  }
}

Vector fuse(std::span<const double> image_unit, std::span<const double> text_unit) {
  Vector avg(image_unit.size());
  for (std::size_t k = 0; k < avg.size(); ++k) avg[k] = (image_unit[k] + text_unit[k]) / 2.0;
  return l2_normalize(avg);
}

FusedIndex build_index(const ModelParams* params, const EmbeddingSet& set) {
  if (set.empty()) throw BuildError("cannot build an index from an empty embedding set");
  if (params && params->dim != set.dim) {
    throw ShapeError("model dimension " + std::to_string(params->dim) +
                     " does not match embedding dimension " + std::to_string(set.dim));
  }
  std::vector<IndexEntry> entries;
  entries.reserve(set.size());
  for (const auto& rec : set.records) {
    try {
      const Vector v = embed_modality(params, rec, Modality::Image);
      const Vector t = embed_modality(params, rec, Modality::Text);
      entries.push_back({rec.study_id, rec.label, fuse(v, t)});
    } catch (const DegenerateVectorError& e) {
      throw BuildError(std::string("cannot index study ") + rec.study_id + ": " + e.what());
    }
  }
  return FusedIndex(set.dim, std::move(entries));
}

SearchResult query_by_id(const FusedIndex& index, const EmbeddingSet& set,
                         const ModelParams* params, std::string_view study_id,
                         Modality modality, std::size_t k, bool exclude_self) {
  const EmbeddingRecord* rec = set.find(study_id);
  if (!rec) throw NotFoundError("study id '" + std::string(study_id) + "' not found");
  const Vector q = embed_modality(params, *rec, modality);
  if (exclude_self) return index.search(q, k, study_id);
  return index.search(q, k);
}

std::string encode_index(const FusedIndex& index) {
  detail::ByteWriter w;
  w.magic(kIndexMagic);
  w.u16(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.size());
  for (const auto& e : index.entries()) {
    if (e.study_id.size() > 0xFFFF) throw FormatError("study id too long");
    w.u16(static_cast<std::uint16_t>(e.study_id.size()));
    w.bytes(e.study_id);
    w.u8(static_cast<std::uint8_t>(e.label));
    for (double x : e.vector) w.f32(static_cast<float>(x));
  }
  return w.buffer();
}

FusedIndex decode_index(std::string_view bytes) {
  detail::ByteReader r(bytes, "CMXI");
  r.expect_magic(kIndexMagic);
  const std::uint16_t version = r.u16();
  if (version != kIndexVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  if (dim == 0) r.fail("dimension must be positive");
  if (count > r.remaining() / (3 + 4ULL * dim)) {
    r.fail("declared count " + std::to_string(count) + " exceeds the file's payload");
  }
  std::vector<IndexEntry> entries;
  entries.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.study_id = r.bytes(r.u16());
    const auto label = label_from_byte(r.u8());
    if (!label) r.fail("entry " + std::to_string(i) + " has an invalid label byte");
    e.label = *label;
    e.vector.resize(dim);
    for (double& x : e.vector) x = r.f32();
    if (!all_finite(e.vector)) r.fail("entry " + e.study_id + " has non-finite values");
    if (std::abs(norm(e.vector) - 1.0) > 1e-6) r.fail("entry " + e.study_id + " is not unit-norm");
    if (!seen.insert(e.study_id).second) r.fail("duplicate study id " + e.study_id);
    entries.push_back(std::move(e));
  }
  r.expect_end();
  return FusedIndex(dim, std::move(entries));
}

void save_index(const FusedIndex& index, const std::filesystem::path& path) {
  detail::write_file(path, encode_index(index));
}

FusedIndex load_index(const std::filesystem::path& path) {
  return decode_index(detail::read_file(path));
}

}  // namespace xmodal
