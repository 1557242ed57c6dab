#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/index.hpp"

namespace xmodal {

enum class Direction { ImageToText, TextToImage };

std::string_view to_string(Direction d);  // "i2t" / "t2i"

/// Query modality for a retrieval direction.
Modality query_modality(Direction d);

/// Fraction of queries whose own id appears among their top-k hits.
double retrieval_accuracy(std::span<const SearchResult> results,
                          std::span<const std::string> truth_ids, std::size_t k);

/// Flat mean of every score inside every query's top-k.
double mean_similarity_at_k(std::span<const SearchResult> results, std::size_t k);

/// Mean over queries of the fraction of top-k hits sharing the query label.
double label_precision_at_k(std::span<const SearchResult> results,
                            std::span<const Label> query_labels, std::size_t k);

/// F1 with abnormal as the positive class; 0 when undefined.
double binary_f1(std::span<const Label> predicted, std::span<const Label> truth);

/// Mann-Whitney AUC of `scores` against abnormal-vs-normal truth, ties 0.5.
/// Returns 0.5 when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const Label> truth);

/// Average precision of a 0/1 relevance sequence; 0 if nothing is relevant.
double average_precision(std::span<const int> relevance);

/// Mean label-match AP over each query's top-k.
double mean_average_precision(std::span<const SearchResult> results,
                              std::span<const Label> query_labels, std::size_t k);

/// Similarity-weighted abnormal vote over the top-k hits, weights (1+s)/2.
double abnormality_score(const SearchResult& hits, std::size_t k);

struct AtK {
  std::size_t k = 0;
  double accuracy = 0.0;
  double mean_similarity = 0.0;
  double precision = 0.0;

  bool operator==(const AtK&) const = default;
};

struct MetricsReport {
  Direction direction = Direction::ImageToText;
  bool exclude_self = false;
  std::size_t queries = 0;
  std::vector<AtK> at_k;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double map = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

/// Every metric above for one direction. `params == nullptr` queries with raw
/// backbone embeddings. k-independent scalars use the largest k.
MetricsReport full_report(const FusedIndex& index, const EmbeddingSet& queries,
                          const ModelParams* params, Direction direction,
                          std::span<const std::size_t> ks, bool exclude_self = false);

std::string report_json(const MetricsReport& r);
std::string reports_json(std::span<const MetricsReport> reports);

/// Plain-text table with one column per report.
std::string render_table(std::span<const MetricsReport> reports);

}  // namespace xmodal
