#include "xmodal/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "xmodal/error.hpp"

namespace xmodal {

namespace {

std::size_t top(const SearchResult& r, std::size_t k) { return std::min(k, r.size()); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::ImageToText ? "i2t" : "t2i"; }

Modality query_modality(Direction d) {
  return d == Direction::ImageToText ? Modality::Image : Modality::Text;
}

double retrieval_accuracy(std::span<const SearchResult> results,
                          std::span<const std::string> truth_ids, std::size_t k) {
  require_same_size(results.size(), truth_ids.size(), "retrieval_accuracy");
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& r = results[q];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(top(r, k));
    if (std::any_of(r.begin(), end, [&](const SearchHit& h) { return h.study_id == truth_ids[q]; }))
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mean_similarity_at_k(std::span<const SearchResult> results, std::size_t k) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : results) {
    for (std::size_t j = 0; j < top(r, k); ++j) {
      sum += r[j].score;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double label_precision_at_k(std::span<const SearchResult> results,
                            std::span<const Label> query_labels, std::size_t k) {
  require_same_size(results.size(), query_labels.size(), "label_precision_at_k");
  if (results.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const std::size_t n = top(results[q], k);
    if (n == 0) continue;
    std::size_t match = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (results[q][j].label == query_labels[q]) ++match;
    sum += static_cast<double>(match) / static_cast<double>(n);
  }
  return sum / static_cast<double>(results.size());
}

double binary_f1(std::span<const Label> predicted, std::span<const Label> truth) {
  require_same_size(predicted.size(), truth.size(), "binary_f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Label::Abnormal;
    const bool t = truth[i] == Label::Abnormal;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double roc_auc(std::span<const double> scores, std::span<const Label> truth) {
  require_same_size(scores.size(), truth.size(), "roc_auc");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] == Label::Abnormal) pos.push_back(scores[i]);
    else if (truth[i] == Label::Normal) neg.push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) return 0.5;
  // Count pairs by sorting negatives once.
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double average_precision(std::span<const int> relevance) {
  double sum = 0.0;
  std::size_t relevant = 0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (!relevance[r]) continue;
    ++relevant;
    sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
  }
  return relevant == 0 ? 0.0 : sum / static_cast<double>(relevant);
}

double mean_average_precision(std::span<const SearchResult> results,
                              std::span<const Label> query_labels, std::size_t k) {
  require_same_size(results.size(), query_labels.size(), "mean_average_precision");
  if (results.empty()) return 0.0;
  double sum = 0.0;
  std::vector<int> rel;
  for (std::size_t q = 0; q < results.size(); ++q) {
    rel.clear();
    for (std::size_t j = 0; j < top(results[q], k); ++j)
      rel.push_back(results[q][j].label == query_labels[q] ? 1 : 0);
    sum += average_precision(rel);
  }
  return sum / static_cast<double>(results.size());
}

double abnormality_score(const SearchResult& hits, std::size_t k) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < top(hits, k); ++j) {
    const double w = (1.0 + hits[j].score) / 2.0;
    den += w;
    if (hits[j].label == Label::Abnormal) num += w;
  }
  return den > 0.0 ? num / den : 0.5;
}

MetricsReport full_report(const FusedIndex& index, const EmbeddingSet& queries,
                          const ModelParams* params, Direction direction,
                          std::span<const std::size_t> ks, bool exclude_self) {
  if (ks.empty()) throw ParameterError("at least one k is required");
  if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
    throw ParameterError("k values must be positive");
  }
  if (queries.dim != index.dim()) {
    throw ShapeError("query dimension " + std::to_string(queries.dim) +
                     " does not match index dimension " + std::to_string(index.dim()));
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const Modality modality = query_modality(direction);

  std::vector<SearchResult> results;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  results.reserve(queries.size());
  for (const auto& rec : queries.records) {
    const Vector q = embed_modality(params, rec, modality);
    results.push_back(exclude_self ? index.search(q, kmax, rec.study_id) : index.search(q, kmax));
    ids.push_back(rec.study_id);
    labels.push_back(rec.label);
  }

  MetricsReport rep;
  rep.direction = direction;
  rep.exclude_self = exclude_self;
  rep.queries = queries.size();
  for (std::size_t k : ks) {
    rep.at_k.push_back({k, retrieval_accuracy(results, ids, k), mean_similarity_at_k(results, k),
                        label_precision_at_k(results, labels, k)});
  }

  std::vector<Label> predicted;
  std::vector<double> scores;
  for (const auto& r : results) {
    predicted.push_back(r.empty() ? Label::Unlabeled : r.front().label);
    scores.push_back(abnormality_score(r, kmax));
  }
  rep.f1 = binary_f1(predicted, labels);
  rep.roc_auc = roc_auc(scores, labels);
  rep.map = mean_average_precision(results, labels, kmax);
  return rep;
}

namespace {

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["direction"] = to_string(r.direction);
  j["exclude_self"] = r.exclude_self;
  j["queries"] = r.queries;
  auto& arr = j["at_k"] = nlohmann::ordered_json::array();
  for (const auto& a : r.at_k) {
    arr.push_back({{"k", a.k},
                   {"accuracy", a.accuracy},
                   {"mean_similarity", a.mean_similarity},
                   {"precision", a.precision}});
  }
  j["f1"] = r.f1;
  j["roc_auc"] = r.roc_auc;
  j["map"] = r.map;
  return j;
}

std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

}  // namespace

std::string report_json(const MetricsReport& r) { return to_json(r).dump(); }

std::string reports_json(std::span<const MetricsReport> reports) {
  nlohmann::ordered_json j;
  auto& arr = j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return j.dump(2);
}

std::string render_table(std::span<const MetricsReport> reports) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto add = [&](const std::string& name, auto&& cell) {
    std::vector<std::string> cells;
    for (const auto& r : reports) cells.push_back(cell(r));
    rows.emplace_back(name, std::move(cells));
  };
  auto at = [](const MetricsReport& r, std::size_t i) -> const AtK& { return r.at_k[i]; };
  if (reports.empty()) return {};
  const auto& ref = reports.front();

  rows.emplace_back("Retrieval accuracy", std::vector<std::string>(reports.size()));
  for (std::size_t i = 0; i < ref.at_k.size(); ++i) {
    const std::size_t k = ref.at_k[i].k;
    add("Accuracy@" + std::to_string(k), [&](const MetricsReport& r) { return fmt3(at(r, i).accuracy); });
    add((k == 1 ? "Similarity score@" : "Mean similarity score@") + std::to_string(k),
        [&](const MetricsReport& r) { return fmt3(at(r, i).mean_similarity); });
  }
  rows.emplace_back("Precision by binary labels", std::vector<std::string>(reports.size()));
  for (std::size_t i = 0; i < ref.at_k.size(); ++i) {
    const std::size_t k = ref.at_k[i].k;
    add("Precision@" + std::to_string(k), [&](const MetricsReport& r) { return fmt3(at(r, i).precision); });
    if (i == 0) {
      add("F1 score", [](const MetricsReport& r) { return fmt3(r.f1); });
      add("ROC AUC", [](const MetricsReport& r) { return fmt3(r.roc_auc); });
      add("mAP", [](const MetricsReport& r) { return fmt3(r.map); });
    }
  }

  std::size_t name_w = std::string("Metrics").size();
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
  std::vector<std::string> headers;
  for (const auto& r : reports) {
    headers.push_back(r.direction == Direction::ImageToText ? "image-to-text" : "text-to-image");
  }
  std::string out;
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  out += pad("Metrics", name_w);
  for (const auto& h : headers) out += "  " + pad(h, 13);
  out += '\n';
  for (const auto& [name, cells] : rows) {
    std::string line = pad(name, name_w);
    for (const auto& c : cells) line += "  " + pad(c, 13);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  if (ref.exclude_self) out += "(self-matches excluded)\n";
  return out;
}

}  // namespace xmodal
