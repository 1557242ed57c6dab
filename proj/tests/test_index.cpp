#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "xmodal/error.hpp"
#include "xmodal/index.hpp"
#include "xmodal/synthetic.hpp"

using namespace xmodal;

namespace {

FusedIndex random_index(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  const Matrix m = oracle::random_unit_rows(n, d, rng);
  std::vector<IndexEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    entries.push_back({"E" + std::to_string(i), i % 3 ? Label::Abnormal : Label::Normal,
                       oracle::row_of(m, i)});
  }
  return FusedIndex(d, std::move(entries));
}

}  // namespace

TEST(Index, TwoEntryExample) {
  const FusedIndex idx(2, {{"x", Label::Normal, {1.0, 0.0}}, {"y", Label::Abnormal, {0.0, 1.0}}});
  const auto hits = idx.search(Vector{0.6, 0.8}, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].study_id, "y");
  EXPECT_NEAR(hits[0].score, 0.8, 1e-15);
  EXPECT_EQ(hits[0].position, 1u);
}

TEST(Index, QueryIsNormalized) {
  const FusedIndex idx(2, {{"x", Label::Normal, {1.0, 0.0}}});
  EXPECT_NEAR(idx.search(Vector{30.0, 40.0}, 1)[0].score, 0.6, 1e-15);
}

TEST(Index, TiesFollowInsertionOrder) {
  const FusedIndex idx(2, {{"a", Label::Normal, {0.0, 1.0}},
                           {"b", Label::Normal, {1.0, 0.0}},
                           {"c", Label::Normal, {1.0, 0.0}},
                           {"d", Label::Normal, {1.0, 0.0}}});
  const auto hits = idx.search(Vector{1.0, 0.0}, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].study_id, "b");
  EXPECT_EQ(hits[1].study_id, "c");
  EXPECT_EQ(hits[2].study_id, "d");
}

TEST(Index, KLargerThanIndexAndExclusion) {
  const FusedIndex idx(2, {{"a", Label::Normal, {0.0, 1.0}}, {"b", Label::Normal, {1.0, 0.0}}});
  EXPECT_EQ(idx.search(Vector{1.0, 0.0}, 10).size(), 2u);
  const auto hits = idx.search(Vector{1.0, 0.0}, 10, "b");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].study_id, "a");
}

TEST(Index, Errors) {
  const FusedIndex idx(2, {{"a", Label::Normal, {0.0, 1.0}}});
  EXPECT_THROW(idx.search(Vector{1.0, 0.0}, 0), ParameterError);
  EXPECT_THROW(idx.search(Vector{1.0, 0.0, 0.0}, 1), ShapeError);
  EXPECT_THROW(idx.search(Vector{0.0, 0.0}, 1), DegenerateVectorError);
  EXPECT_THROW(FusedIndex(2, {{"a", Label::Normal, {2.0, 0.0}}}), BuildError);
  EXPECT_THROW(FusedIndex(2, {{"a", Label::Normal, {1.0}}}), ShapeError);
  EXPECT_THROW(build_index(EmbeddingSet{}), BuildError);
  EmbeddingSet zero;
  zero.dim = 2;
  zero.records.push_back({"z", Label::Normal, {0.0, 0.0}, {1.0, 0.0}});
  EXPECT_THROW(build_index(zero), BuildError);
}

TEST(Index, MatchesBruteForce) {
  std::mt19937_64 rng(77);
  const FusedIndex idx = random_index(1000, 12, rng);
  for (int q = 0; q < 50; ++q) {
    const Matrix query = oracle::random_matrix(1, 12, rng);
    const auto expected = oracle::brute_force_rank(idx, oracle::row_of(query, 0));
    const auto hits = idx.search(query.row(0), 25);
    ASSERT_EQ(hits.size(), 25u);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      EXPECT_EQ(hits[r].position, expected[r].position);
      EXPECT_EQ(hits[r].study_id, idx.entries()[expected[r].position].study_id);
      EXPECT_NEAR(hits[r].score, expected[r].score, 1e-12);
    }
  }
}

TEST(Index, SelfQueryRanksFirst) {
  std::mt19937_64 rng(78);
  const FusedIndex idx = random_index(300, 8, rng);
  for (std::size_t i = 0; i < idx.size(); i += 7) {
    const auto hits = idx.search(idx.entries()[i].vector, 1);
    EXPECT_EQ(hits[0].position, i);
    EXPECT_NEAR(hits[0].score, 1.0, 1e-9);
  }
}

TEST(Index, FusedEntriesAndQueryById) {
  SynthSpec spec;
  spec.n = 20;
  spec.dim = 6;
  const EmbeddingSet set = make_synthetic(spec);
  const FusedIndex idx = build_index(set);
  const auto& r = set.records[3];
  const Vector expect = fuse(l2_normalize(r.image), l2_normalize(r.text));
  EXPECT_EQ(idx.entries()[3].vector, expect);

  const auto hits = query_by_id(idx, set, nullptr, r.study_id, Modality::Text, 5);
  EXPECT_EQ(hits, idx.search(l2_normalize(r.text), 5));
  const auto excl = query_by_id(idx, set, nullptr, r.study_id, Modality::Image, 19, true);
  EXPECT_EQ(excl.size(), 19u);
  for (const auto& h : excl) EXPECT_NE(h.study_id, r.study_id);
  EXPECT_THROW(query_by_id(idx, set, nullptr, "missing", Modality::Image, 1), NotFoundError);
}

TEST(Index, IdentityAdaptersMatchRawEmbeddings) {
  SynthSpec spec;
  spec.n = 15;
  spec.dim = 5;
  const EmbeddingSet set = make_synthetic(spec);
  const ModelParams p = init_params(5, 1);
  const FusedIndex a = build_index(p, set), b = build_index(set);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(a.entries()[i].vector[k], b.entries()[i].vector[k]);
  }
}

TEST(Index, ModalityNames) {
  EXPECT_EQ(to_string(Modality::Image), "image");
  EXPECT_EQ(modality_from_string("text"), Modality::Text);
  EXPECT_EQ(modality_from_string("audio"), std::nullopt);
}
