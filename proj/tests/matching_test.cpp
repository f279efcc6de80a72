#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "insdet/matching.hpp"
#include "oracles/matching_oracle.hpp"

namespace insdet {
namespace {

FeatureVector fv(std::string id, std::vector<float> v) { return {std::move(id), std::move(v)}; }

std::vector<int> as_index_match(const SimilarityMatrix& m, const MatchResult& r) {
  std::vector<int> match(m.rows(), -1);
  for (const auto& p : r.pairs) {
    const auto row = std::find(m.proposal_ids().begin(), m.proposal_ids().end(), p.proposal_id) -
                     m.proposal_ids().begin();
    const auto col = std::find(m.instance_ids().begin(), m.instance_ids().end(), p.instance_id) -
                     m.instance_ids().begin();
    match[row] = static_cast<int>(col);
  }
  return match;
}

oracle::Matrix to_oracle(const SimilarityMatrix& m) {
  oracle::Matrix out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m.at(r, c);
  }
  return out;
}

TEST(CosineTest, Identity) {
  const auto x = fv("x", {0.3f, -1.2f, 4.0f});
  EXPECT_NEAR(cosine_similarity(x, x), 1.0, 1e-12);
}

TEST(CosineTest, Orthogonal) {
  EXPECT_EQ(cosine_similarity(fv("a", {1, 0, 0}), fv("b", {0, 1, 0})), 0.0);
}

TEST(CosineTest, FortyFiveDegrees) {
  // Brute force: dot = 1, |a| = 1, |b| = sqrt(2).
  const double brute = 1.0 / (1.0 * std::sqrt(1.0 * 1.0 + 1.0 * 1.0));
  EXPECT_NEAR(brute, std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(fv("a", {1, 0}), fv("b", {1, 1})), brute, 1e-12);
  EXPECT_NEAR(cosine_similarity(fv("a", {1, 0}), fv("b", {1, 1})), 0.70710678, 1e-8);
}

TEST(CosineTest, Errors) {
  try {
    cosine_similarity(fv("a", {1, 0}), fv("b", {1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
  try {
    cosine_similarity(fv("a", {0, 0}), fv("b", {1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroNorm);
  }
}

TEST(CosineTest, PositiveScaleInvariance) {
  std::mt19937 gen(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_real_distribution<float> alpha(0.01f, 100.0f);
  for (int trial = 0; trial < 500; ++trial) {
    FeatureVector x{"x", std::vector<float>(16)}, y{"y", std::vector<float>(16)};
    for (auto& v : x.values) v = n(gen);
    for (auto& v : y.values) v = n(gen);
    FeatureVector scaled = x;
    const float a = alpha(gen);
    for (auto& v : scaled.values) v *= a;
    ASSERT_NEAR(cosine_similarity(scaled, y), cosine_similarity(x, y), 1e-6);
    ASSERT_EQ(cosine_similarity(x, y), cosine_similarity(y, x));
  }
}

TEST(AggregateTest, MaxOverViews) {
  const auto p = fv("p", {1, 0});
  // Views at angles with cosines 0.2, 0.9, 0.5 to p.
  auto at_cos = [](std::string id, double c) {
    return fv(std::move(id), {float(c), float(std::sqrt(1 - c * c))});
  };
  std::vector<FeatureVector> views{at_cos("v0", 0.2), at_cos("v1", 0.9), at_cos("v2", 0.5)};
  EXPECT_NEAR(aggregate_similarity(p, views), 0.9, 1e-6);
  EXPECT_EQ(aggregate_similarity(p, std::span(views).subspan(2, 1)), cosine_similarity(p, views[2]));
  std::vector<FeatureVector> none;
  EXPECT_THROW(aggregate_similarity(p, none), Error);
}

TEST(AggregateTest, PermutationInvariantExactly) {
  std::mt19937 gen(9);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    FeatureVector p{"p", std::vector<float>(8)};
    for (auto& v : p.values) v = n(gen);
    std::vector<FeatureVector> views(6, FeatureVector{"v", std::vector<float>(8)});
    for (auto& view : views) {
      for (auto& v : view.values) v = n(gen);
    }
    const double base = aggregate_similarity(p, views);
    std::shuffle(views.begin(), views.end(), gen);
    ASSERT_EQ(aggregate_similarity(p, views), base);
  }
}

TEST(SimilarityMatrixTest, EntriesAreMaxOverViews) {
  std::vector<FeatureVector> props{fv("a", {1, 0}), fv("b", {0, 1})};
  std::vector<InstanceProfile> insts{{7, {fv("7/0", {1, 1}), fv("7/1", {1, 0})}},
                                     {9, {fv("9/0", {-1, 0})}}};
  for (unsigned threads : {1u, 2u}) {
    const auto m = similarity_matrix(props, insts, threads);
    ASSERT_EQ(m.rows(), 2u);
    ASSERT_EQ(m.cols(), 2u);
    EXPECT_EQ(m.at(0, 0), aggregate_similarity(props[0], insts[0].views));
    EXPECT_EQ(m.at(1, 0), aggregate_similarity(props[1], insts[0].views));
    EXPECT_EQ(m.at(0, 1), -1.0);
    EXPECT_EQ(m.instance_ids(), (std::vector<InstanceId>{7, 9}));
  }
  std::vector<FeatureVector> bad{fv("c", {1, 0, 0})};
  EXPECT_THROW(similarity_matrix(bad, insts), Error);
}

TEST(ThresholdFilterTest, VacuousThresholdKeepsEverything) {
  const auto m = SimilarityMatrix::from_rows({{-0.5, 0.1}, {0.2, -1.0}});
  const auto f = threshold_filter(m, -1.0);
  EXPECT_EQ(f.rows(), 2u);
  EXPECT_EQ(f.cols(), 2u);
}

TEST(ThresholdFilterTest, TotalFilter) {
  const auto f = threshold_filter(SimilarityMatrix::from_rows({{0.99, 0.5}, {0.2, 0.3}}), 1.0);
  EXPECT_TRUE(f.empty());
  EXPECT_EQ(f.rows(), 0u);
}

TEST(ThresholdFilterTest, HandEvaluatedMaxima) {
  // Row maxima 0.9, 0.3 and column maxima 0.9, 0.3: at tau = 0.4 both the
  // second proposal and the second instance fall out.
  const auto f = threshold_filter(SimilarityMatrix::from_rows({{0.9, 0.1}, {0.2, 0.3}}), 0.4);
  ASSERT_EQ(f.rows(), 1u);
  ASSERT_EQ(f.cols(), 1u);
  EXPECT_EQ(f.at(0, 0), 0.9);
  EXPECT_EQ(f.proposal_ids(), (std::vector<std::string>{"p0"}));
  EXPECT_EQ(f.row_index(), (std::vector<std::size_t>{0}));
  EXPECT_EQ(f.col_index(), (std::vector<std::size_t>{0}));
}

TEST(ThresholdFilterTest, IndexMapPointsBackToOriginal) {
  const auto f = threshold_filter(
      SimilarityMatrix::from_rows({{0.1, 0.1, 0.1}, {0.1, 0.1, 0.8}, {0.7, 0.1, 0.1}}), 0.5);
  EXPECT_EQ(f.row_index(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(f.col_index(), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(f.at(0, 1), 0.8);
  EXPECT_EQ(f.at(1, 0), 0.7);
  EXPECT_THROW(threshold_filter(f, 1.5), Error);
}

TEST(ThresholdFilterTest, MonotoneInTau) {
  std::mt19937 gen(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> rows(7, std::vector<double>(5));
    for (auto& r : rows) {
      for (auto& v : r) v = u(gen);
    }
    const auto m = SimilarityMatrix::from_rows(rows);
    double lo = u(gen), hi = u(gen);
    if (lo > hi) std::swap(lo, hi);
    const auto a = threshold_filter(m, lo), b = threshold_filter(m, hi);
    ASSERT_LE(b.rows(), a.rows());
    ASSERT_LE(b.cols(), a.cols());
    for (auto r : b.row_index()) {
      ASSERT_NE(std::find(a.row_index().begin(), a.row_index().end(), r), a.row_index().end());
    }
    for (auto c : b.col_index()) {
      ASSERT_NE(std::find(a.col_index().begin(), a.col_index().end(), c), a.col_index().end());
    }
  }
}

TEST(RankSelectTest, Singleton) {
  const auto r = rank_select(SimilarityMatrix::from_rows({{0.8}}));
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.8}));
}

TEST(RankSelectTest, GreedyWithProposalRemovalOnly) {
  const auto r = rank_select(SimilarityMatrix::from_rows({{0.9, 0.1}, {0.8, 0.85}}));
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.9}));
  EXPECT_EQ(r.pairs[1], (MatchPair{"p1", 1, 0.85}));
}

TEST(RankSelectTest, InstancesStayAvailable) {
  const auto r = rank_select(SimilarityMatrix::from_rows({{0.9, 0.1}, {0.8, 0.3}}));
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[1], (MatchPair{"p1", 0, 0.8}));
  EXPECT_EQ(r.unmatched_instances, (std::vector<InstanceId>{1}));
}

TEST(RankSelectTest, TiesResolveByProposalThenInstanceOrder) {
  const auto r = rank_select(SimilarityMatrix::from_rows({{0.5, 0.5}, {0.5, 0.2}, {0.5, 0.3}}));
  ASSERT_EQ(r.pairs.size(), 3u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.5}));
  EXPECT_EQ(r.pairs[1], (MatchPair{"p1", 0, 0.5}));
  EXPECT_EQ(r.pairs[2], (MatchPair{"p2", 0, 0.5}));
}

TEST(RankSelectTest, StrictModeRetiresInstances) {
  const auto m = threshold_filter(SimilarityMatrix::from_rows({{0.9, 0.1}, {0.8, 0.35}, {0.7, 0.2}}), 0.3);
  const auto r = rank_select(m, true);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.9}));
  EXPECT_EQ(r.pairs[1], (MatchPair{"p1", 1, 0.35}));
  // p2's only acceptable instance is taken and 0.2 < tau.
  EXPECT_EQ(r.unmatched_proposals, (std::vector<std::string>{"p2"}));
}

TEST(RankSelectTest, EveryProposalAssignedExactlyOnce) {
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> rows(9, std::vector<double>(4));
    for (auto& r : rows) {
      for (auto& v : r) v = u(gen);
    }
    const auto m = threshold_filter(SimilarityMatrix::from_rows(rows), 0.0);
    const auto r = rank_select(m);
    ASSERT_EQ(r.pairs.size(), m.rows());
    for (const auto& p : r.pairs) ASSERT_GE(p.score, 0.0);
    std::vector<std::string> ids;
    for (const auto& p : r.pairs) ids.push_back(p.proposal_id);
    std::sort(ids.begin(), ids.end());
    ASSERT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
  }
}

TEST(StableMatchingTest, Singleton) {
  const auto r = stable_matching(SimilarityMatrix::from_rows({{0.4}}));
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.4}));
}

TEST(StableMatchingTest, HandTrace) {
  const auto m = SimilarityMatrix::from_rows({{0.9, 0.8}, {0.85, 0.7}});
  const auto r = stable_matching(m);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0], (MatchPair{"p0", 0, 0.9}));
  EXPECT_EQ(r.pairs[1], (MatchPair{"p1", 1, 0.7}));
  EXPECT_EQ(oracle::count_blocking_pairs(to_oracle(m), as_index_match(m, r), m.threshold()), 0);
}

TEST(StableMatchingTest, RectangularLeftoversAreReported) {
  const auto wide = stable_matching(SimilarityMatrix::from_rows({{0.9, 0.8, 0.7}}));
  EXPECT_EQ(wide.unmatched_instances, (std::vector<InstanceId>{1, 2}));
  const auto tall = stable_matching(SimilarityMatrix::from_rows({{0.9}, {0.8}, {0.95}}));
  ASSERT_EQ(tall.pairs.size(), 1u);
  EXPECT_EQ(tall.pairs[0].proposal_id, "p2");
  EXPECT_EQ(tall.unmatched_proposals, (std::vector<std::string>{"p0", "p1"}));
}

TEST(StableMatchingTest, BelowThresholdEntriesAreNeverMatched) {
  const auto m = threshold_filter(SimilarityMatrix::from_rows({{0.9, 0.2}, {0.8, 0.1}, {0.1, 0.6}}), 0.5);
  const auto r = stable_matching(m);
  for (const auto& p : r.pairs) EXPECT_GE(p.score, 0.5);
  EXPECT_EQ(r.unmatched_proposals, (std::vector<std::string>{"p1"}));
}

TEST(StableMatchingTest, RandomSixBySixHasNoBlockingPair) {
  std::mt19937 gen(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::vector<double>> rows(6, std::vector<double>(6));
    for (auto& r : rows) {
      for (auto& v : r) v = std::round(u(gen) * 8) / 8;  // many ties
    }
    const double tau = std::round(u(gen) * 4) / 4;
    const auto m = threshold_filter(SimilarityMatrix::from_rows(rows), tau);
    const auto r = stable_matching(m);
    const auto match = as_index_match(m, r);
    ASSERT_TRUE(oracle::one_to_one(match));
    ASSERT_EQ(oracle::count_blocking_pairs(to_oracle(m), match, m.threshold()), 0) << trial;
  }
}

TEST(StableMatchingTest, DeterministicAndOrderOfIdsDrivesTies) {
  const auto m = SimilarityMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  const auto a = stable_matching(m), b = stable_matching(m);
  ASSERT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.pairs[0], (MatchPair{"p0", 0, 0.5}));
  EXPECT_EQ(a.pairs[1], (MatchPair{"p1", 1, 0.5}));
}

TEST(ToDetectionsTest, CarriesScoreAndBox) {
  MatchResult r;
  EXPECT_TRUE(to_detections(r, {}, 1).empty());
  r.pairs.push_back({"p3", 42, 0.73});
  std::vector<ProposalBox> boxes{{"p3", {1, 2, 3, 4}}};
  const auto dets = to_detections(r, boxes, 5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0], (Detection{5, 42, {1, 2, 3, 4}, 0.73}));
  r.pairs.push_back({"missing", 1, 0.5});
  try {
    to_detections(r, boxes, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBox);
  }
}

TEST(ToDetectionsTest, SamePairsSameDetectionsForEitherMatcher) {
  // A diagonal-dominant matrix where both matchers agree.
  const auto m = SimilarityMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  std::vector<ProposalBox> boxes{{"p0", {0, 0, 4, 4}}, {"p1", {5, 5, 9, 9}}};
  EXPECT_EQ(to_detections(rank_select(m), boxes, 1), to_detections(stable_matching(m), boxes, 1));
}

}  // namespace
}  // namespace insdet
