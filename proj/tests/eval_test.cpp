#include <gtest/gtest.h>

#include <random>

#include "insdet/eval.hpp"
#include "oracles/reference_eval.hpp"
#include "support/random_inputs.hpp"

namespace insdet {
namespace {

GroundTruth gt(ImageId img, InstanceId inst, BoundingBox b) { return {img, inst, b, {}, {}}; }
Detection det(ImageId img, InstanceId inst, BoundingBox b, double s) { return {img, inst, b, s}; }

EvalInput single(std::vector<Detection> dets, std::vector<GroundTruth> gts) {
  EvalInput in;
  in.detections = std::move(dets);
  in.ground_truth = std::move(gts);
  in.images = {{1, "a.png", 640, 480, SceneTag::kEasy}};
  return in;
}

TEST(MatchTest, DuplicateDetectionIsFalsePositive) {
  const std::vector<GroundTruth> g{gt(1, 1, {10, 10, 50, 50})};
  const std::vector<Detection> d{det(1, 1, {10, 10, 50, 50}, 0.6), det(1, 1, {10, 10, 50, 50}, 0.9)};
  const auto m = match_at_iou(d, g, {});
  EXPECT_EQ(m.labels[1], MatchLabel::kTruePositive);
  EXPECT_EQ(m.labels[0], MatchLabel::kFalsePositive);
  EXPECT_EQ(m.matched_gt[1], 0);
}

TEST(MatchTest, BelowThresholdIsFalsePositive) {
  // Overlap 40 of 100 area units: IoU = 40 / 160 = 0.25 < 0.5.
  const std::vector<GroundTruth> g{gt(1, 1, {0, 0, 10, 10})};
  const std::vector<Detection> d{det(1, 1, {6, 0, 16, 10}, 0.9)};
  EXPECT_EQ(match_at_iou(d, g, {}).labels[0], MatchLabel::kFalsePositive);
}

TEST(MatchTest, WrongClassNeverMatchesUnlessAgnostic) {
  const std::vector<GroundTruth> g{gt(1, 1, {0, 0, 10, 10})};
  const std::vector<Detection> d{det(1, 2, {0, 0, 10, 10}, 0.9)};
  EXPECT_EQ(match_at_iou(d, g, {}).labels[0], MatchLabel::kFalsePositive);
  EXPECT_EQ(match_at_iou(d, g, {0.5, true, {}}).labels[0], MatchLabel::kTruePositive);
}

TEST(MatchTest, ThresholdOutOfRange) {
  EXPECT_THROW(match_at_iou({}, {}, {0.0, false, {}}), Error);
}

TEST(ApTest, FalsePositiveThenTruePositive) {
  const std::vector<MatchLabel> ranked{MatchLabel::kFalsePositive, MatchLabel::kTruePositive};
  const auto q = interpolated_precision(ranked, 1);
  for (double v : q) EXPECT_EQ(v, 0.5);
  EXPECT_NEAR(*average_precision(ranked, 1), 0.5, 1e-9);
}

TEST(ApTest, FixtureFpTpGivesHalf) {
  auto in = single({det(1, 1, {100, 100, 140, 140}, 0.9), det(1, 1, {0, 0, 40, 40}, 0.8)},
                   {gt(1, 1, {0, 0, 40, 40})});
  EXPECT_NEAR(*coco_ap(in).ap50, 0.5, 1e-9);
}

TEST(ApTest, PerfectIsExactlyOne) {
  auto in = single({det(1, 1, {0, 0, 40, 40}, 0.9), det(1, 2, {50, 50, 90, 80}, 0.3)},
                   {gt(1, 1, {0, 0, 40, 40}), gt(1, 2, {50, 50, 90, 80})});
  const auto s = coco_ap(in);
  EXPECT_EQ(*s.ap, 1.0);
  EXPECT_EQ(*s.ap50, 1.0);
  EXPECT_EQ(*s.ap75, 1.0);
}

TEST(ApTest, EmptyDetectionsIsZero) {
  auto in = single({}, {gt(1, 1, {0, 0, 40, 40})});
  const auto s = coco_ap(in);
  EXPECT_EQ(*s.ap, 0.0);
  EXPECT_EQ(*s.ap50, 0.0);
  EXPECT_EQ(*average_recall(in, 100), 0.0);
}

TEST(ApTest, NoGroundTruthIsUndefined) {
  auto in = single({det(1, 1, {0, 0, 40, 40}, 0.9)}, {});
  EXPECT_FALSE(coco_ap(in).ap.has_value());
  EXPECT_FALSE(average_recall(in, 10).has_value());
}

TEST(ApTest, ClassesWithoutGroundTruthDropOut) {
  // Class 2 has only a stray detection; it does not drag the mean down.
  auto in = single({det(1, 1, {0, 0, 40, 40}, 0.9), det(1, 2, {0, 0, 40, 40}, 0.8)},
                   {gt(1, 1, {0, 0, 40, 40})});
  EXPECT_EQ(*coco_ap(in).ap, 1.0);
}

TEST(ApTest, UnknownInstanceIsRejected) {
  auto in = single({det(1, 9, {0, 0, 4, 4}, 0.5)}, {gt(1, 1, {0, 0, 4, 4})});
  in.catalog = {1, 2};
  try {
    coco_ap(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownId);
    EXPECT_NE(std::string(e.what()).find('9'), std::string::npos);
  }
}

TEST(PrCurveTest, TpThenFpStaircase) {
  auto in = single({det(1, 1, {0, 0, 40, 40}, 0.9), det(1, 1, {100, 100, 140, 140}, 0.8)},
                   {gt(1, 1, {0, 0, 40, 40})});
  const auto pr = pr_curve(in);
  ASSERT_EQ(pr.classes.size(), 1u);
  EXPECT_EQ(pr.classes[0].staircase,
            (std::vector<PrPoint>{{0.0, 1.0}, {1.0, 1.0}, {1.0, 0.5}}));
  EXPECT_EQ(*pr.ap, 1.0);
}

TEST(PrCurveTest, FpThenTpStaircase) {
  auto in = single({det(1, 1, {100, 100, 140, 140}, 0.9), det(1, 1, {0, 0, 40, 40}, 0.8)},
                   {gt(1, 1, {0, 0, 40, 40})});
  const auto pr = pr_curve(in);
  EXPECT_EQ(pr.classes[0].staircase,
            (std::vector<PrPoint>{{0.0, 1.0}, {0.0, 0.0}, {1.0, 0.5}}));
  EXPECT_NEAR(*pr.ap, *coco_ap(in).ap50, 1e-12);
}

TEST(BreakdownTest, SceneSubsetsRestrictBothSides) {
  EvalInput in;
  in.images = {{1, "e.png", 640, 480, SceneTag::kEasy}, {2, "h.png", 640, 480, SceneTag::kHard}};
  in.ground_truth = {gt(1, 1, {0, 0, 40, 40}), gt(2, 1, {0, 0, 40, 40})};
  in.detections = {det(1, 1, {0, 0, 40, 40}, 0.9), det(2, 1, {300, 300, 340, 340}, 0.95)};
  EXPECT_EQ(*coco_ap(in, Breakdown::kEasy).ap, 1.0);
  EXPECT_EQ(*coco_ap(in, Breakdown::kHard).ap, 0.0);
}

TEST(BreakdownTest, SizeBandIgnoresOtherSizes) {
  auto in = single({det(1, 1, {0, 0, 300, 300}, 0.9), det(1, 1, {400, 0, 420, 20}, 0.8)},
                   {gt(1, 1, {0, 0, 300, 300}), gt(1, 1, {400, 0, 420, 20})});
  EXPECT_EQ(*coco_ap(in, Breakdown::kMedium).ap, 1.0);
  EXPECT_EQ(*coco_ap(in, Breakdown::kSmall).ap, 1.0);
  EXPECT_FALSE(coco_ap(in, Breakdown::kLarge).ap.has_value());
}

TEST(ArTest, TopKPerImageAndGrids) {
  // Two GT, two detections; only one fits under max_k = 1.
  auto in = single({det(1, 1, {0, 0, 40, 40}, 0.9), det(1, 2, {50, 0, 90, 40}, 0.8)},
                   {gt(1, 1, {0, 0, 40, 40}), gt(1, 2, {50, 0, 90, 40})});
  EXPECT_EQ(*average_recall(in, 1), 0.5);
  EXPECT_EQ(*average_recall(in, 10), 1.0);
  EXPECT_EQ(*average_recall(in, 10, Breakdown::kAvg, ArGrid::kCoco), 1.0);
  EXPECT_THROW(average_recall(in, 0), Error);
  EXPECT_EQ(ar_iou_thresholds(ArGrid::kLiteral).size(), 11u);
  EXPECT_EQ(ar_iou_thresholds(ArGrid::kLiteral).back(), 1.0);
  EXPECT_EQ(ar_iou_thresholds(ArGrid::kCoco).size(), 10u);
}

TEST(ArTest, ClassAgnostic) {
  auto in = single({det(1, 2, {0, 0, 40, 40}, 0.9)}, {gt(1, 1, {0, 0, 40, 40})});
  EXPECT_EQ(*average_recall(in, 10), 1.0);
  EXPECT_EQ(*coco_ap(in).ap, 0.0);
}

// Random micro-instances compared against the brute-force evaluator.

using fixtures::random_micro;

void expect_close(const std::optional<double>& a, const std::optional<double>& b, int trial,
                  const char* what) {
  ASSERT_EQ(a.has_value(), b.has_value()) << what << " trial " << trial;
  if (a) ASSERT_NEAR(*a, *b, 1e-9) << what << " trial " << trial;
}

TEST(OracleTest, RandomMicroInstancesAgree) {
  std::mt19937 gen(2024);
  const std::pair<Breakdown, std::pair<oracle::Scene, oracle::Band>> cases[] = {
      {Breakdown::kAvg, {oracle::Scene::kAll, oracle::Band::kAll}},
      {Breakdown::kHard, {oracle::Scene::kHard, oracle::Band::kAll}},
      {Breakdown::kEasy, {oracle::Scene::kEasy, oracle::Band::kAll}},
      {Breakdown::kSmall, {oracle::Scene::kAll, oracle::Band::kSmall}},
      {Breakdown::kMedium, {oracle::Scene::kAll, oracle::Band::kMedium}},
      {Breakdown::kLarge, {oracle::Scene::kAll, oracle::Band::kLarge}},
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_micro(gen);
    for (const auto& [b, ref] : cases) {
      const auto scoped = oracle::scope(m.in.detections, m.in.ground_truth, m.tags, ref.first);
      const auto got = coco_ap(m.in, b);
      const auto want = oracle::coco_ap(scoped, ref.second);
      expect_close(got.ap, want.ap, trial, "AP");
      expect_close(got.ap50, want.ap50, trial, "AP50");
      expect_close(got.ap75, want.ap75, trial, "AP75");
      for (int k : {1, 3, 100}) {
        expect_close(average_recall(m.in, k, b, ArGrid::kLiteral),
                     oracle::average_recall(scoped, k, ref.second, true), trial, "AR literal");
        expect_close(average_recall(m.in, k, b, ArGrid::kCoco),
                     oracle::average_recall(scoped, k, ref.second, false), trial, "AR coco");
      }
    }
  }
}

TEST(InvarianceTest, PositiveScoreRescalingChangesNothing) {
  std::mt19937 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = random_micro(gen);
    const auto base = evaluate(m.in);
    for (double c : {0.25, 2.0, 1024.0}) {
      auto scaled = m.in;
      for (auto& d : scaled.detections) d.score *= c;
      const auto r = evaluate(scaled);
      for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
        ASSERT_EQ(r.ap[i].ap, base.ap[i].ap);
        ASSERT_EQ(r.ap[i].per_threshold, base.ap[i].per_threshold);
      }
      for (std::size_t k = 0; k < r.ar.size(); ++k) {
        ASSERT_EQ(r.ar[k].by_breakdown, base.ar[k].by_breakdown);
      }
      ASSERT_EQ(r.pr50.mean_interpolated, base.pr50.mean_interpolated);
    }
  }
}

TEST(ReportTest, ThreadsDoNotChangeResults) {
  std::mt19937 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_micro(gen);
    EvalConfig one, four;
    four.threads = 4;
    const auto a = evaluate(m.in, one), b = evaluate(m.in, four);
    for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
      ASSERT_EQ(a.ap[i].per_threshold, b.ap[i].per_threshold);
    }
  }
}

}  // namespace
}  // namespace insdet
