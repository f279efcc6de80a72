#pragma once

// Detection metrics in the COCO style.
//
// AP is the instance-class mean of 101-point interpolated precision,
// averaged over IoU thresholds 0.50:0.05:0.95. AR is class-agnostic proposal
// recall with at most K detections per image, averaged over an IoU grid.
// Breakdowns: hard/easy restrict both ground truth and detections to
// images carrying the tag; small/medium/large mark out-of-band ground truth
// as ignored, and detections that match ignored ground truth (or match
// nothing while being out of band themselves) count as neither TP nor FP.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "insdet/error.hpp"
#include "insdet/geometry.hpp"
#include "insdet/parallel.hpp"
#include "insdet/records.hpp"

namespace insdet {

enum class ArGrid {
  kLiteral,  // 0.50:0.05:1.00, eleven points
  kCoco,     // 0.50:0.05:0.95, ten points
};

inline std::string_view to_string(ArGrid grid) {
  return grid == ArGrid::kLiteral ? "literal" : "coco";
}

inline std::vector<double> ap_iou_thresholds() {
  std::vector<double> t;
  for (int k = 50; k <= 95; k += 5) t.push_back(k / 100.0);
  return t;
}

inline std::vector<double> ar_iou_thresholds(ArGrid grid) {
  std::vector<double> t = ap_iou_thresholds();
  if (grid == ArGrid::kLiteral) t.push_back(1.0);
  return t;
}

inline constexpr int kRecallPoints = 101;

enum class MatchLabel { kTruePositive, kFalsePositive, kIgnored };

struct MatchOptions {
  double iou_threshold = 0.5;
  // Match any ground truth regardless of instance id.
  bool class_agnostic = false;
  // Ground truth outside the band is ignored.
  std::optional<SizeTag> size_band;
};

struct MatchOutcome {
  std::vector<MatchLabel> labels;           // per detection, input order
  std::vector<std::ptrdiff_t> matched_gt;   // ground-truth index or -1
  std::vector<bool> gt_ignored;             // per ground truth
  std::vector<bool> gt_matched;             // per ground truth
};

// Ranking order: score descending, ties by lower index.
inline std::vector<std::size_t> rank_by_score(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

// Greedy score-ordered matching within each (image, instance) group, or each
// image when class-agnostic. A detection takes the unmatched ground truth
// with the highest IoU >= threshold, preferring non-ignored ground truth;
// equal IoUs resolve to the later ground truth, as in the COCO reference.
inline MatchOutcome match_at_iou(std::span<const Detection> dets,
                                 std::span<const GroundTruth> gts,
                                 const MatchOptions& opts) {
  if (!(opts.iou_threshold > 0.0 && opts.iou_threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "IoU threshold must lie in (0, 1]");
  }
  MatchOutcome out;
  out.labels.assign(dets.size(), MatchLabel::kFalsePositive);
  out.matched_gt.assign(dets.size(), -1);
  out.gt_ignored.assign(gts.size(), false);
  out.gt_matched.assign(gts.size(), false);
  if (opts.size_band) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      out.gt_ignored[g] = gts[g].size() != *opts.size_band;
    }
  }

  using Key = std::pair<ImageId, InstanceId>;
  auto key_of = [&](ImageId img, InstanceId inst) {
    return Key{img, opts.class_agnostic ? InstanceId{0} : inst};
  };
  std::map<Key, std::vector<std::size_t>> gt_groups;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_groups[key_of(gts[g].image_id, gts[g].instance_id)].push_back(g);
  }
  for (auto& [key, members] : gt_groups) {
    std::stable_partition(members.begin(), members.end(),
                          [&](std::size_t g) { return !out.gt_ignored[g]; });
  }

  for (std::size_t d : rank_by_score(dets)) {
    auto it = gt_groups.find(key_of(dets[d].image_id, dets[d].instance_id));
    std::ptrdiff_t best = -1;
    if (it != gt_groups.end()) {
      double best_iou = opts.iou_threshold;
      for (std::size_t g : it->second) {
        if (out.gt_matched[g]) continue;
        if (best >= 0 && !out.gt_ignored[best] && out.gt_ignored[g]) break;
        const double v = iou(dets[d].box, gts[g].box);
        if (v < best_iou) continue;
        best_iou = v;
        best = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best >= 0) {
      out.gt_matched[best] = true;
      out.matched_gt[d] = best;
      out.labels[d] = out.gt_ignored[best] ? MatchLabel::kIgnored : MatchLabel::kTruePositive;
    } else if (opts.size_band && size_tag(dets[d].box) != *opts.size_band) {
      out.labels[d] = MatchLabel::kIgnored;
    }
  }
  return out;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

// Raw precision/recall after each non-ignored detection, in rank order.
inline std::vector<PrPoint> pr_points(std::span<const MatchLabel> ranked, std::size_t num_gt) {
  std::vector<PrPoint> pts;
  std::size_t tp = 0, fp = 0;
  for (auto label : ranked) {
    if (label == MatchLabel::kIgnored) continue;
    (label == MatchLabel::kTruePositive ? tp : fp) += 1;
    pts.push_back({double(tp) / double(num_gt), double(tp) / double(tp + fp)});
  }
  return pts;
}

// Precision sampled at recall k/100 after ceiling interpolation (precision at
// recall r is the best precision at any recall >= r; 0 past the last point).
inline std::array<double, kRecallPoints> interpolated_precision(std::span<const MatchLabel> ranked,
                                                                std::size_t num_gt) {
  std::array<double, kRecallPoints> q{};
  if (num_gt == 0) return q;
  auto pts = pr_points(ranked, num_gt);
  for (std::size_t i = pts.size(); i-- > 1;) {
    pts[i - 1].precision = std::max(pts[i - 1].precision, pts[i].precision);
  }
  for (int k = 0; k < kRecallPoints; ++k) {
    const double r = k / 100.0;
    auto it = std::lower_bound(pts.begin(), pts.end(), r,
                               [](const PrPoint& p, double v) { return p.recall < v; });
    q[k] = it == pts.end() ? 0.0 : it->precision;
  }
  return q;
}

// 101-point interpolated AP of one instance class. Nullopt when the class has
// no ground truth, so that it drops out of class means.
inline std::optional<double> average_precision(std::span<const MatchLabel> ranked,
                                               std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  const auto q = interpolated_precision(ranked, num_gt);
  double s = 0.0;
  for (double v : q) s += v;
  return s / kRecallPoints;
}

// Breakdown subsets of the evaluation set.
enum class Breakdown { kAvg, kHard, kEasy, kSmall, kMedium, kLarge };

inline constexpr std::array<Breakdown, 6> kBreakdowns = {
    Breakdown::kAvg, Breakdown::kHard, Breakdown::kEasy,
    Breakdown::kSmall, Breakdown::kMedium, Breakdown::kLarge};

inline std::string_view to_string(Breakdown b) {
  switch (b) {
    case Breakdown::kAvg: return "avg";
    case Breakdown::kHard: return "hard";
    case Breakdown::kEasy: return "easy";
    case Breakdown::kSmall: return "small";
    case Breakdown::kMedium: return "medium";
    case Breakdown::kLarge: return "large";
  }
  return "avg";
}

struct EvalInput {
  std::vector<Detection> detections;
  std::vector<GroundTruth> ground_truth;
  // Images with their scene tags; detections on images absent here are
  // treated as untagged.
  std::vector<ImageRecord> images;
  // Known instance ids; ids outside it are rejected. Empty skips the check.
  std::vector<InstanceId> catalog;
};

struct EvalConfig {
  ArGrid ar_grid = ArGrid::kLiteral;
  std::vector<int> ar_max_dets = {10, 100};
  unsigned threads = 1;
};

namespace detail {

struct Subset {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
  std::optional<SizeTag> size_band;
};

inline Subset make_subset(const EvalInput& in, Breakdown b) {
  Subset s;
  std::optional<SceneTag> scene;
  switch (b) {
    case Breakdown::kAvg: break;
    case Breakdown::kHard: scene = SceneTag::kHard; break;
    case Breakdown::kEasy: scene = SceneTag::kEasy; break;
    case Breakdown::kSmall: s.size_band = SizeTag::kSmall; break;
    case Breakdown::kMedium: s.size_band = SizeTag::kMedium; break;
    case Breakdown::kLarge: s.size_band = SizeTag::kLarge; break;
  }
  if (!scene) {
    s.dets = in.detections;
    s.gts = in.ground_truth;
    return s;
  }
  std::unordered_map<ImageId, std::optional<SceneTag>> tags;
  for (const auto& im : in.images) tags[im.id] = im.scene_tag;
  for (const auto& gt : in.ground_truth) {
    if (!tags.count(gt.image_id)) tags[gt.image_id] = gt.scene_tag;
  }
  auto in_scene = [&](ImageId id) {
    auto it = tags.find(id);
    return it != tags.end() && it->second == scene;
  };
  for (const auto& d : in.detections) {
    if (in_scene(d.image_id)) s.dets.push_back(d);
  }
  for (const auto& g : in.ground_truth) {
    if (in_scene(g.image_id)) s.gts.push_back(g);
  }
  return s;
}

// Per-class ranked labels and non-ignored ground-truth counts.
struct ClassLabels {
  std::map<InstanceId, std::vector<MatchLabel>> ranked;
  std::map<InstanceId, std::size_t> num_gt;
};

inline ClassLabels class_labels(const Subset& s, double t) {
  const auto m = match_at_iou(s.dets, s.gts, {t, false, s.size_band});
  ClassLabels out;
  for (std::size_t g = 0; g < s.gts.size(); ++g) {
    auto& n = out.num_gt[s.gts[g].instance_id];
    if (!m.gt_ignored[g]) ++n;
  }
  for (std::size_t d : rank_by_score(s.dets)) {
    out.ranked[s.dets[d].instance_id].push_back(m.labels[d]);
  }
  return out;
}

// Mean AP over classes that have non-ignored ground truth.
inline std::optional<double> class_mean_ap(const Subset& s, double t) {
  const auto cl = class_labels(s, t);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [cls, num_gt] : cl.num_gt) {
    auto it = cl.ranked.find(cls);
    const std::span<const MatchLabel> labels =
        it == cl.ranked.end() ? std::span<const MatchLabel>{} : std::span<const MatchLabel>(it->second);
    if (auto ap = average_precision(labels, num_gt)) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

inline std::vector<Detection> top_k_per_image(std::span<const Detection> dets, int max_k) {
  std::unordered_map<ImageId, int> taken;
  std::vector<std::pair<std::size_t, Detection>> kept;
  for (std::size_t d : rank_by_score(dets)) {
    if (taken[dets[d].image_id]++ < max_k) kept.emplace_back(d, dets[d]);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (auto& [idx, det] : kept) out.push_back(det);
  return out;
}

inline void check_catalog(const EvalInput& in) {
  if (in.catalog.empty()) return;
  const std::set<InstanceId> known(in.catalog.begin(), in.catalog.end());
  std::set<InstanceId> offenders;
  for (const auto& d : in.detections) {
    if (!known.count(d.instance_id)) offenders.insert(d.instance_id);
  }
  for (const auto& g : in.ground_truth) {
    if (!known.count(g.instance_id)) offenders.insert(g.instance_id);
  }
  if (!offenders.empty()) {
    std::string list;
    for (auto id : offenders) list += (list.empty() ? "" : ", ") + std::to_string(id);
    fail(ErrorCode::kUnknownId, "unknown instance ids: " + list);
  }
}

}  // namespace detail

struct ApSummary {
  std::optional<double> ap;    // mean over 0.50:0.05:0.95
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::vector<std::optional<double>> per_threshold;
};

// AP family for one breakdown.
inline ApSummary coco_ap(const EvalInput& in, Breakdown b = Breakdown::kAvg,
                         unsigned threads = 1) {
  detail::check_catalog(in);
  const auto subset = detail::make_subset(in, b);
  const auto thresholds = ap_iou_thresholds();
  ApSummary out;
  out.per_threshold.resize(thresholds.size());
  parallel_for(thresholds.size(), threads, [&](std::size_t i) {
    out.per_threshold[i] = detail::class_mean_ap(subset, thresholds[i]);
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : out.per_threshold) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n > 0) out.ap = sum / double(n);
  out.ap50 = out.per_threshold.front();
  out.ap75 = out.per_threshold[5];
  return out;
}

// Class-agnostic recall with the top max_k detections per image, pooled over
// the evaluation set and averaged over the IoU grid. Nullopt without ground
// truth.
inline std::optional<double> average_recall(const EvalInput& in, int max_k,
                                            Breakdown b = Breakdown::kAvg,
                                            ArGrid grid = ArGrid::kLiteral) {
  if (max_k < 1) fail(ErrorCode::kInvalidArgument, "max_k must be >= 1");
  detail::check_catalog(in);
  const auto subset = detail::make_subset(in, b);
  const auto dets = detail::top_k_per_image(subset.dets, max_k);
  const auto thresholds = ar_iou_thresholds(grid);
  double sum = 0.0;
  for (double t : thresholds) {
    const auto m = match_at_iou(dets, subset.gts, {t, true, subset.size_band});
    std::size_t total = 0, hit = 0;
    for (std::size_t g = 0; g < subset.gts.size(); ++g) {
      if (m.gt_ignored[g]) continue;
      ++total;
      if (m.gt_matched[g]) ++hit;
    }
    if (total == 0) return std::nullopt;
    sum += double(hit) / double(total);
  }
  return sum / double(thresholds.size());
}

struct ClassPrCurve {
  InstanceId instance_id = 0;
  std::size_t num_gt = 0;
  // Starts at (0, 1); then one point per ranked non-ignored detection.
  std::vector<PrPoint> staircase;
  std::array<double, kRecallPoints> interpolated{};
};

struct PrCurves {
  double iou_threshold = 0.5;
  std::vector<ClassPrCurve> classes;
  // Class mean of the interpolated curves; its mean is AP at this threshold.
  std::array<double, kRecallPoints> mean_interpolated{};
  std::optional<double> ap;
};

inline PrCurves pr_curve(const EvalInput& in, double t = 0.5) {
  detail::check_catalog(in);
  const auto subset = detail::make_subset(in, Breakdown::kAvg);
  const auto cl = detail::class_labels(subset, t);
  PrCurves out;
  out.iou_threshold = t;
  std::size_t n = 0;
  for (const auto& [cls, num_gt] : cl.num_gt) {
    if (num_gt == 0) continue;
    ClassPrCurve c;
    c.instance_id = cls;
    c.num_gt = num_gt;
    auto it = cl.ranked.find(cls);
    const std::span<const MatchLabel> labels =
        it == cl.ranked.end() ? std::span<const MatchLabel>{} : std::span<const MatchLabel>(it->second);
    c.staircase.push_back({0.0, 1.0});
    for (const auto& p : pr_points(labels, num_gt)) c.staircase.push_back(p);
    c.interpolated = interpolated_precision(labels, num_gt);
    for (int k = 0; k < kRecallPoints; ++k) out.mean_interpolated[k] += c.interpolated[k];
    out.classes.push_back(std::move(c));
    ++n;
  }
  if (n > 0) {
    double s = 0.0;
    for (auto& v : out.mean_interpolated) {
      v /= double(n);
      s += v;
    }
    out.ap = s / kRecallPoints;
  }
  return out;
}

struct ArSummary {
  int max_dets = 0;
  std::array<std::optional<double>, kBreakdowns.size()> by_breakdown{};
};

struct EvalReport {
  EvalConfig config;
  std::array<ApSummary, kBreakdowns.size()> ap{};  // indexed like kBreakdowns
  std::vector<ArSummary> ar;
  PrCurves pr50;
  std::size_t num_images = 0;
  std::size_t num_ground_truth = 0;
  std::size_t num_detections = 0;

  const ApSummary& overall() const { return ap[0]; }
};

inline EvalReport evaluate(const EvalInput& in, const EvalConfig& config = {}) {
  detail::check_catalog(in);
  EvalReport report;
  report.config = config;
  for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
    report.ap[i] = coco_ap(in, kBreakdowns[i], config.threads);
  }
  for (int k : config.ar_max_dets) {
    ArSummary s;
    s.max_dets = k;
    for (std::size_t i = 0; i < kBreakdowns.size(); ++i) {
      s.by_breakdown[i] = average_recall(in, k, kBreakdowns[i], config.ar_grid);
    }
    report.ar.push_back(s);
  }
  report.pr50 = pr_curve(in, 0.5);
  std::set<ImageId> images;
  for (const auto& im : in.images) images.insert(im.id);
  for (const auto& g : in.ground_truth) images.insert(g.image_id);
  report.num_images = images.size();
  report.num_ground_truth = in.ground_truth.size();
  report.num_detections = in.detections.size();
  return report;
}

}  // namespace insdet
