#pragma once

// Proposal-to-instance matching over precomputed feature vectors.
//
// A proposal's similarity to an instance is the maximum cosine similarity of
// its feature to any profile view of that instance. Rows and columns whose
// best entry falls below the threshold are filtered out, and the remaining
// matrix is resolved either greedily (Rank&Select) or by proposal-proposing
// deferred acceptance (stable matching).
//
// Tie-breaking everywhere: lower proposal index, then lower instance index,
// where indices are positions in the unfiltered matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "insdet/error.hpp"
#include "insdet/geometry.hpp"
#include "insdet/parallel.hpp"
#include "insdet/records.hpp"

namespace insdet {

struct FeatureVector {
  std::string source_id;
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

namespace detail {

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += double(a[k]) * double(b[k]);
  return s;
}

inline double checked_norm(std::span<const float> v, std::string_view id) {
  double s = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::kNonFiniteValue, "non-finite entry in feature '" + std::string(id) + "'");
    }
    s += double(x) * double(x);
  }
  if (!(s > 0.0)) fail(ErrorCode::kZeroNorm, "zero-norm feature '" + std::string(id) + "'");
  return std::sqrt(s);
}

inline double cosine_from_parts(double dot, double norm_a, double norm_b) {
  return std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
}

}  // namespace detail

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) {
    fail(ErrorCode::kDimMismatch, "cosine_similarity: dims " + std::to_string(a.size()) +
                                      " and " + std::to_string(b.size()));
  }
  return detail::cosine_from_parts(detail::dot(a, b), detail::checked_norm(a, "a"),
                                   detail::checked_norm(b, "b"));
}

inline double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim() || a.dim() == 0) {
    fail(ErrorCode::kDimMismatch,
         "dim mismatch between '" + a.source_id + "' and '" + b.source_id + "'");
  }
  return detail::cosine_from_parts(detail::dot(a.values, b.values),
                                   detail::checked_norm(a.values, a.source_id),
                                   detail::checked_norm(b.values, b.source_id));
}

// Max over per-view cosine similarities.
inline double aggregate_similarity(const FeatureVector& proposal,
                                   std::span<const FeatureVector> views) {
  if (views.empty()) fail(ErrorCode::kEmptyInput, "aggregate_similarity: no profile views");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : views) best = std::max(best, cosine_similarity(proposal, v));
  return best;
}

// All profile views of one catalog instance.
struct InstanceProfile {
  InstanceId instance_id = 0;
  std::vector<FeatureVector> views;
};

// Proposal x instance similarities plus the index map back to the unfiltered
// matrix. Entries below `threshold` are not acceptable as matches.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<std::string> proposal_ids, std::vector<InstanceId> instance_ids,
                   std::vector<double> values)
      : proposal_ids_(std::move(proposal_ids)), instance_ids_(std::move(instance_ids)),
        values_(std::move(values)) {
    if (values_.size() != proposal_ids_.size() * instance_ids_.size()) {
      fail(ErrorCode::kDimMismatch, "similarity matrix shape mismatch");
    }
    row_index_.resize(proposal_ids_.size());
    col_index_.resize(instance_ids_.size());
    for (std::size_t r = 0; r < row_index_.size(); ++r) row_index_[r] = r;
    for (std::size_t c = 0; c < col_index_.size(); ++c) col_index_[c] = c;
  }

  // Convenience for tests and fixtures: proposals "p0".., instances 0...
  static SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t ncols = rows.empty() ? 0 : rows.front().size();
    std::vector<std::string> pids;
    std::vector<InstanceId> iids;
    std::vector<double> values;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != ncols) fail(ErrorCode::kDimMismatch, "ragged similarity rows");
      pids.push_back("p" + std::to_string(r));
      values.insert(values.end(), rows[r].begin(), rows[r].end());
    }
    for (std::size_t c = 0; c < ncols; ++c) iids.push_back(static_cast<InstanceId>(c));
    return SimilarityMatrix(std::move(pids), std::move(iids), std::move(values));
  }

  std::size_t rows() const { return proposal_ids_.size(); }
  std::size_t cols() const { return instance_ids_.size(); }
  bool empty() const { return rows() == 0 || cols() == 0; }

  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  bool acceptable(std::size_t r, std::size_t c) const { return at(r, c) >= threshold_; }

  double threshold() const { return threshold_; }
  const std::vector<std::string>& proposal_ids() const { return proposal_ids_; }
  const std::vector<InstanceId>& instance_ids() const { return instance_ids_; }
  // Positions of each row / column in the unfiltered matrix.
  const std::vector<std::size_t>& row_index() const { return row_index_; }
  const std::vector<std::size_t>& col_index() const { return col_index_; }

  double row_max(std::size_t r) const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols(); ++c) m = std::max(m, at(r, c));
    return m;
  }
  double col_max(std::size_t c) const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows(); ++r) m = std::max(m, at(r, c));
    return m;
  }

  friend SimilarityMatrix threshold_filter(const SimilarityMatrix& m, double tau);

 private:
  std::vector<std::string> proposal_ids_;
  std::vector<InstanceId> instance_ids_;
  std::vector<double> values_;
  std::vector<std::size_t> row_index_;
  std::vector<std::size_t> col_index_;
  double threshold_ = -1.0;
};

// Full proposal x instance matrix of max-over-views similarities. Rows are
// computed in parallel; every feature must share one dimension.
inline SimilarityMatrix similarity_matrix(std::span<const FeatureVector> proposals,
                                          std::span<const InstanceProfile> instances,
                                          unsigned threads = 1) {
  std::size_t dim = 0;
  auto check_dim = [&](const FeatureVector& v) {
    if (dim == 0) dim = v.dim();
    if (v.dim() != dim || dim == 0) {
      fail(ErrorCode::kDimMismatch, "feature '" + v.source_id + "' has dim " +
                                        std::to_string(v.dim()) + ", expected " +
                                        std::to_string(dim));
    }
  };
  std::vector<double> proposal_norms;
  for (const auto& p : proposals) {
    check_dim(p);
    proposal_norms.push_back(detail::checked_norm(p.values, p.source_id));
  }
  std::vector<std::vector<double>> view_norms;
  for (const auto& inst : instances) {
    if (inst.views.empty()) {
      fail(ErrorCode::kEmptyInput,
           "instance " + std::to_string(inst.instance_id) + " has no profile views");
    }
    auto& norms = view_norms.emplace_back();
    for (const auto& v : inst.views) {
      check_dim(v);
      norms.push_back(detail::checked_norm(v.values, v.source_id));
    }
  }

  const std::size_t ncols = instances.size();
  std::vector<double> values(proposals.size() * ncols);
  parallel_for(proposals.size(), threads, [&](std::size_t r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      const auto& views = instances[c].views;
      for (std::size_t v = 0; v < views.size(); ++v) {
        best = std::max(best, detail::cosine_from_parts(
                                  detail::dot(proposals[r].values, views[v].values),
                                  proposal_norms[r], view_norms[c][v]));
      }
      values[r * ncols + c] = best;
    }
  });

  std::vector<std::string> pids;
  for (const auto& p : proposals) pids.push_back(p.source_id);
  std::vector<InstanceId> iids;
  for (const auto& inst : instances) iids.push_back(inst.instance_id);
  return SimilarityMatrix(std::move(pids), std::move(iids), std::move(values));
}

// Drops every row and every column whose maximum entry is below tau, both
// judged on the input matrix. Surviving entries are unchanged.
inline SimilarityMatrix threshold_filter(const SimilarityMatrix& m, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "threshold must lie in [-1, 1]");
  }
  std::vector<std::size_t> keep_rows, keep_cols;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.row_max(r) >= tau) keep_rows.push_back(r);
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (m.col_max(c) >= tau) keep_cols.push_back(c);
  }
  SimilarityMatrix out;
  for (auto r : keep_rows) {
    out.proposal_ids_.push_back(m.proposal_ids_[r]);
    out.row_index_.push_back(m.row_index_[r]);
    for (auto c : keep_cols) out.values_.push_back(m.at(r, c));
  }
  for (auto c : keep_cols) {
    out.instance_ids_.push_back(m.instance_ids_[c]);
    out.col_index_.push_back(m.col_index_[c]);
  }
  out.threshold_ = std::max(m.threshold_, tau);
  return out;
}

struct MatchPair {
  std::string proposal_id;
  InstanceId instance_id = 0;
  double score = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::string> unmatched_proposals;
  std::vector<InstanceId> unmatched_instances;
};

enum class MatchAlgorithm { kRankSelect, kStable };

inline std::string_view to_string(MatchAlgorithm algo) {
  return algo == MatchAlgorithm::kRankSelect ? "rank-select" : "stable";
}

namespace detail {

inline MatchResult collect_unmatched(const SimilarityMatrix& m, MatchResult result,
                                     const std::vector<bool>& row_used,
                                     const std::vector<bool>& col_used) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (!row_used[r]) result.unmatched_proposals.push_back(m.proposal_ids()[r]);
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (!col_used[c]) result.unmatched_instances.push_back(m.instance_ids()[c]);
  }
  return result;
}

}  // namespace detail

// Greedy Rank&Select: repeatedly take the globally best acceptable entry and
// retire its proposal. Instances stay available unless `retire_instances`
// is set, in which case the matched instance is retired as well.
inline MatchResult rank_select(const SimilarityMatrix& m, bool retire_instances = false) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const std::size_t nr = m.rows(), nc = m.cols();
  std::vector<bool> row_used(nr, false), col_used(nc, false);
  std::vector<std::size_t> best_col(nr, kNone);

  auto refresh = [&](std::size_t r) {
    best_col[r] = kNone;
    for (std::size_t c = 0; c < nc; ++c) {
      if (col_used[c] && retire_instances) continue;
      if (!m.acceptable(r, c)) continue;
      if (best_col[r] == kNone || m.at(r, c) > m.at(r, best_col[r])) best_col[r] = c;
    }
  };
  for (std::size_t r = 0; r < nr; ++r) refresh(r);

  MatchResult result;
  while (true) {
    std::size_t pick = kNone;
    for (std::size_t r = 0; r < nr; ++r) {
      if (row_used[r] || best_col[r] == kNone) continue;
      if (pick == kNone || m.at(r, best_col[r]) > m.at(pick, best_col[pick])) pick = r;
    }
    if (pick == kNone) break;
    const std::size_t c = best_col[pick];
    result.pairs.push_back({m.proposal_ids()[pick], m.instance_ids()[c], m.at(pick, c)});
    row_used[pick] = true;
    col_used[c] = true;
    if (retire_instances) {
      for (std::size_t r = 0; r < nr; ++r) {
        if (!row_used[r] && best_col[r] == c) refresh(r);
      }
    }
  }
  return detail::collect_unmatched(m, std::move(result), row_used, col_used);
}

// Proposal-proposing deferred acceptance over similarity-induced preferences.
// Only acceptable entries (>= threshold) may be matched; the result is
// one-to-one and free of blocking pairs. Pairs are listed by proposal order.
inline MatchResult stable_matching(const SimilarityMatrix& m) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const std::size_t nr = m.rows(), nc = m.cols();

  std::vector<std::vector<std::size_t>> prefs(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      if (m.acceptable(r, c)) prefs[r].push_back(c);
    }
    std::stable_sort(prefs[r].begin(), prefs[r].end(),
                     [&](std::size_t a, std::size_t b) { return m.at(r, a) > m.at(r, b); });
  }
  // Instance c prefers proposal a over b.
  auto prefers = [&](std::size_t c, std::size_t a, std::size_t b) {
    if (m.at(a, c) != m.at(b, c)) return m.at(a, c) > m.at(b, c);
    return a < b;
  };

  std::vector<std::size_t> next(nr, 0), holder(nc, kNone), partner(nr, kNone);
  std::vector<std::size_t> free_rows;
  for (std::size_t r = nr; r-- > 0;) free_rows.push_back(r);
  while (!free_rows.empty()) {
    const std::size_t r = free_rows.back();
    free_rows.pop_back();
    while (next[r] < prefs[r].size()) {
      const std::size_t c = prefs[r][next[r]++];
      if (holder[c] == kNone) {
        holder[c] = r;
        partner[r] = c;
        break;
      }
      if (prefers(c, r, holder[c])) {
        const std::size_t displaced = holder[c];
        partner[displaced] = kNone;
        free_rows.push_back(displaced);
        holder[c] = r;
        partner[r] = c;
        break;
      }
    }
  }

  MatchResult result;
  std::vector<bool> row_used(nr, false), col_used(nc, false);
  for (std::size_t r = 0; r < nr; ++r) {
    if (partner[r] == kNone) continue;
    const std::size_t c = partner[r];
    result.pairs.push_back({m.proposal_ids()[r], m.instance_ids()[c], m.at(r, c)});
    row_used[r] = true;
    col_used[c] = true;
  }
  return detail::collect_unmatched(m, std::move(result), row_used, col_used);
}

inline MatchResult run_matcher(const SimilarityMatrix& m, MatchAlgorithm algo,
                               bool retire_instances = false) {
  return algo == MatchAlgorithm::kStable ? stable_matching(m)
                                         : rank_select(m, retire_instances);
}

struct ProposalBox {
  std::string proposal_id;
  BoundingBox box;
};

// One detection per matched pair, scored by the pair's similarity.
inline std::vector<Detection> to_detections(const MatchResult& result,
                                            std::span<const ProposalBox> proposals,
                                            ImageId image_id) {
  std::unordered_map<std::string_view, const BoundingBox*> boxes;
  for (const auto& p : proposals) boxes.emplace(p.proposal_id, &p.box);
  std::vector<Detection> out;
  out.reserve(result.pairs.size());
  for (const auto& pair : result.pairs) {
    auto it = boxes.find(pair.proposal_id);
    if (it == boxes.end()) {
      fail(ErrorCode::kMissingBox, "no box for matched proposal '" + pair.proposal_id + "'");
    }
    out.push_back({image_id, pair.instance_id, *it->second, pair.score});
  }
  return out;
}

}  // namespace insdet
