// Rank&Select against stable matching on a three-proposal toy problem.
//
// Proposal p0 looks slightly more like the mug than like its own instance,
// the bowl. Greedy selection labels it a mug; stable matching hands the mug
// to p1, which resembles it far better, and p0 falls back to the bowl.

#include <cstdio>

#include "insdet/insdet.hpp"

using namespace insdet;

int main() {
  const std::vector<FeatureVector> proposals = {
      {"p0", {0.90f, 0.50f, 0.10f}},
      {"p1", {0.98f, 0.05f, 0.05f}},
      {"p2", {0.05f, 0.10f, 0.99f}},
  };
  const std::vector<InstanceProfile> catalog = {
      {1, {{"mug/0", {1.0f, 0.0f, 0.0f}}, {"mug/1", {0.9f, 0.1f, 0.0f}}}},
      {2, {{"bowl/0", {0.3f, 1.0f, 0.0f}}}},
      {3, {{"tin/0", {0.0f, 0.1f, 1.0f}}}},
  };

  const auto m = threshold_filter(similarity_matrix(proposals, catalog), kDefaultTau);
  std::printf("similarity (tau %.2f)\n", kDefaultTau);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::printf("  %s", m.proposal_ids()[r].c_str());
    for (std::size_t c = 0; c < m.cols(); ++c) std::printf("  %.3f", m.at(r, c));
    std::printf("\n");
  }
  for (auto algo : {MatchAlgorithm::kRankSelect, MatchAlgorithm::kStable}) {
    const auto result = run_matcher(m, algo);
    std::printf("%s:\n", std::string(to_string(algo)).c_str());
    for (const auto& p : result.pairs) {
      std::printf("  %s -> instance %lld  (%.3f)\n", p.proposal_id.c_str(),
                  static_cast<long long>(p.instance_id), p.score);
    }
  }
}
