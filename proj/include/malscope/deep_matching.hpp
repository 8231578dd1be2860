#pragma once

#include <array>
#include <functional>
#include <json.hpp>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "malscope/similarity.hpp"
#include "malscope/types.hpp"

namespace malscope {

// An app must reach two-thirds similarity with a reference to count as a
// match (printed as 0.67 and applied as such).
inline constexpr double kDeepMatchThreshold = 0.67;

struct DeepParams {
  int d_match = 2;   // analysis depth, 1..3
  int n_match = 10;  // cap on the match set

  void validate() const;
};

struct MatchEntry {
  std::string app_id;
  double similarity = 0.0;
  Label label = Label::Benign;
};

// Matched references in scan order (ascending app_id), capped at n_match.
struct MatchSet {
  std::vector<MatchEntry> matches;
};

// The three per-depth scores: metadata similarity, component-name overlap,
// and content-list overlap (mean Jaccard over files/libraries/classes/
// methods).
std::array<double, 3> depth_subscores(const AppRecord& a, const AppRecord& b,
                                      const SimilarityConfig& cfg = {});

// Depth d's score is cumulative: the mean of the first d sub-scores.
double cumulative_score(std::span<const double> subscores);
double depth_similarity(const AppRecord& a, const AppRecord& b, int d,
                        const SimilarityConfig& cfg = {});

struct DeepResult {
  VerdictLabel verdict = VerdictLabel::Unclassified;
  MatchSet match_set;
};

using LabeledRef = std::pair<const AppRecord*, Label>;

// Scans references in ascending app_id, collecting those whose similarity
// clears the threshold until n_match are found, then takes a strict majority
// vote; an empty match set stays Unclassified. Excluded refs must have been
// filtered out by the caller.
DeepResult deep_match(const AppRecord& test, const std::vector<LabeledRef>& refs,
                      const DeepParams& params, const SimilarityConfig& cfg = {});

// Same scan and vote, but with a caller-supplied similarity (used by tests to
// count evaluations and by callers that precompute scores).
using SimilarityFn = std::function<double(const AppRecord&, const AppRecord&)>;
DeepResult deep_match_with(const AppRecord& test, const std::vector<LabeledRef>& refs,
                           const DeepParams& params, const SimilarityFn& similarity);

nlohmann::json match_set_to_json(const MatchSet& match_set);

}  // namespace malscope
