#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "malscope/similarity.hpp"
#include "malscope/types.hpp"

namespace malscope {

// Package-name clusters over the scheme-benign reference apps. Keys are the
// cluster centers; each center is the medoid of its own member list.
struct ClusterIndex {
  using Member = std::pair<std::string, std::string>;  // (package_name, app_id)
  std::map<std::string, std::vector<Member>> clusters;
  int distance_threshold = 5;
};

// Leader clustering over lexicographically sorted package names: a name joins
// the first cluster (in creation order) whose leader center lies within
// distance_threshold Levenshtein edits, else opens a new cluster. Centers are
// then recomputed once as medoids (minimum summed distance to members, ties
// to the lexicographically smaller name).
ClusterIndex build_cluster_index(const std::vector<const AppRecord*>& benign_refs,
                                 int distance_threshold = 5);

enum class QuickOutcome { Benign, Malicious, Deferred };
enum class QuickReason {
  IdenticalCodebase,
  CompilerMismatch,
  NoClusterMatch,
  NoMetadataMatch,
  SameCompilerDiffCodebase,
  OtherCompilerCombo,
};

const char* to_string(QuickOutcome outcome);
const char* to_string(QuickReason reason);

struct QuickVerdict {
  QuickOutcome outcome = QuickOutcome::Deferred;
  QuickReason reason = QuickReason::NoClusterMatch;
  std::optional<std::string> matched_ref;  // set only for the ref-comparison reasons
};

// SDK toolchains vs. reverse-engineering toolchains. Unknown belongs to
// neither set and always defers.
bool is_legitimate_compiler(CompilerTag tag);
bool is_third_party_compiler(CompilerTag tag);

// First-stage pass: cluster lookup on the package name, metadata comparison
// against candidate references (descending name similarity, then app_id),
// then digest equality / compiler policy on the first match.
QuickVerdict quick_match(const AppRecord& test, const ClusterIndex& index,
                         const std::map<std::string, const AppRecord*>& refs, double t_match,
                         const SimilarityConfig& cfg = {});

// `{center: [[name, id], ...]}` for CLI inspection.
nlohmann::json cluster_index_to_json(const ClusterIndex& index);

}  // namespace malscope
