#include "malscope/quick_matching.hpp"

#include <algorithm>
#include <limits>

namespace malscope {

using nlohmann::json;

ClusterIndex build_cluster_index(const std::vector<const AppRecord*>& benign_refs,
                                 int distance_threshold) {
  if (distance_threshold <= 0) throw Error("cluster distance_threshold must be positive");

  std::vector<ClusterIndex::Member> names;
  names.reserve(benign_refs.size());
  for (const AppRecord* r : benign_refs) names.emplace_back(r->package_name, r->id);
  std::sort(names.begin(), names.end());

  struct Cluster {
    std::string leader;
    std::vector<ClusterIndex::Member> members;
  };
  std::vector<Cluster> clusters;  // creation order matters for assignment
  for (const auto& member : names) {
    Cluster* home = nullptr;
    for (auto& c : clusters) {
      if (levenshtein(member.first, c.leader) <= static_cast<std::size_t>(distance_threshold)) {
        home = &c;
        break;
      }
    }
    if (!home) {
      clusters.push_back({member.first, {}});
      home = &clusters.back();
    }
    home->members.push_back(member);
  }

  ClusterIndex index;
  index.distance_threshold = distance_threshold;
  for (auto& c : clusters) {
    // Medoid pass: the member name with the minimum summed distance to all
    // members; ties go to the lexicographically smaller name. Members are
    // already sorted, so the first minimum wins ties.
    std::string center;
    std::size_t best_cost = std::numeric_limits<std::size_t>::max();
    const std::string* previous = nullptr;
    for (const auto& [name, id] : c.members) {
      if (previous && name == *previous) continue;  // duplicates share the same cost
      previous = &name;
      std::size_t cost = 0;
      for (const auto& [other, other_id] : c.members) cost += levenshtein(name, other);
      if (cost < best_cost) {
        best_cost = cost;
        center = name;
      }
    }
    index.clusters.emplace(std::move(center), std::move(c.members));
  }
  return index;
}

const char* to_string(QuickOutcome outcome) {
  switch (outcome) {
    case QuickOutcome::Benign: return "benign";
    case QuickOutcome::Malicious: return "malicious";
    case QuickOutcome::Deferred: return "deferred";
  }
  return "?";
}

const char* to_string(QuickReason reason) {
  switch (reason) {
    case QuickReason::IdenticalCodebase: return "identical-codebase";
    case QuickReason::CompilerMismatch: return "compiler-mismatch";
    case QuickReason::NoClusterMatch: return "no-cluster-match";
    case QuickReason::NoMetadataMatch: return "no-metadata-match";
    case QuickReason::SameCompilerDiffCodebase: return "same-compiler-diff-codebase";
    case QuickReason::OtherCompilerCombo: return "other-compiler-combo";
  }
  return "?";
}

bool is_legitimate_compiler(CompilerTag tag) {
  return tag == CompilerTag::Dx || tag == CompilerTag::DexMerge || tag == CompilerTag::Jack4x;
}

bool is_third_party_compiler(CompilerTag tag) {
  return tag == CompilerTag::Dexlib1 || tag == CompilerTag::Dexlib2;
}

QuickVerdict quick_match(const AppRecord& test, const ClusterIndex& index,
                         const std::map<std::string, const AppRecord*>& refs, double t_match,
                         const SimilarityConfig& cfg) {
  // Stage 1: clusters whose center name is similar enough.
  bool any_cluster = false;
  struct Candidate {
    double name_similarity;
    const ClusterIndex::Member* member;
  };
  std::vector<Candidate> candidates;
  for (const auto& [center, members] : index.clusters) {
    if (jaccard_strings(test.package_name, center, cfg) < t_match) continue;
    any_cluster = true;
    // Stage 2: members of qualifying clusters that also clear the threshold.
    for (const auto& member : members) {
      const double sim = jaccard_strings(test.package_name, member.first, cfg);
      if (sim >= t_match) candidates.push_back({sim, &member});
    }
  }
  if (!any_cluster) return {QuickOutcome::Deferred, QuickReason::NoClusterMatch, std::nullopt};

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.name_similarity != b.name_similarity) return a.name_similarity > b.name_similarity;
    return a.member->second < b.member->second;
  });

  // Stage 3: first candidate whose full metadata clears the threshold.
  for (const auto& candidate : candidates) {
    const auto it = refs.find(candidate.member->second);
    if (it == refs.end())
      throw Error("cluster index references unknown app '" + candidate.member->second + "'");
    const AppRecord& ref = *it->second;
    if (metadata_similarity(test, ref, cfg) < t_match) continue;

    // Stage 4: codebase digest, then the compiler-fingerprint policy.
    if (test.dex_digest == ref.dex_digest)
      return {QuickOutcome::Benign, QuickReason::IdenticalCodebase, ref.id};
    if (is_legitimate_compiler(ref.compiler) && is_third_party_compiler(test.compiler))
      return {QuickOutcome::Malicious, QuickReason::CompilerMismatch, ref.id};
    if (test.compiler == ref.compiler)
      return {QuickOutcome::Deferred, QuickReason::SameCompilerDiffCodebase, ref.id};
    return {QuickOutcome::Deferred, QuickReason::OtherCompilerCombo, std::nullopt};
  }
  return {QuickOutcome::Deferred, QuickReason::NoMetadataMatch, std::nullopt};
}

json cluster_index_to_json(const ClusterIndex& index) {
  json j = json::object();
  for (const auto& [center, members] : index.clusters) {
    json list = json::array();
    for (const auto& [name, id] : members) list.push_back(json::array({name, id}));
    j[center] = std::move(list);
  }
  return j;
}

}  // namespace malscope
