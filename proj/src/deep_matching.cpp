#include "malscope/deep_matching.hpp"

#include <algorithm>

namespace malscope {

using nlohmann::json;

void DeepParams::validate() const {
  if (d_match < 1 || d_match > 3)
    throw Error("d_match must be 1, 2, or 3, got " + std::to_string(d_match));
  if (n_match < 1) throw Error("n_match must be positive, got " + std::to_string(n_match));
}

std::array<double, 3> depth_subscores(const AppRecord& a, const AppRecord& b,
                                      const SimilarityConfig& cfg) {
  std::array<double, 3> s{};
  s[0] = metadata_similarity(a, b, cfg);

  // Depth 2 compares one combined set of all declared component names.
  auto component_union = [](const AppRecord& r) {
    std::vector<std::string> all;
    all.reserve(r.activities.size() + r.services.size() + r.receivers.size() + r.providers.size());
    for (const auto* list : {&r.activities, &r.services, &r.receivers, &r.providers})
      all.insert(all.end(), list->begin(), list->end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
  };
  s[1] = jaccard_lists(component_union(a), component_union(b));

  s[2] = (jaccard_lists(a.files, b.files) + jaccard_lists(a.libraries, b.libraries) +
          jaccard_lists(a.classes, b.classes) + jaccard_lists(a.methods, b.methods)) /
         4.0;
  return s;
}

double cumulative_score(std::span<const double> subscores) {
  if (subscores.empty()) throw Error("cumulative_score needs at least one sub-score");
  double sum = 0.0;
  for (const double s : subscores) sum += s;
  return sum / static_cast<double>(subscores.size());
}

double depth_similarity(const AppRecord& a, const AppRecord& b, int d,
                        const SimilarityConfig& cfg) {
  if (d < 1 || d > 3) throw Error("depth must be 1, 2, or 3, got " + std::to_string(d));
  const auto s = depth_subscores(a, b, cfg);
  return cumulative_score(std::span<const double>(s.data(), static_cast<std::size_t>(d)));
}

DeepResult deep_match_with(const AppRecord& test, const std::vector<LabeledRef>& refs,
                           const DeepParams& params, const SimilarityFn& similarity) {
  params.validate();

  // Canonical scan order, independent of how the caller arranged refs.
  std::vector<const LabeledRef*> ordered;
  ordered.reserve(refs.size());
  for (const auto& ref : refs) {
    if (ref.second == Label::Excluded)
      throw Error("deep_match received an Excluded reference ('" + ref.first->id + "')");
    ordered.push_back(&ref);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const LabeledRef* a, const LabeledRef* b) { return a->first->id < b->first->id; });

  DeepResult result;
  for (const LabeledRef* ref : ordered) {
    const double score = similarity(test, *ref->first);
    if (score >= kDeepMatchThreshold)
      result.match_set.matches.push_back({ref->first->id, score, ref->second});
    if (result.match_set.matches.size() == static_cast<std::size_t>(params.n_match)) break;
  }

  const auto& matches = result.match_set.matches;
  if (matches.empty()) {
    result.verdict = VerdictLabel::Unclassified;
    return result;
  }
  const auto malicious =
      std::count_if(matches.begin(), matches.end(),
                    [](const MatchEntry& m) { return m.label == Label::Malicious; });
  // Strict majority ("50% + 1"): exactly half malicious still reads benign.
  result.verdict = 2 * static_cast<std::size_t>(malicious) > matches.size()
                       ? VerdictLabel::Malicious
                       : VerdictLabel::Benign;
  return result;
}

DeepResult deep_match(const AppRecord& test, const std::vector<LabeledRef>& refs,
                      const DeepParams& params, const SimilarityConfig& cfg) {
  const int d = params.d_match;
  return deep_match_with(test, refs, params, [d, &cfg](const AppRecord& a, const AppRecord& b) {
    return depth_similarity(a, b, d, cfg);
  });
}

json match_set_to_json(const MatchSet& match_set) {
  json j = json::array();
  for (const auto& m : match_set.matches)
    j.push_back({{"id", m.app_id}, {"similarity", m.similarity}, {"label", to_string(m.label)}});
  return j;
}

}  // namespace malscope
