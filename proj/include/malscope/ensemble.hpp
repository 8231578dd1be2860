#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "malscope/classifier.hpp"
#include "malscope/corpus.hpp"
#include "malscope/deep_matching.hpp"
#include "malscope/labeling.hpp"
#include "malscope/quick_matching.hpp"
#include "malscope/similarity.hpp"
#include "malscope/types.hpp"

namespace malscope {

struct DetectionParams {
  LabelingScheme scheme = LabelingScheme::Original;
  Date as_of{2019, 1, 31};
  double t_match = 1.0;
  double t_classification = 1.0;
  DeepParams deep{};
  double alpha = 1.0;
  int distance_threshold = 5;
  SimilarityConfig similarity{};

  void validate() const;
};

enum class Method { Quick, Probabilistic, Deep, None };
const char* to_string(Method method);
Method method_from_string(const std::string& text);

struct Verdict {
  std::string id;
  VerdictLabel label = VerdictLabel::Unclassified;
  Method method = Method::None;
  std::optional<double> confidence;        // probabilistic answers only
  double elapsed_seconds = 0.0;            // summed over the stages that ran
  std::vector<Method> stages_run;          // invocation order, for audit
  std::array<double, 3> stage_seconds{};   // per-stage wall time (quick, prob, deep)
  nlohmann::json explanation;              // method-specific detail
};

// Reference-side state shared by every classification: scheme labels at
// as_of, the benign-name cluster index, the trained classifier, and the
// labeled snapshot deep matching scans. Holds pointers into the reference
// manifest, which must outlive the pipeline.
class PreparedPipeline {
 public:
  static PreparedPipeline prepare(const DatasetManifest& reference, const DetectionParams& params);

  // Full top-down cascade; later stages run only on deferral.
  Verdict classify_app(const AppRecord& test) const;

  // Stage-at-a-time entry points for standalone evaluation.
  QuickVerdict quick_only(const AppRecord& test, std::optional<double> t_match = {}) const;
  Classification probabilistic_only(const AppRecord& test,
                                    std::optional<double> t_classification = {}) const;
  DeepResult deep_only(const AppRecord& test, std::optional<DeepParams> deep = {}) const;

  // Swaps in a previously trained classifier (the train/classify split);
  // rejects one trained under a different scheme.
  void override_classifier(TrainedClassifier clf);

  const DetectionParams& params() const { return params_; }
  const ClusterIndex& cluster_index() const { return index_; }
  const TrainedClassifier& classifier() const { return classifier_; }
  const std::vector<LabeledRef>& deep_refs() const { return deep_refs_; }
  const std::map<std::string, LabeledApp>& reference_labels() const { return labels_; }

 private:
  DetectionParams params_;
  std::map<std::string, LabeledApp> labels_;
  ClusterIndex index_;
  std::map<std::string, const AppRecord*> benign_refs_;
  TrainedClassifier classifier_;
  std::vector<LabeledRef> deep_refs_;  // non-Excluded, ascending app_id
};

// Classifies tests (optionally across `jobs` threads) and returns verdicts
// sorted by app_id regardless of thread count.
std::vector<Verdict> classify_many(const PreparedPipeline& pipeline,
                                   const std::vector<const AppRecord*>& tests, int jobs = 1);

struct VerdictWriteOptions {
  bool include_timing = true;
  bool include_explanation = false;
};

nlohmann::json verdict_to_json(const Verdict& verdict, const VerdictWriteOptions& options = {},
                               const std::optional<Label>& truth = std::nullopt);
void write_verdicts_jsonl(const std::vector<Verdict>& verdicts, std::ostream& out,
                          const VerdictWriteOptions& options = {},
                          const std::map<std::string, Label>* truth = nullptr);

}  // namespace malscope
