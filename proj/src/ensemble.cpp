#include "malscope/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <ostream>
#include <thread>

namespace malscope {

using nlohmann::json;

void DetectionParams::validate() const {
  if (t_match < 0.0 || t_match > 1.0) throw Error("t_match must lie in [0, 1]");
  if (t_classification < 0.0 || t_classification > 1.0)
    throw Error("t_classification must lie in [0, 1]");
  if (alpha <= 0.0) throw Error("alpha must be positive");
  if (distance_threshold <= 0) throw Error("distance_threshold must be positive");
  if (!as_of.valid()) throw Error("as_of is not a valid date");
  deep.validate();
}

const char* to_string(Method method) {
  switch (method) {
    case Method::Quick: return "quick";
    case Method::Probabilistic: return "probabilistic";
    case Method::Deep: return "deep";
    case Method::None: return "none";
  }
  return "?";
}

Method method_from_string(const std::string& text) {
  if (text == "quick") return Method::Quick;
  if (text == "probabilistic") return Method::Probabilistic;
  if (text == "deep") return Method::Deep;
  if (text == "none") return Method::None;
  throw Error("unknown method '" + text + "'");
}

PreparedPipeline PreparedPipeline::prepare(const DatasetManifest& reference,
                                           const DetectionParams& params) {
  params.validate();
  if (reference.role != ManifestRole::Reference)
    throw Error("prepare needs a reference manifest; '" + reference.name + "' has role '" +
                std::string(to_string(reference.role)) + "'");

  PreparedPipeline p;
  p.params_ = params;
  p.labels_ = label_dataset(reference, params.scheme, params.as_of);

  std::vector<const AppRecord*> benign;
  std::vector<std::pair<FeatureVector, Label>> training;
  for (const auto& entry : reference.entries) {
    const Label label = p.labels_.at(entry.id).label;
    if (label == Label::Excluded) continue;  // gap apps train nothing
    if (label == Label::Benign) {
      benign.push_back(&entry.record);
      p.benign_refs_.emplace(entry.id, &entry.record);
    }
    training.emplace_back(extract_features(entry.record), label);
    p.deep_refs_.emplace_back(&entry.record, label);
  }
  std::sort(p.deep_refs_.begin(), p.deep_refs_.end(),
            [](const LabeledRef& a, const LabeledRef& b) { return a.first->id < b.first->id; });

  p.index_ = build_cluster_index(benign, params.distance_threshold);
  try {
    p.classifier_ = train(training, params.alpha, params.scheme);
  } catch (const Error& e) {
    throw Error("prepare '" + reference.name + "' under scheme " +
                std::string(to_string(params.scheme)) + ": " + e.what());
  }
  return p;
}

void PreparedPipeline::override_classifier(TrainedClassifier clf) {
  if (clf.scheme != params_.scheme)
    throw Error("classifier was trained under scheme '" + std::string(to_string(clf.scheme)) +
                "' but the pipeline uses '" + std::string(to_string(params_.scheme)) + "'");
  classifier_ = std::move(clf);
}

QuickVerdict PreparedPipeline::quick_only(const AppRecord& test,
                                          std::optional<double> t_match) const {
  return quick_match(test, index_, benign_refs_, t_match.value_or(params_.t_match),
                     params_.similarity);
}

Classification PreparedPipeline::probabilistic_only(const AppRecord& test,
                                                    std::optional<double> t_classification) const {
  return classify(classifier_, extract_features(test),
                  t_classification.value_or(params_.t_classification));
}

DeepResult PreparedPipeline::deep_only(const AppRecord& test, std::optional<DeepParams> deep) const {
  return deep_match(test, deep_refs_, deep.value_or(params_.deep), params_.similarity);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Verdict PreparedPipeline::classify_app(const AppRecord& test) const {
  Verdict v;
  v.id = test.id;

  auto start = std::chrono::steady_clock::now();
  const QuickVerdict quick = quick_only(test);
  v.stage_seconds[0] = seconds_since(start);
  v.stages_run.push_back(Method::Quick);
  if (quick.outcome != QuickOutcome::Deferred) {
    v.label = quick.outcome == QuickOutcome::Malicious ? VerdictLabel::Malicious
                                                       : VerdictLabel::Benign;
    v.method = Method::Quick;
    v.explanation = {{"reason", to_string(quick.reason)}};
    if (quick.matched_ref) v.explanation["matched_ref"] = *quick.matched_ref;
    v.elapsed_seconds = v.stage_seconds[0];
    return v;
  }

  start = std::chrono::steady_clock::now();
  const Classification cls = probabilistic_only(test);
  v.stage_seconds[1] = seconds_since(start);
  v.stages_run.push_back(Method::Probabilistic);
  if (cls.answered) {
    v.label = cls.label == Label::Malicious ? VerdictLabel::Malicious : VerdictLabel::Benign;
    v.method = Method::Probabilistic;
    v.confidence = cls.confidence;
    v.explanation = {{"posterior_malicious", cls.posteriors[0]},
                     {"posterior_benign", cls.posteriors[1]}};
    v.elapsed_seconds = v.stage_seconds[0] + v.stage_seconds[1];
    return v;
  }

  start = std::chrono::steady_clock::now();
  const DeepResult deep = deep_only(test);
  v.stage_seconds[2] = seconds_since(start);
  v.stages_run.push_back(Method::Deep);
  v.elapsed_seconds = v.stage_seconds[0] + v.stage_seconds[1] + v.stage_seconds[2];
  v.label = deep.verdict;
  v.method = deep.verdict == VerdictLabel::Unclassified ? Method::None : Method::Deep;
  v.explanation = {{"matches", match_set_to_json(deep.match_set)}};
  return v;
}

std::vector<Verdict> classify_many(const PreparedPipeline& pipeline,
                                   const std::vector<const AppRecord*>& tests, int jobs) {
  if (jobs < 1) throw Error("jobs must be at least 1");
  std::vector<Verdict> results(tests.size());

  if (jobs == 1 || tests.size() < 2) {
    for (std::size_t i = 0; i < tests.size(); ++i) results[i] = pipeline.classify_app(*tests[i]);
  } else {
    const std::size_t workers = std::min<std::size_t>(jobs, tests.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < tests.size(); i += workers)
            results[i] = pipeline.classify_app(*tests[i]);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::sort(results.begin(), results.end(),
            [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  return results;
}

json verdict_to_json(const Verdict& verdict, const VerdictWriteOptions& options,
                     const std::optional<Label>& truth) {
  json j;
  j["id"] = verdict.id;
  j["label"] = to_string(verdict.label);
  j["method"] = to_string(verdict.method);
  if (verdict.confidence)
    j["confidence"] = *verdict.confidence;
  else
    j["confidence"] = nullptr;
  if (options.include_timing) j["elapsed_seconds"] = verdict.elapsed_seconds;
  if (options.include_explanation) j["explanation"] = verdict.explanation;
  if (truth) j["truth"] = to_string(*truth);
  return j;
}

void write_verdicts_jsonl(const std::vector<Verdict>& verdicts, std::ostream& out,
                          const VerdictWriteOptions& options,
                          const std::map<std::string, Label>* truth) {
  for (const auto& v : verdicts) {
    std::optional<Label> t;
    if (truth) {
      const auto it = truth->find(v.id);
      if (it != truth->end()) t = it->second;
    }
    out << verdict_to_json(v, options, t).dump() << '\n';
  }
}

}  // namespace malscope
