#pragma once

#include <array>
#include <json.hpp>
#include <utility>
#include <vector>

#include "malscope/types.hpp"

namespace malscope {

// 40 static features per app: min/max SDK, four component counts, permission
// count and the three category ratios, class/method counts, 27 API-package
// call counts, and the compiler ordinal.
inline constexpr std::size_t kFeatureCount = 40;
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector extract_features(const AppRecord& record);

// Human-readable name for each feature slot (diagnostics only).
const std::array<std::string, kFeatureCount>& feature_names();

// Multinomial naive Bayes over the two detection classes. Class slot 0 is
// Malicious, slot 1 is Benign, everywhere in this module.
inline constexpr std::size_t kClassCount = 2;
inline constexpr std::array<Label, kClassCount> kClassOrder = {Label::Malicious, Label::Benign};

struct TrainedClassifier {
  std::array<double, kClassCount> priors{};                             // probability space
  std::array<std::array<double, kFeatureCount>, kClassCount> weights{}; // rows sum to 1
  double alpha = 1.0;
  LabelingScheme scheme = LabelingScheme::Original;
};

// Additive-smoothing multinomial fit. Feature values act as non-negative
// event weights: weight[c][f] = (sum of f over class c + alpha) /
// (sum of all features over class c + 40*alpha). Throws when a class has no
// samples or a feature value is negative.
TrainedClassifier train(const std::vector<std::pair<FeatureVector, Label>>& refs, double alpha,
                        LabelingScheme scheme);

// Normalized posterior {P(Malicious|x), P(Benign|x)}, computed in log space.
std::array<double, kClassCount> posterior(const TrainedClassifier& clf, const FeatureVector& x);

struct Classification {
  bool answered = false;          // false means the gate deferred
  Label label = Label::Benign;    // Malicious or Benign when answered
  double confidence = 0.0;        // max posterior rounded to 12 decimals
  std::array<double, kClassCount> posteriors{};
};

// Answers with the argmax class iff the rounded confidence clears
// t_classification; posterior ties go to Malicious.
Classification classify(const TrainedClassifier& clf, const FeatureVector& x,
                        double t_classification);

nlohmann::json classifier_to_json(const TrainedClassifier& clf);
TrainedClassifier classifier_from_json(const nlohmann::json& j);

}  // namespace malscope
