#include "malscope/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace malscope {

using nlohmann::json;

FeatureVector extract_features(const AppRecord& r) {
  FeatureVector f{};
  f[0] = static_cast<double>(r.min_sdk);
  f[1] = static_cast<double>(r.max_sdk);
  f[2] = static_cast<double>(r.activities.size());
  f[3] = static_cast<double>(r.services.size());
  f[4] = static_cast<double>(r.receivers.size());
  f[5] = static_cast<double>(r.providers.size());
  const double total_perms = static_cast<double>(r.permissions.size());
  f[6] = total_perms;
  if (total_perms > 0) {
    long long android = 0, custom = 0, dangerous = 0;
    for (const auto& p : r.permissions) {
      (p.category == PermissionCategory::Android ? android : custom) += 1;
      if (p.dangerous) ++dangerous;
    }
    f[7] = static_cast<double>(android) / total_perms;
    f[8] = static_cast<double>(custom) / total_perms;
    f[9] = static_cast<double>(dangerous) / total_perms;
  }
  f[10] = static_cast<double>(r.classes.size());
  f[11] = static_cast<double>(r.methods.size());
  const auto& keys = api_call_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto it = r.api_call_counts.find(keys[i]);
    f[12 + i] = it == r.api_call_counts.end() ? 0.0 : static_cast<double>(it->second);
  }
  f[39] = static_cast<double>(static_cast<int>(r.compiler));
  return f;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    n[0] = "min_sdk";
    n[1] = "max_sdk";
    n[2] = "activity_count";
    n[3] = "service_count";
    n[4] = "receiver_count";
    n[5] = "provider_count";
    n[6] = "permission_count";
    n[7] = "android_permission_ratio";
    n[8] = "custom_permission_ratio";
    n[9] = "dangerous_permission_ratio";
    n[10] = "class_count";
    n[11] = "method_count";
    const auto& keys = api_call_keys();
    for (std::size_t i = 0; i < keys.size(); ++i) n[12 + i] = "calls." + keys[i];
    n[39] = "compiler_ordinal";
    return n;
  }();
  return names;
}

namespace {

std::size_t class_slot(Label label) {
  switch (label) {
    case Label::Malicious: return 0;
    case Label::Benign: return 1;
    case Label::Excluded: break;
  }
  throw Error("classifier training sample labeled Excluded; filter by scheme first");
}

double round12(double x) { return std::round(x * 1e12) / 1e12; }

}  // namespace

TrainedClassifier train(const std::vector<std::pair<FeatureVector, Label>>& refs, double alpha,
                        LabelingScheme scheme) {
  if (alpha <= 0) throw Error("smoothing alpha must be positive");
  std::array<long long, kClassCount> counts{};
  std::array<std::array<double, kFeatureCount>, kClassCount> sums{};
  for (const auto& [x, label] : refs) {
    const std::size_t c = class_slot(label);
    ++counts[c];
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (x[f] < 0) throw Error("negative feature value in training data");
      sums[c][f] += x[f];
    }
  }
  for (std::size_t c = 0; c < kClassCount; ++c)
    if (counts[c] == 0)
      throw Error("cannot train: no " + std::string(to_string(kClassOrder[c])) +
                  " samples in the reference set");

  TrainedClassifier clf;
  clf.alpha = alpha;
  clf.scheme = scheme;
  const double total = static_cast<double>(refs.size());
  for (std::size_t c = 0; c < kClassCount; ++c) {
    clf.priors[c] = static_cast<double>(counts[c]) / total;
    const double mass =
        std::accumulate(sums[c].begin(), sums[c].end(), 0.0) + alpha * kFeatureCount;
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      clf.weights[c][f] = (sums[c][f] + alpha) / mass;
  }
  return clf;
}

std::array<double, kClassCount> posterior(const TrainedClassifier& clf, const FeatureVector& x) {
  std::array<double, kClassCount> scores{};
  for (std::size_t c = 0; c < kClassCount; ++c) {
    double s = std::log(clf.priors[c]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) s += x[f] * std::log(clf.weights[c][f]);
    scores[c] = s;
  }
  const double peak = *std::max_element(scores.begin(), scores.end());
  double norm = 0.0;
  std::array<double, kClassCount> post{};
  for (std::size_t c = 0; c < kClassCount; ++c) {
    post[c] = std::exp(scores[c] - peak);
    norm += post[c];
  }
  for (auto& p : post) p /= norm;
  return post;
}

Classification classify(const TrainedClassifier& clf, const FeatureVector& x,
                        double t_classification) {
  Classification result;
  result.posteriors = posterior(clf, x);
  // >= keeps ties on the Malicious side (slot 0).
  const std::size_t best = result.posteriors[0] >= result.posteriors[1] ? 0 : 1;
  // Rounding before the gate lets t_classification = 1.0 fire on posteriors
  // that are 1.0 up to float underflow.
  result.confidence = round12(result.posteriors[best]);
  result.label = kClassOrder[best];
  result.answered = result.confidence >= t_classification;
  return result;
}

json classifier_to_json(const TrainedClassifier& clf) {
  json j;
  j["classes"] = json::array();
  for (const Label c : kClassOrder) j["classes"].push_back(to_string(c));
  j["priors"] = clf.priors;
  j["weights"] = clf.weights;
  j["alpha"] = clf.alpha;
  j["scheme"] = to_string(clf.scheme);
  return j;
}

TrainedClassifier classifier_from_json(const json& j) {
  TrainedClassifier clf;
  try {
    const auto classes = j.at("classes").get<std::vector<std::string>>();
    if (classes.size() != kClassCount || classes[0] != "malicious" || classes[1] != "benign")
      throw Error("classifier JSON must list classes [malicious, benign]");
    clf.priors = j.at("priors").get<std::array<double, kClassCount>>();
    clf.weights = j.at("weights").get<std::array<std::array<double, kFeatureCount>, kClassCount>>();
    clf.alpha = j.at("alpha").get<double>();
    clf.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(std::string("malformed classifier JSON: ") + e.what());
  }
  for (const double p : clf.priors)
    if (!(p > 0.0 && p <= 1.0)) throw Error("classifier JSON: priors must lie in (0, 1]");
  for (const auto& row : clf.weights)
    for (const double w : row)
      if (!(w > 0.0 && w <= 1.0)) throw Error("classifier JSON: weights must lie in (0, 1]");
  if (!(clf.alpha > 0.0)) throw Error("classifier JSON: alpha must be positive");
  return clf;
}

}  // namespace malscope
