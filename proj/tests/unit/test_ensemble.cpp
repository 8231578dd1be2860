#include <doctest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "malscope/ensemble.hpp"
#include "malscope/synth.hpp"

using namespace malscope;
using testutil::hex_id;
using testutil::make_entry;
using testutil::make_record;
using testutil::make_report;

namespace {

GenSpec small_spec(Scenario scenario) {
  GenSpec spec;
  spec.seed = 424242;
  spec.name = "ens";
  spec.n_benign_refs = 24;
  spec.n_malicious_refs = 16;
  spec.n_test = 30;
  spec.scenario = scenario;
  if (scenario == Scenario::Confusion) {
    spec.fraction_repackaged = 0.5;
    spec.fraction_benign_update = 0.2;
    spec.fraction_identical = 0.1;
    spec.fraction_out_of_sample = 0.2;
  }
  return spec;
}

std::vector<const AppRecord*> test_records(const DatasetManifest& m) {
  std::vector<const AppRecord*> out;
  for (const auto& e : m.entries) out.push_back(&e.record);
  return out;
}

}  // namespace

TEST_SUITE("ensemble") {

TEST_CASE("detection params validate threshold ranges") {
  DetectionParams p;
  CHECK_NOTHROW(p.validate());
  p.t_match = 1.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p.t_match = 1.0;
  p.t_classification = -0.1;
  CHECK_THROWS_AS(p.validate(), Error);
  p.t_classification = 1.0;
  p.deep.d_match = 9;
  CHECK_THROWS_AS(p.validate(), Error);
  p.deep.d_match = 2;
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("preparing on a test manifest or an unlabelable reference fails") {
  const auto [reference, test] = generate(small_spec(Scenario::Conventional));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  CHECK_THROWS_AS(PreparedPipeline::prepare(test, params), Error);

  // An all-benign reference cannot train the two-class model; the error
  // names the missing class.
  DatasetManifest all_benign;
  all_benign.name = "allb";
  all_benign.role = ManifestRole::Reference;
  for (unsigned i = 0; i < 4; ++i)
    all_benign.entries.push_back(make_entry(make_record(i, "com.b.app" + std::to_string(i)),
                                            Label::Benign,
                                            {make_report(hex_id(i), Date{2018, 1, 1}, 0)}));
  try {
    PreparedPipeline::prepare(all_benign, params);
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("malicious") != std::string::npos);
    CHECK(std::string(e.what()).find("allb") != std::string::npos);
  }
}

TEST_CASE("stage bookkeeping: stages run in order and stop at the answering stage") {
  const auto [reference, test] = generate(small_spec(Scenario::Confusion));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  params.t_classification = 0.9;
  const auto pipeline = PreparedPipeline::prepare(reference, params);

  for (const AppRecord* rec : test_records(test)) {
    const Verdict v = pipeline.classify_app(*rec);
    REQUIRE(!v.stages_run.empty());
    const std::vector<Method> expected_prefix = {Method::Quick, Method::Probabilistic,
                                                 Method::Deep};
    REQUIRE(v.stages_run.size() <= 3);
    for (std::size_t i = 0; i < v.stages_run.size(); ++i)
      CHECK(v.stages_run[i] == expected_prefix[i]);

    if (v.label == VerdictLabel::Unclassified) {
      CHECK(v.method == Method::None);
      CHECK(v.stages_run.size() == 3);
    } else {
      // The answering stage is the last one that ran.
      CHECK(v.method == v.stages_run.back());
    }
    // Confidence only accompanies probabilistic answers.
    CHECK(v.confidence.has_value() == (v.method == Method::Probabilistic));
    // Stage timings are only nonzero for stages that ran.
    for (std::size_t s = v.stages_run.size(); s < 3; ++s) CHECK(v.stage_seconds[s] == 0.0);
  }
}

TEST_CASE("ensemble coverage dominates each standalone stage") {
  const auto [reference, test] = generate(small_spec(Scenario::Confusion));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  params.t_classification = 0.9;
  const auto pipeline = PreparedPipeline::prepare(reference, params);

  std::set<std::string> ensemble_classified;
  for (const AppRecord* rec : test_records(test)) {
    const Verdict v = pipeline.classify_app(*rec);
    if (v.label != VerdictLabel::Unclassified) ensemble_classified.insert(v.id);
  }
  for (const AppRecord* rec : test_records(test)) {
    if (pipeline.quick_only(*rec).outcome != QuickOutcome::Deferred)
      CHECK(ensemble_classified.count(rec->id) == 1);
    if (pipeline.probabilistic_only(*rec).answered)
      CHECK(ensemble_classified.count(rec->id) == 1);
    if (pipeline.deep_only(*rec).verdict != VerdictLabel::Unclassified)
      CHECK(ensemble_classified.count(rec->id) == 1);
  }
}

TEST_CASE("parallel classification is deterministic and id-sorted") {
  const auto [reference, test] = generate(small_spec(Scenario::Confusion));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  params.t_classification = 0.9;
  const auto pipeline = PreparedPipeline::prepare(reference, params);
  const auto tests = test_records(test);

  const auto serial = classify_many(pipeline, tests, 1);
  const auto parallel = classify_many(pipeline, tests, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i + 1 < serial.size(); ++i) CHECK(serial[i].id < serial[i + 1].id);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].id == parallel[i].id);
    CHECK(serial[i].label == parallel[i].label);
    CHECK(serial[i].method == parallel[i].method);
    CHECK(serial[i].confidence == parallel[i].confidence);
  }
}

TEST_CASE("scheme choice changes cluster membership when labels flip") {
  // One reference app is flagged by 14 of 60 scanners: malicious under the
  // any-positive scheme (kept out of the benign cluster index), benign under
  // the majority scheme (included).
  DatasetManifest reference;
  reference.name = "flip";
  reference.role = ManifestRole::Reference;
  reference.entries.push_back(make_entry(make_record(1, "com.flip.app"), Label::Benign,
                                         {make_report(hex_id(1), Date{2018, 1, 1}, 14)}));
  reference.entries.push_back(make_entry(make_record(2, "org.clean.app"), Label::Benign,
                                         {make_report(hex_id(2), Date{2018, 1, 1}, 0)}));
  AppRecord mal = make_record(3, "net.bad.app");
  reference.entries.push_back(make_entry(std::move(mal), Label::Malicious,
                                         {make_report(hex_id(3), Date{2018, 1, 1}, 40)}));

  DetectionParams strict;
  strict.scheme = LabelingScheme::Vt1Vt1;
  const auto strict_pipeline = PreparedPipeline::prepare(reference, strict);

  DetectionParams majority;
  majority.scheme = LabelingScheme::Vt50pVt50p;
  const auto majority_pipeline = PreparedPipeline::prepare(reference, majority);

  auto member_count = [](const ClusterIndex& idx) {
    std::size_t n = 0;
    for (const auto& [center, members] : idx.clusters) n += members.size();
    return n;
  };
  CHECK(member_count(strict_pipeline.cluster_index()) == 1);
  CHECK(member_count(majority_pipeline.cluster_index()) == 2);
}

TEST_CASE("excluded references stay out of training and deep matching") {
  DatasetManifest reference;
  reference.name = "gapref";
  reference.role = ManifestRole::Reference;
  reference.entries.push_back(make_entry(make_record(1, "com.gap.app"), Label::Benign,
                                         {make_report(hex_id(1), Date{2018, 1, 1}, 14)}));
  reference.entries.push_back(make_entry(make_record(2, "org.clean.app"), Label::Benign,
                                         {make_report(hex_id(2), Date{2018, 1, 1}, 0)}));
  reference.entries.push_back(make_entry(make_record(3, "net.bad.app"), Label::Malicious,
                                         {make_report(hex_id(3), Date{2018, 1, 1}, 40)}));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt50pVt1;
  const auto pipeline = PreparedPipeline::prepare(reference, params);

  CHECK(pipeline.reference_labels().at(hex_id(1)).label == Label::Excluded);
  CHECK(pipeline.deep_refs().size() == 2);
  for (const auto& [rec, label] : pipeline.deep_refs()) CHECK(rec->id != hex_id(1));
}

TEST_CASE("classifier override must match the pipeline scheme") {
  const auto [reference, test] = generate(small_spec(Scenario::Conventional));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  auto pipeline = PreparedPipeline::prepare(reference, params);

  TrainedClassifier same = pipeline.classifier();
  CHECK_NOTHROW(pipeline.override_classifier(same));

  TrainedClassifier other = pipeline.classifier();
  other.scheme = LabelingScheme::Original;
  CHECK_THROWS_AS(pipeline.override_classifier(other), Error);
}

TEST_CASE("verdict JSON honors timing, explanation, and truth options") {
  Verdict v;
  v.id = hex_id(5);
  v.label = VerdictLabel::Malicious;
  v.method = Method::Probabilistic;
  v.confidence = 0.987;
  v.elapsed_seconds = 0.5;
  v.explanation = {{"posterior_malicious", 0.987}, {"posterior_benign", 0.013}};

  const nlohmann::json with_timing = verdict_to_json(v);
  CHECK(with_timing.at("id") == hex_id(5));
  CHECK(with_timing.at("label") == "malicious");
  CHECK(with_timing.at("method") == "probabilistic");
  CHECK(with_timing.at("confidence") == 0.987);
  CHECK(with_timing.contains("elapsed_seconds"));
  CHECK_FALSE(with_timing.contains("explanation"));

  VerdictWriteOptions quiet;
  quiet.include_timing = false;
  quiet.include_explanation = true;
  const nlohmann::json no_timing = verdict_to_json(v, quiet, Label::Malicious);
  CHECK_FALSE(no_timing.contains("elapsed_seconds"));
  CHECK(no_timing.at("explanation").at("posterior_malicious") == 0.987);
  CHECK(no_timing.at("truth") == "malicious");

  Verdict unanswered;
  unanswered.id = hex_id(6);
  const nlohmann::json u = verdict_to_json(unanswered, quiet);
  CHECK(u.at("label") == "unclassified");
  CHECK(u.at("method") == "none");
  CHECK(u.at("confidence").is_null());
}

TEST_CASE("verdict JSONL stream is one object per line in id order") {
  const auto [reference, test] = generate(small_spec(Scenario::Conventional));
  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  params.t_classification = 0.9;
  const auto pipeline = PreparedPipeline::prepare(reference, params);
  const auto verdicts = classify_many(pipeline, test_records(test), 2);

  std::ostringstream out;
  VerdictWriteOptions opts;
  opts.include_timing = false;
  write_verdicts_jsonl(verdicts, out, opts);

  std::istringstream lines(out.str());
  std::string line;
  std::size_t count = 0;
  std::string prev_id;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string id = j.at("id").get<std::string>();
    if (count > 0) CHECK(prev_id < id);
    prev_id = id;
    ++count;
  }
  CHECK(count == verdicts.size());
}

}  // TEST_SUITE
