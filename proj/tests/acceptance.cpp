// Release gate for the workbench: eleven end-to-end checks, one line of
// output each, nonzero exit if any fails. Tolerances are pinned here so a
// regression cannot hide behind a config change.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "malscope/classifier.hpp"
#include "malscope/deep_matching.hpp"
#include "malscope/ensemble.hpp"
#include "malscope/eval.hpp"
#include "malscope/labeling.hpp"
#include "malscope/similarity.hpp"
#include "malscope/synth.hpp"
#include "malscope/types.hpp"

using namespace malscope;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string hex_id(unsigned n) {
  char buf[41];
  std::snprintf(buf, sizeof(buf), "%040x", n);
  return std::string(buf);
}

AppRecord tiny_record(unsigned id_num, const std::string& package) {
  AppRecord r;
  r.id = hex_id(id_num);
  r.package_name = package;
  r.dex_digest = "digest-" + std::to_string(id_num);
  r.compiler = CompilerTag::Dx;
  r.min_sdk = 9;
  r.max_sdk = 28;
  return r;
}

ManifestEntry tiny_entry(unsigned id_num, const std::string& package, Label original,
                         int positives, int delta) {
  ManifestEntry e;
  AppRecord record = tiny_record(id_num, package);
  e.id = record.id;
  e.original_label = original;
  e.record_path = "records/" + e.id + ".json";
  ScanReport rep;
  rep.app_id = e.id;
  rep.scan_date = Date{2018, 6, 1};
  rep.positives = positives;
  rep.total = 60;
  rep.positives_delta = delta;
  e.reports.push_back(rep);
  e.report_paths.push_back("reports/" + e.id + "-1.json");
  e.record = std::move(record);
  return e;
}

// ---------------------------------------------------------------------------
// 1. A 14-of-60 report labels differently under each flagging regime.
bool check_scheme_labeling(std::string& detail) {
  ScanReport rep;
  rep.app_id = hex_id(1);
  rep.scan_date = Date{2018, 6, 1};
  rep.positives = 14;
  rep.total = 60;

  const auto start = Clock::now();
  const bool ok = apply_scheme(LabelingScheme::Vt1Vt1, rep, Label::Benign) == Label::Malicious &&
                  apply_scheme(LabelingScheme::Vt50pVt50p, rep, Label::Benign) == Label::Benign &&
                  apply_scheme(LabelingScheme::Vt50pVt1, rep, Label::Benign) == Label::Excluded;
  const double elapsed = seconds_since(start);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f ms", elapsed * 1e3);
  detail = buf;
  return ok && elapsed < 1e-3;
}

// ---------------------------------------------------------------------------
// 2. Three 200-app test sets, four schemes, a 4-point threshold grid used by
//    both threshold stages, and three depths: exactly 132 result rows.
bool check_sweep_cardinality(std::string& detail) {
  GenSpec ref_spec;
  ref_spec.seed = 90001;
  ref_spec.name = "sweep";
  ref_spec.n_benign_refs = 60;
  ref_spec.n_malicious_refs = 40;
  ref_spec.n_test = 0;
  ref_spec.fraction_out_of_sample = 1.0;
  ref_spec.scenario = Scenario::Conventional;
  const DatasetManifest reference = generate(ref_spec).first;

  std::vector<DatasetManifest> tests;
  for (int i = 0; i < 3; ++i) {
    GenSpec spec = ref_spec;
    spec.seed = 90010 + static_cast<std::uint64_t>(i);
    spec.name = "set" + std::to_string(i);
    spec.n_test = 200;
    if (i == 1) {
      spec.scenario = Scenario::Confusion;
      spec.fraction_repackaged = 0.4;
      spec.fraction_benign_update = 0.3;
      spec.fraction_identical = 0.1;
      spec.fraction_out_of_sample = 0.2;
    }
    tests.push_back(generate(spec).second);
  }
  const std::vector<const DatasetManifest*> test_ptrs = {&tests[0], &tests[1], &tests[2]};
  const std::vector<LabelingScheme> schemes = {LabelingScheme::Original, LabelingScheme::Vt1Vt1,
                                               LabelingScheme::Vt50pVt50p,
                                               LabelingScheme::Vt50pVt1};
  SweepGrids grids;
  grids.t_match = {0.7, 0.8, 0.9, 1.0};
  grids.depth = {1, 2, 3};  // t_classification reuses the t_match grid

  const auto start = Clock::now();
  const auto results = sweep(reference, test_ptrs, schemes, grids, DetectionParams{}, 4);
  const double elapsed = seconds_since(start);

  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu rows in %.1f s", results.size(), elapsed);
  detail = buf;
  return results.size() == 132 && elapsed < 60.0;
}

// ---------------------------------------------------------------------------
// 3. Depth sub-scores (0.8, 0.65, 0.79) average to 0.74667 at full depth.
bool check_depth_average(std::string& detail) {
  const double subscores[] = {0.8, 0.65, 0.79};
  const double score = cumulative_score(subscores);
  char printed[16];
  std::snprintf(printed, sizeof(printed), "%.5f", score);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "score %s", printed);
  detail = buf;
  return std::abs(score - 2.24 / 3.0) <= 1e-9 && std::string(printed) == "0.74667";
}

// ---------------------------------------------------------------------------
// 4. Confusion corpus: 100 repackaged clones and 20 identical-digest copies
//    all resolve in the first stage at t_match = 1.0, with perfect accuracy
//    and coverage.
bool check_confusion_oracle(std::string& detail) {
  GenSpec spec;
  spec.seed = 90100;
  spec.name = "confusion";
  spec.n_benign_refs = 40;
  spec.n_malicious_refs = 20;
  spec.package_family_size = 1;
  spec.scenario = Scenario::Confusion;
  spec.n_test = 120;
  spec.fraction_repackaged = 100.0 / 120.0;
  spec.fraction_benign_update = 0.0;
  spec.fraction_identical = 20.0 / 120.0;
  spec.fraction_out_of_sample = 0.0;

  const auto start = Clock::now();
  const auto [reference, test] = generate(spec);

  DetectionParams params;
  params.scheme = LabelingScheme::Vt1Vt1;
  params.t_match = 1.0;
  params.distance_threshold = 1;

  // Guard: singleton families really do make one cluster per benign ref, so
  // the exact-name lookup below is meaningful.
  const auto pipeline = PreparedPipeline::prepare(reference, params);
  if (pipeline.cluster_index().clusters.size() != 40) {
    detail = "cluster guard failed";
    return false;
  }

  const ExperimentResult r = run_experiment(reference, test, params, 4);
  const double elapsed = seconds_since(start);

  long long malicious = 0, benign = 0;
  bool all_first_stage = true;
  for (const auto& v : r.verdicts) {
    if (v.method != Method::Quick) all_first_stage = false;
    if (v.label == VerdictLabel::Malicious) ++malicious;
    if (v.label == VerdictLabel::Benign) ++benign;
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld malicious, %lld benign, %.2f s", malicious, benign,
                elapsed);
  detail = buf;
  return r.total == 120 && malicious == 100 && benign == 20 && all_first_stage &&
         r.accuracy.has_value() && *r.accuracy == 1.0 && r.fraction_classified.has_value() &&
         *r.fraction_classified == 1.0 && elapsed < 5.0;
}

// ---------------------------------------------------------------------------
// 5. Out-of-sample corpus: the first stage defers everything and the
//    probabilistic stage answers at least 95% correctly at its 0.9 gate,
//    identically on a rerun.
bool check_conventional_behavior(std::string& detail) {
  GenSpec spec;
  spec.seed = 90200;
  spec.name = "conv";
  spec.n_test = 200;

  auto run = [&spec]() {
    const auto [reference, test] = generate(spec);
    DetectionParams params;
    params.scheme = LabelingScheme::Vt1Vt1;
    params.t_classification = 0.9;
    const auto pipeline = PreparedPipeline::prepare(reference, params);
    const auto truth = test_truth(test, params.scheme, params.as_of);

    long long deferred = 0, answered = 0, correct = 0;
    std::vector<std::pair<std::string, Label>> answers;
    for (const auto& entry : test.entries) {
      if (pipeline.quick_only(entry.record).outcome == QuickOutcome::Deferred) ++deferred;
      const Classification c = pipeline.probabilistic_only(entry.record);
      if (!c.answered) continue;
      ++answered;
      if (c.label == truth.at(entry.id)) ++correct;
      answers.emplace_back(entry.id, c.label);
    }
    struct Outcome {
      long long deferred, answered, correct;
      std::vector<std::pair<std::string, Label>> answers;
    };
    return Outcome{deferred, answered, correct, std::move(answers)};
  };

  const auto first = run();
  const auto second = run();

  const double accuracy =
      first.answered > 0 ? static_cast<double>(first.correct) / first.answered : 0.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld/200 deferred, accuracy %.3f on %lld answers",
                first.deferred, accuracy, first.answered);
  detail = buf;
  return first.deferred == 200 && first.answered > 0 && accuracy >= 0.95 &&
         first.answers == second.answers;
}

// ---------------------------------------------------------------------------
// 6. Posteriors agree with a from-scratch evaluation of the smoothed
//    multinomial formula on 100 random fixtures.
bool check_posterior_oracle(std::string& detail) {
  std::mt19937_64 rng(90300);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 27;
    std::vector<std::pair<FeatureVector, Label>> refs;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureVector x{};
      for (auto& v : x) v = static_cast<double>(rng() % 12);
      // Guarantee both classes appear.
      const Label y = i < 2 ? kClassOrder[i] : kClassOrder[rng() % 2];
      refs.emplace_back(x, y);
    }
    const double alpha = 0.5 + static_cast<double>(rng() % 4) * 0.5;
    const TrainedClassifier clf = train(refs, alpha, LabelingScheme::Vt1Vt1);

    FeatureVector query{};
    for (auto& v : query) v = static_cast<double>(rng() % 12);

    // Independent evaluation: rebuild the weights from the raw sums and use
    // long-double log accumulation.
    std::array<long double, 2> class_count{}, class_mass{};
    std::array<std::array<long double, kFeatureCount>, 2> sums{};
    for (const auto& [x, y] : refs) {
      const std::size_t c = y == Label::Malicious ? 0 : 1;
      class_count[c] += 1.0L;
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        sums[c][f] += x[f];
        class_mass[c] += x[f];
      }
    }
    std::array<long double, 2> logp{};
    for (std::size_t c = 0; c < 2; ++c) {
      logp[c] = std::log(class_count[c] / static_cast<long double>(n));
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const long double w =
            (sums[c][f] + alpha) / (class_mass[c] + alpha * kFeatureCount);
        logp[c] += static_cast<long double>(query[f]) * std::log(w);
      }
    }
    const long double peak = std::max(logp[0], logp[1]);
    const long double z = std::exp(logp[0] - peak) + std::exp(logp[1] - peak);
    const std::array<double, 2> expected = {
        static_cast<double>(std::exp(logp[0] - peak) / z),
        static_cast<double>(std::exp(logp[1] - peak) / z)};

    const auto actual = posterior(clf, query);
    for (std::size_t c = 0; c < 2; ++c)
      worst = std::max(worst, std::abs(actual[c] - expected[c]));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max |diff| %.2e", worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---------------------------------------------------------------------------
// 7. Similarity metric properties: symmetry, self-similarity, the edit
//    distance triangle inequality, and brute-force Jaccard agreement.
bool check_similarity_properties(std::string& detail) {
  std::mt19937_64 rng(90400);
  const auto random_string = [&rng]() {
    const std::size_t len = rng() % 14;
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng() % 6);
    return s;
  };
  const auto random_list = [&rng, &random_string]() {
    std::vector<std::string> v;
    const std::size_t len = rng() % 8;
    for (std::size_t i = 0; i < len; ++i) v.push_back(random_string());
    // List similarity expects canonical inputs, the form every stored record
    // uses; generate the same form here.
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };

  long long failures = 0;
  for (int i = 0; i < 300; ++i) {
    const std::string a = random_string(), b = random_string();
    if (jaccard_strings(a, b) != jaccard_strings(b, a)) ++failures;
    if (jaccard_strings(a, a) != 1.0) ++failures;
    if (levenshtein(a, b) != levenshtein(b, a)) ++failures;
    if (levenshtein(a, a) != 0) ++failures;
  }
  for (int i = 0; i < 1000; ++i) {
    const std::string a = random_string(), b = random_string(), c = random_string();
    if (levenshtein(a, c) > levenshtein(a, b) + levenshtein(b, c)) ++failures;
  }
  for (int i = 0; i < 500; ++i) {
    const auto a = random_list(), b = random_list();
    const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::set<std::string> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.begin()));
    const double expected =
        uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    if (std::abs(jaccard_lists(a, b) - expected) > 1e-15) ++failures;
    if (jaccard_lists(a, b) != jaccard_lists(b, a)) ++failures;
    if (jaccard_lists(a, a) != 1.0) ++failures;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld property failures", failures);
  detail = buf;
  return failures == 0;
}

// ---------------------------------------------------------------------------
// 8. Cross-scheme intersection: disjoint per-scheme coverage for a method
//    yields a zero-app shared set.
bool check_intersection_semantics(std::string& detail) {
  const std::vector<EvalVerdict> a = {
      {hex_id(1), VerdictLabel::Malicious, Method::Deep, Label::Malicious},
      {hex_id(2), VerdictLabel::Unclassified, Method::None, Label::Benign},
      {hex_id(3), VerdictLabel::Malicious, Method::Quick, Label::Malicious},
  };
  const std::vector<EvalVerdict> b = {
      {hex_id(1), VerdictLabel::Unclassified, Method::None, Label::Malicious},
      {hex_id(2), VerdictLabel::Benign, Method::Deep, Label::Benign},
      {hex_id(3), VerdictLabel::Malicious, Method::Quick, Label::Malicious},
  };
  const auto report = intersection_report(
      {{LabelingScheme::Vt1Vt1, a}, {LabelingScheme::Vt50pVt50p, b}});

  const IntersectionRow* deep = nullptr;
  const IntersectionRow* quick = nullptr;
  for (const auto& row : report.rows) {
    if (row.method == "deep") deep = &row;
    if (row.method == "quick") quick = &row;
  }
  if (!deep || !quick) {
    detail = "missing method rows";
    return false;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "deep shares %zu, quick shares %zu", deep->ids.size(),
                quick->ids.size());
  detail = buf;
  // Deep classified {1} under one scheme and {2} under the other: no overlap.
  // Quick classified {3} under both: a singleton overlap for contrast.
  return deep->ids.empty() && !deep->per_scheme[0].accuracy.has_value() &&
         quick->ids.size() == 1;
}

// ---------------------------------------------------------------------------
// 9. Composition: positives_delta {+2, -1, 0} count one riser and one faller.
bool check_composition_deltas(std::string& detail) {
  DatasetManifest m;
  m.name = "delta";
  m.role = ManifestRole::Test;
  m.entries.push_back(tiny_entry(1, "com.delta.up", Label::Benign, 10, +2));
  m.entries.push_back(tiny_entry(2, "com.delta.down", Label::Benign, 10, -1));
  m.entries.push_back(tiny_entry(3, "com.delta.flat", Label::Benign, 10, 0));

  const CompositionReport report = composition_report(m, Date{2019, 1, 31});
  char buf[64];
  std::snprintf(buf, sizeof(buf), "more=%lld less=%lld", report.more_malicious_count,
                report.less_malicious_count);
  detail = buf;
  return report.total == 3 && report.more_malicious_count == 1 &&
         report.less_malicious_count == 1;
}

// ---------------------------------------------------------------------------
// 10. URL aggregation: 98 of 553 flagged reports give fraction 0.17722.
bool check_url_fraction(std::string& detail) {
  DatasetManifest m;
  m.name = "urlgap";
  m.role = ManifestRole::Test;
  m.entries.push_back(tiny_entry(1, "com.gap.one", Label::Benign, 5, 0));
  m.entries.push_back(tiny_entry(2, "com.clean.two", Label::Benign, 0, 0));

  std::map<std::string, UrlReport> urls;
  for (int i = 0; i < 553; ++i) {
    UrlReport r;
    r.url = "http://site" + std::to_string(i) + ".example/app";
    r.positives = i < 98 ? 1 + i % 4 : 0;
    r.total = 66;
    urls[r.url] = r;
  }

  const GapReport report = gap_analysis(m, Date{2019, 1, 31}, nullptr, &urls);
  if (!report.urls_flagged_fraction) {
    detail = "fraction missing";
    return false;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "fraction %.5f", *report.urls_flagged_fraction);
  detail = buf;
  return report.urls_total == 553 && report.urls_flagged == 98 &&
         std::abs(*report.urls_flagged_fraction - 0.17722) <= 1e-5;
}

// ---------------------------------------------------------------------------
// 11. Two cold-start runs over 500 apps with four worker threads emit
//     identical verdict JSONL once timing fields are suppressed.
bool check_determinism(std::string& detail) {
  auto run = []() {
    GenSpec spec;
    spec.seed = 90500;
    spec.name = "det";
    spec.n_test = 500;

    const auto [reference, test] = generate(spec);
    DetectionParams params;
    params.scheme = LabelingScheme::Vt1Vt1;
    params.t_classification = 0.9;
    const auto pipeline = PreparedPipeline::prepare(reference, params);

    std::vector<const AppRecord*> apps;
    for (const auto& entry : test.entries) apps.push_back(&entry.record);
    const auto verdicts = classify_many(pipeline, apps, 4);

    std::ostringstream out;
    VerdictWriteOptions opts;
    opts.include_timing = false;
    write_verdicts_jsonl(verdicts, out, opts);
    return out.str();
  };

  const std::string first = run();
  const std::string second = run();
  const long long lines = std::count(first.begin(), first.end(), '\n');
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld verdict lines", lines);
  detail = buf;
  return !first.empty() && first == second && lines == 500;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"scheme labeling of a 14-of-60 report", check_scheme_labeling},
      {"sweep grid cardinality (132 rows)", check_sweep_cardinality},
      {"depth-score average of (0.8, 0.65, 0.79)", check_depth_average},
      {"confusion corpus first-stage oracle", check_confusion_oracle},
      {"out-of-sample deferral and classifier accuracy", check_conventional_behavior},
      {"posterior agreement with a brute-force model", check_posterior_oracle},
      {"similarity metric property suite", check_similarity_properties},
      {"cross-scheme intersection on disjoint coverage", check_intersection_semantics},
      {"positives-delta composition counts", check_composition_deltas},
      {"URL flagging fraction aggregation", check_url_fraction},
      {"end-to-end determinism across reruns", check_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("[%2zu/%zu] %-48s %s%s%s\n", i + 1, criteria.size(), criteria[i].name,
                ok ? "PASS" : "FAIL", detail.empty() ? "" : "  -- ", detail.c_str());
  }
  if (failures > 0) {
    std::printf("%d of %zu checks failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu checks passed\n", criteria.size());
  return 0;
}
