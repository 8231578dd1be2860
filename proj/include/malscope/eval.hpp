#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "malscope/ensemble.hpp"

namespace malscope {

// Scheme ground truth for the test set at as_of; Excluded apps are dropped
// here and stay out of every downstream denominator.
std::map<std::string, Label> test_truth(const DatasetManifest& test, LabelingScheme scheme,
                                        const Date& as_of);

struct MethodContribution {
  Method method = Method::None;
  long long answered = 0;       // verdicts this method produced
  double fraction = 0.0;        // answered / classified
  long long invocations = 0;    // times the stage ran (answered or deferred)
  double mean_seconds = 0.0;    // mean wall time per invocation
};

struct ExperimentResult {
  std::string dataset;
  LabelingScheme scheme = LabelingScheme::Original;
  std::string method;  // "ensemble", "quick", "probabilistic", or "deep"
  std::string param;   // "-" for ensemble, "%.2f" thresholds, "%d" depths
  long long total = 0;        // test apps surviving the scheme filter
  long long classified = 0;
  long long correct = 0;
  std::optional<double> accuracy;            // null when classified = 0
  std::optional<double> fraction_classified; // null when total = 0 (empty marker)
  bool empty_test_set = false;
  std::vector<MethodContribution> contributions;  // ensemble runs only
  std::vector<Verdict> verdicts;
  std::map<std::string, Label> truth;
};

// Full-cascade run: prepare on the reference, classify every non-Excluded
// test app, and aggregate accuracy, coverage, and per-method contributions.
ExperimentResult run_experiment(const DatasetManifest& reference, const DatasetManifest& test,
                                const DetectionParams& params, int jobs = 1);

struct SweepGrids {
  std::vector<double> t_match;
  std::vector<double> t_classification;  // empty means reuse the t_match grid
  std::vector<int> depth;
};

// Standalone-method grid: every (test set x scheme) pairing runs quick
// matching per t_match point, the classifier per t_classification point, and
// deep matching per depth, each answering or deferring alone. Row count is
// |tests| * |schemes| * (|t_match| + |t_classification| + |depth|).
std::vector<ExperimentResult> sweep(const DatasetManifest& reference,
                                    const std::vector<const DatasetManifest*>& tests,
                                    const std::vector<LabelingScheme>& schemes,
                                    const SweepGrids& grids, const DetectionParams& base,
                                    int jobs = 1);

// dataset,scheme,method,param,accuracy,fraction_classified,classified,total
std::string results_to_csv(const std::vector<ExperimentResult>& results);

// Per-app view used for cross-scheme intersection.
struct EvalVerdict {
  std::string id;
  VerdictLabel label = VerdictLabel::Unclassified;
  Method method = Method::None;
  Label truth = Label::Benign;
};

std::vector<EvalVerdict> to_eval_verdicts(const std::vector<Verdict>& verdicts,
                                          const std::map<std::string, Label>& truth);

struct IntersectionSchemeStats {
  LabelingScheme scheme = LabelingScheme::Original;
  long long correct = 0;
  std::optional<double> accuracy;  // null on an empty intersection
};

struct IntersectionRow {
  std::string method;  // quick | probabilistic | deep | ensemble
  std::vector<std::string> ids;  // apps classified under every scheme, sorted
  std::vector<IntersectionSchemeStats> per_scheme;
};

struct IntersectionReport {
  std::vector<IntersectionRow> rows;
};

// For each method, intersects the per-scheme classified app sets and scores
// each scheme on that shared set; the set may be empty.
IntersectionReport intersection_report(
    const std::vector<std::pair<LabelingScheme, std::vector<EvalVerdict>>>& by_scheme);

// method,scheme,intersection_size,correct,accuracy
std::string intersection_to_csv(const IntersectionReport& report);

struct UrlReport {
  std::string url;
  int positives = 0;
  int total = 1;
};

struct GapReport {
  long long total_apps = 0;
  std::vector<std::string> gap_ids;  // Excluded under vt50p-vt1, sorted
  double gap_fraction = 0.0;
  long long families_known = 0;                   // gap apps with a family entry
  std::map<std::string, double> family_percent;   // over gap apps with known family
  long long urls_total = 0;
  long long urls_flagged = 0;                     // positives >= 1
  std::optional<double> urls_flagged_fraction;
  std::optional<double> urls_mean_positives;      // over all provided URL reports
};

// Gap set = Excluded under vt50p-vt1 at as_of. Family distribution covers the
// gap apps present in `families`; URL aggregates cover the provided reports.
// Both side inputs are optional and independently missing fields stay null.
GapReport gap_analysis(const DatasetManifest& manifest, const Date& as_of,
                       const std::map<std::string, std::string>* families = nullptr,
                       const std::map<std::string, UrlReport>* url_reports = nullptr);

nlohmann::json gap_report_to_json(const GapReport& report, bool include_ids);

// Two-column app_id,family CSV (optional header row).
std::map<std::string, std::string> load_families_csv(const std::filesystem::path& path);
// JSONL of {url, positives, total}.
std::map<std::string, UrlReport> load_url_reports_jsonl(const std::filesystem::path& path);

}  // namespace malscope
