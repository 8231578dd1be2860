#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "malscope/corpus.hpp"
#include "malscope/ensemble.hpp"
#include "malscope/eval.hpp"
#include "malscope/synth.hpp"

namespace {

using namespace malscope;

const std::vector<std::string> kSchemeNames = {"original", "vt1-vt1", "vt50p-vt50p", "vt50p-vt1"};

const CLI::Validator kDateValidator(
    [](std::string& value) -> std::string {
      try {
        Date::parse(value);
        return {};
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
    },
    "YYYY-MM-DD");

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot write '" + out_path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + out_path + "'");
}

std::vector<LabelingScheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<LabelingScheme> schemes;
  for (const auto& name : names) {
    if (name == "all") {
      for (const LabelingScheme s : all_schemes()) schemes.push_back(s);
      continue;
    }
    schemes.push_back(scheme_from_string(name));
  }
  return schemes;
}

// Flags shared by the detection subcommands.
struct DetectionFlags {
  std::string scheme = "original";
  std::string as_of = "2019-01-31";
  double t_match = 1.0;
  double t_classification = 1.0;
  int d_match = 2;
  int n_match = 10;
  double alpha = 1.0;
  int cluster_threshold = 5;

  DetectionParams to_params() const {
    DetectionParams p;
    p.scheme = scheme_from_string(scheme);
    p.as_of = Date::parse(as_of);
    p.t_match = t_match;
    p.t_classification = t_classification;
    p.deep.d_match = d_match;
    p.deep.n_match = n_match;
    p.alpha = alpha;
    p.distance_threshold = cluster_threshold;
    return p;
  }
};

void add_detection_flags(CLI::App* sub, DetectionFlags& f, bool with_scheme = true,
                         bool with_thresholds = true) {
  if (with_scheme)
    sub->add_option("--scheme", f.scheme, "Labeling scheme")
        ->check(CLI::IsMember(kSchemeNames))
        ->capture_default_str();
  sub->add_option("--as-of", f.as_of, "Scan-report cutoff date")
      ->check(kDateValidator)
      ->capture_default_str();
  if (with_thresholds) {
    sub->add_option("--tmatch", f.t_match, "Quick-matching similarity threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub->add_option("--tclassification", f.t_classification, "Classifier confidence threshold")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub->add_option("--dmatch", f.d_match, "Deep-matching analysis depth")
        ->check(CLI::Range(1, 3))
        ->capture_default_str();
  }
  sub->add_option("--nmatch", f.n_match, "Deep-matching match-set cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--alpha", f.alpha, "Naive Bayes smoothing")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--cluster-threshold", f.cluster_threshold,
                  "Package-name clustering edit-distance threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

std::string verdicts_to_jsonl(const std::vector<Verdict>& verdicts,
                              const VerdictWriteOptions& options,
                              const std::map<std::string, Label>* truth = nullptr) {
  std::ostringstream out;
  write_verdicts_jsonl(verdicts, out, options, truth);
  return out.str();
}

std::string method_stats_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "method,answered,fraction,invocations,mean_seconds\n";
  char fraction[32], seconds[32];
  for (const auto& c : result.contributions) {
    std::snprintf(fraction, sizeof(fraction), "%.6f", c.fraction);
    std::snprintf(seconds, sizeof(seconds), "%.9f", c.mean_seconds);
    out << to_string(c.method) << ',' << c.answered << ',' << fraction << ',' << c.invocations
        << ',' << seconds << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"malscope: repackaged-malware detection and evaluation workbench"};
  app.require_subcommand(1);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Write a seeded synthetic corpus pair");
  GenSpec gen_spec;
  std::string gen_out;
  std::string gen_scenario = "conventional";
  std::vector<int> gen_benign_profile = {0, 0, 60};
  std::vector<int> gen_malicious_profile = {14, 40, 60};
  std::string gen_first_date = "2013-06-01", gen_second_date = "2018-12-15";
  gen_cmd->add_option("--out", gen_out, "Output directory (reference/ and test/ underneath)")
      ->required();
  gen_cmd->add_option("--seed", gen_spec.seed, "Generator seed")
      ->envname("MALSCOPE_SEED")
      ->capture_default_str();
  gen_cmd->add_option("--name", gen_spec.name, "Corpus base name")->capture_default_str();
  gen_cmd->add_option("--benign", gen_spec.n_benign_refs, "Benign reference apps")
      ->capture_default_str();
  gen_cmd->add_option("--malicious", gen_spec.n_malicious_refs, "Malicious reference apps")
      ->capture_default_str();
  gen_cmd->add_option("--tests", gen_spec.n_test, "Test apps")->capture_default_str();
  gen_cmd->add_option("--scenario", gen_scenario, "Attack scenario")
      ->check(CLI::IsMember({"conventional", "confusion"}))
      ->capture_default_str();
  gen_cmd->add_option("--frac-repackaged", gen_spec.fraction_repackaged,
                      "Repackaged-clone fraction of test apps")
      ->capture_default_str();
  gen_cmd->add_option("--frac-update", gen_spec.fraction_benign_update,
                      "Benign-update fraction of test apps")
      ->capture_default_str();
  gen_cmd->add_option("--frac-identical", gen_spec.fraction_identical,
                      "Identical-digest-copy fraction of test apps")
      ->capture_default_str();
  gen_cmd->add_option("--frac-oos", gen_spec.fraction_out_of_sample,
                      "Out-of-sample fraction of test apps")
      ->capture_default_str();
  gen_cmd->add_option("--frac-oos-malicious", gen_spec.fraction_oos_malicious,
                      "Malicious share of out-of-sample apps")
      ->capture_default_str();
  gen_cmd->add_option("--family-size", gen_spec.package_family_size,
                      "Benign apps per package-name family")
      ->capture_default_str();
  gen_cmd->add_option("--first-date", gen_first_date, "First scan snapshot")
      ->check(kDateValidator)
      ->capture_default_str();
  gen_cmd->add_option("--second-date", gen_second_date, "Second scan snapshot")
      ->check(kDateValidator)
      ->capture_default_str();
  gen_cmd
      ->add_option("--benign-positives", gen_benign_profile,
                   "first,second,total scanner counts for benign apps")
      ->delimiter(',')
      ->expected(3);
  gen_cmd
      ->add_option("--malicious-positives", gen_malicious_profile,
                   "first,second,total scanner counts for malicious apps")
      ->delimiter(',')
      ->expected(3);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Load and validate a dataset manifest");
  std::string ingest_manifest, ingest_materialize, ingest_out;
  ingest_cmd->add_option("--manifest", ingest_manifest, "Manifest path")->required();
  ingest_cmd->add_option("--materialize", ingest_materialize,
                         "Write the per-app reference layout to this directory");
  ingest_cmd->add_option("--out", ingest_out, "Write the summary here instead of stdout");

  // label
  auto* label_cmd = app.add_subcommand("label", "Label every app under a scheme");
  std::string label_manifest, label_out;
  DetectionFlags label_flags;
  label_cmd->add_option("--manifest", label_manifest, "Manifest path")->required();
  label_cmd->add_option("--scheme", label_flags.scheme, "Labeling scheme")
      ->check(CLI::IsMember(kSchemeNames))
      ->capture_default_str();
  label_cmd->add_option("--as-of", label_flags.as_of, "Scan-report cutoff date")
      ->check(kDateValidator)
      ->capture_default_str();
  label_cmd->add_option("--out", label_out, "Write JSONL here instead of stdout");

  // compose
  auto* compose_cmd = app.add_subcommand("compose", "Dataset composition per scheme (CSV)");
  std::string compose_manifest, compose_out, compose_as_of = "2019-01-31";
  compose_cmd->add_option("--manifest", compose_manifest, "Manifest path")->required();
  compose_cmd->add_option("--as-of", compose_as_of, "Scan-report cutoff date")
      ->check(kDateValidator)
      ->capture_default_str();
  compose_cmd->add_option("--out", compose_out, "Write CSV here instead of stdout");

  // prepare
  auto* prepare_cmd = app.add_subcommand("prepare", "Build and export reference-side artifacts");
  std::string prepare_ref, prepare_out;
  DetectionFlags prepare_flags;
  prepare_cmd->add_option("--ref", prepare_ref, "Reference manifest")->required();
  prepare_cmd->add_option("--out", prepare_out, "Artifact directory")->required();
  add_detection_flags(prepare_cmd, prepare_flags, true, false);

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "Run the ensemble over a test manifest");
  std::string classify_ref, classify_test, classify_out, classify_clf;
  DetectionFlags classify_flags;
  int classify_jobs = 1;
  bool classify_explain = false, classify_no_timing = false;
  classify_cmd->add_option("--ref", classify_ref, "Reference manifest")->required();
  classify_cmd->add_option("--test", classify_test, "Test manifest")->required();
  add_detection_flags(classify_cmd, classify_flags);
  classify_cmd->add_option("--classifier", classify_clf,
                           "Reuse a classifier JSON exported by prepare");
  classify_cmd->add_option("--jobs", classify_jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  classify_cmd->add_flag("--explain", classify_explain, "Attach per-verdict detail");
  classify_cmd->add_flag("--no-timing", classify_no_timing, "Omit elapsed_seconds fields");
  classify_cmd->add_option("--out", classify_out, "Write JSONL here instead of stdout");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score the ensemble against scheme truth");
  std::string eval_ref, eval_test, eval_out, eval_format = "csv", eval_stats_out;
  DetectionFlags eval_flags;
  int eval_jobs = 1;
  bool eval_no_timing = false, eval_explain = false;
  eval_cmd->add_option("--ref", eval_ref, "Reference manifest")->required();
  eval_cmd->add_option("--test", eval_test, "Test manifest")->required();
  add_detection_flags(eval_cmd, eval_flags);
  eval_cmd->add_option("--format", eval_format, "csv (result row) or jsonl (per-app verdicts)")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
  eval_cmd->add_option("--method-stats", eval_stats_out,
                       "Write per-method contribution CSV to this path");
  eval_cmd->add_option("--jobs", eval_jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_flag("--explain", eval_explain, "Attach per-verdict detail (jsonl)");
  eval_cmd->add_flag("--no-timing", eval_no_timing, "Omit elapsed_seconds fields (jsonl)");
  eval_cmd->add_option("--out", eval_out, "Write output here instead of stdout");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Standalone-method parameter sweep");
  std::string sweep_ref, sweep_out;
  std::vector<std::string> sweep_tests, sweep_schemes = {"all"};
  std::vector<double> sweep_tmatch = {0.7, 0.8, 0.9, 1.0}, sweep_tclassification;
  std::vector<int> sweep_depth = {1, 2, 3};
  DetectionFlags sweep_flags;
  int sweep_jobs = 1;
  sweep_cmd->add_option("--ref", sweep_ref, "Reference manifest")->required();
  sweep_cmd->add_option("--tests", sweep_tests, "Test manifests (comma separated)")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--schemes", sweep_schemes, "Schemes or 'all'")
      ->delimiter(',')
      ->check(CLI::IsMember({"all", "original", "vt1-vt1", "vt50p-vt50p", "vt50p-vt1"}))
      ->capture_default_str();
  sweep_cmd->add_option("--tmatch-grid", sweep_tmatch, "Quick-matching threshold grid")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--tclassification-grid", sweep_tclassification,
                        "Classifier threshold grid (defaults to the tmatch grid)")
      ->delimiter(',');
  sweep_cmd->add_option("--depth-grid", sweep_depth, "Deep-matching depth grid")
      ->delimiter(',')
      ->capture_default_str();
  add_detection_flags(sweep_cmd, sweep_flags, false, false);
  sweep_cmd->add_option("--jobs", sweep_jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Write CSV here instead of stdout");

  // intersect
  auto* intersect_cmd =
      app.add_subcommand("intersect", "Cross-scheme intersection of classified apps");
  std::string intersect_ref, intersect_test, intersect_out;
  std::vector<std::string> intersect_schemes = {"all"};
  DetectionFlags intersect_flags;
  int intersect_jobs = 1;
  intersect_cmd->add_option("--ref", intersect_ref, "Reference manifest")->required();
  intersect_cmd->add_option("--test", intersect_test, "Test manifest")->required();
  intersect_cmd->add_option("--schemes", intersect_schemes, "Schemes or 'all'")
      ->delimiter(',')
      ->check(CLI::IsMember({"all", "original", "vt1-vt1", "vt50p-vt50p", "vt50p-vt1"}))
      ->capture_default_str();
  add_detection_flags(intersect_cmd, intersect_flags, false);
  intersect_cmd->add_option("--jobs", intersect_jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  intersect_cmd->add_option("--out", intersect_out, "Write CSV here instead of stdout");

  // gap
  auto* gap_cmd = app.add_subcommand("gap", "Analyze vt50p-vt1 gap apps");
  std::string gap_manifest, gap_families, gap_urls, gap_out, gap_as_of = "2019-01-31";
  bool gap_ids = false;
  gap_cmd->add_option("--manifest", gap_manifest, "Manifest path")->required();
  gap_cmd->add_option("--as-of", gap_as_of, "Scan-report cutoff date")
      ->check(kDateValidator)
      ->capture_default_str();
  gap_cmd->add_option("--families", gap_families, "app_id,family CSV");
  gap_cmd->add_option("--url-reports", gap_urls, "JSONL of {url, positives, total}");
  gap_cmd->add_flag("--ids", gap_ids, "Include gap app ids in the report");
  gap_cmd->add_option("--out", gap_out, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen_cmd->parsed()) {
      gen_spec.scenario = scenario_from_string(gen_scenario);
      gen_spec.snapshot_dates = {Date::parse(gen_first_date), Date::parse(gen_second_date)};
      gen_spec.benign_profile = {gen_benign_profile[0], gen_benign_profile[1],
                                 gen_benign_profile[2]};
      gen_spec.malicious_profile = {gen_malicious_profile[0], gen_malicious_profile[1],
                                    gen_malicious_profile[2]};
      const auto [reference, test] = generate(gen_spec);
      const std::filesystem::path out_dir(gen_out);
      write_corpus(reference, out_dir / "reference");
      write_corpus(test, out_dir / "test");
      std::cerr << "wrote " << reference.entries.size() << " reference and "
                << test.entries.size() << " test apps under " << out_dir.string() << "\n";
    } else if (ingest_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest(ingest_manifest);
      if (!ingest_materialize.empty()) materialize_reference(manifest, ingest_materialize);
      nlohmann::json summary;
      summary["name"] = manifest.name;
      summary["role"] = to_string(manifest.role);
      summary["scenario"] = to_string(manifest.scenario);
      summary["apps"] = manifest.entries.size();
      std::size_t reports = 0, malicious = 0;
      for (const auto& e : manifest.entries) {
        reports += e.reports.size();
        if (e.original_label == Label::Malicious) ++malicious;
      }
      summary["reports"] = reports;
      summary["original_malicious"] = malicious;
      summary["original_benign"] = manifest.entries.size() - malicious;
      emit(summary.dump(2) + "\n", ingest_out);
    } else if (label_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest(label_manifest);
      const auto labeled = label_dataset(manifest, scheme_from_string(label_flags.scheme),
                                         Date::parse(label_flags.as_of));
      std::ostringstream out;
      for (const auto& [id, app] : labeled) {
        nlohmann::json line;
        line["id"] = id;
        line["label"] = to_string(app.label);
        line["positives"] = app.report.positives;
        line["total"] = app.report.total;
        line["scan_date"] = app.report.scan_date.to_string();
        line["post_dated"] = app.post_dated;
        out << line.dump() << '\n';
      }
      emit(out.str(), label_out);
    } else if (compose_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest(compose_manifest);
      emit(composition_to_csv(composition_report(manifest, Date::parse(compose_as_of))),
           compose_out);
    } else if (prepare_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest(prepare_ref);
      const PreparedPipeline pipeline =
          PreparedPipeline::prepare(manifest, prepare_flags.to_params());
      const std::filesystem::path dir(prepare_out);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
      emit(cluster_index_to_json(pipeline.cluster_index()).dump(2) + "\n",
           (dir / "cluster_index.json").string());
      emit(classifier_to_json(pipeline.classifier()).dump(2) + "\n",
           (dir / "classifier.json").string());
      std::ostringstream labels;
      for (const auto& [id, app] : pipeline.reference_labels()) {
        nlohmann::json line;
        line["id"] = id;
        line["label"] = to_string(app.label);
        line["positives"] = app.report.positives;
        line["total"] = app.report.total;
        labels << line.dump() << '\n';
      }
      emit(labels.str(), (dir / "labels.jsonl").string());
      std::cerr << "wrote artifacts to " << dir.string() << "\n";
    } else if (classify_cmd->parsed()) {
      const DatasetManifest reference = load_manifest(classify_ref);
      const DatasetManifest test = load_manifest(classify_test);
      PreparedPipeline pipeline = PreparedPipeline::prepare(reference, classify_flags.to_params());
      if (!classify_clf.empty()) {
        std::ifstream in(classify_clf);
        if (!in) throw Error("cannot open '" + classify_clf + "'");
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw Error("parse error in '" + classify_clf + "': " + e.what());
        }
        pipeline.override_classifier(classifier_from_json(j));
      }
      std::vector<const AppRecord*> apps;
      for (const auto& e : test.entries) apps.push_back(&e.record);
      const auto verdicts = classify_many(pipeline, apps, classify_jobs);
      VerdictWriteOptions options;
      options.include_timing = !classify_no_timing;
      options.include_explanation = classify_explain;
      emit(verdicts_to_jsonl(verdicts, options), classify_out);
    } else if (eval_cmd->parsed()) {
      const DatasetManifest reference = load_manifest(eval_ref);
      const DatasetManifest test = load_manifest(eval_test);
      const ExperimentResult result =
          run_experiment(reference, test, eval_flags.to_params(), eval_jobs);
      if (!eval_stats_out.empty()) emit(method_stats_csv(result), eval_stats_out);
      if (eval_format == "csv") {
        emit(results_to_csv({result}), eval_out);
      } else {
        VerdictWriteOptions options;
        options.include_timing = !eval_no_timing;
        options.include_explanation = eval_explain;
        emit(verdicts_to_jsonl(result.verdicts, options, &result.truth), eval_out);
      }
    } else if (sweep_cmd->parsed()) {
      const DatasetManifest reference = load_manifest(sweep_ref);
      std::vector<DatasetManifest> tests;
      tests.reserve(sweep_tests.size());
      for (const auto& path : sweep_tests) tests.push_back(load_manifest(path));
      std::vector<const DatasetManifest*> test_ptrs;
      for (const auto& t : tests) test_ptrs.push_back(&t);
      SweepGrids grids;
      grids.t_match = sweep_tmatch;
      grids.t_classification = sweep_tclassification;
      grids.depth = sweep_depth;
      DetectionParams base = sweep_flags.to_params();
      const auto results =
          sweep(reference, test_ptrs, parse_schemes(sweep_schemes), grids, base, sweep_jobs);
      emit(results_to_csv(results), sweep_out);
    } else if (intersect_cmd->parsed()) {
      const DatasetManifest reference = load_manifest(intersect_ref);
      const DatasetManifest test = load_manifest(intersect_test);
      std::vector<std::pair<LabelingScheme, std::vector<EvalVerdict>>> by_scheme;
      for (const LabelingScheme scheme : parse_schemes(intersect_schemes)) {
        DetectionParams params = intersect_flags.to_params();
        params.scheme = scheme;
        const ExperimentResult result = run_experiment(reference, test, params, intersect_jobs);
        by_scheme.emplace_back(scheme, to_eval_verdicts(result.verdicts, result.truth));
      }
      emit(intersection_to_csv(intersection_report(by_scheme)), intersect_out);
    } else if (gap_cmd->parsed()) {
      const DatasetManifest manifest = load_manifest(gap_manifest);
      std::map<std::string, std::string> families;
      std::map<std::string, UrlReport> urls;
      if (!gap_families.empty()) families = load_families_csv(gap_families);
      if (!gap_urls.empty()) urls = load_url_reports_jsonl(gap_urls);
      const GapReport report =
          gap_analysis(manifest, Date::parse(gap_as_of), gap_families.empty() ? nullptr : &families,
                       gap_urls.empty() ? nullptr : &urls);
      emit(gap_report_to_json(report, gap_ids).dump(2) + "\n", gap_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
