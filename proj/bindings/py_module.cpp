#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "malscope/ensemble.hpp"
#include "malscope/eval.hpp"
#include "malscope/synth.hpp"

namespace py = pybind11;
using namespace malscope;

namespace {

DetectionParams make_params(const std::string& scheme, const std::string& as_of, double t_match,
                            double t_classification, int d_match, int n_match, double alpha,
                            int cluster_threshold) {
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

py::dict verdict_to_dict(const Verdict& v) {
  py::dict d;
  d["id"] = v.id;
  d["label"] = std::string(to_string(v.label));
  d["method"] = std::string(to_string(v.method));
  if (v.confidence)
    d["confidence"] = *v.confidence;
  else
    d["confidence"] = py::none();
  d["elapsed_seconds"] = v.elapsed_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_malscope, m) {
  m.doc() = "Repackaged-malware detection workbench (C++ core)";

  py::register_exception<Error>(m, "MalscopeError");

  m.def(
      "levenshtein",
      [](const std::string& a, const std::string& b) { return levenshtein(a, b); },
      py::arg("a"), py::arg("b"), "Unit-cost edit distance between two strings.");

  m.def(
      "jaccard_strings",
      [](const std::string& a, const std::string& b) { return jaccard_strings(a, b, {}); },
      py::arg("a"), py::arg("b"), "Character-bigram Jaccard similarity.");

  m.def(
      "jaccard_lists",
      [](std::vector<std::string> a, std::vector<std::string> b) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return jaccard_lists(a, b);
      },
      py::arg("a"), py::arg("b"), "Set Jaccard similarity of two string lists.");

  m.def(
      "cumulative_score",
      [](const std::vector<double>& subscores) {
        return cumulative_score(std::span<const double>(subscores.data(), subscores.size()));
      },
      py::arg("subscores"), "Mean of the per-depth similarity sub-scores.");

  m.def(
      "apply_scheme",
      [](const std::string& scheme, int positives, int total, const std::string& original_label) {
        ScanReport report;
        report.app_id = std::string(40, '0');
        report.scan_date = {2019, 1, 31};
        report.positives = positives;
        report.total = total;
        report.validate();
        return std::string(to_string(apply_scheme(scheme_from_string(scheme), report,
                                                  label_from_string(original_label))));
      },
      py::arg("scheme"), py::arg("positives"), py::arg("total"),
      py::arg("original_label") = "benign",
      "Label a scan result under a labeling scheme.");

  m.def(
      "generate_corpus",
      [](const std::string& out_dir, std::uint64_t seed, long long benign, long long malicious,
         long long tests, const std::string& scenario, double frac_repackaged,
         double frac_update, double frac_identical, double frac_oos, int family_size) {
        GenSpec spec;
        spec.seed = seed;
        spec.n_benign_refs = benign;
        spec.n_malicious_refs = malicious;
        spec.n_test = tests;
        spec.scenario = scenario_from_string(scenario);
        spec.fraction_repackaged = frac_repackaged;
        spec.fraction_benign_update = frac_update;
        spec.fraction_identical = frac_identical;
        spec.fraction_out_of_sample = frac_oos;
        spec.package_family_size = family_size;
        const auto [reference, test] = generate(spec);
        const std::filesystem::path dir(out_dir);
        write_corpus(reference, dir / "reference");
        write_corpus(test, dir / "test");
        return py::make_tuple((dir / "reference" / "manifest.json").string(),
                              (dir / "test" / "manifest.json").string());
      },
      py::arg("out_dir"), py::arg("seed") = 20190131, py::arg("benign") = 120,
      py::arg("malicious") = 80, py::arg("tests") = 200, py::arg("scenario") = "conventional",
      py::arg("frac_repackaged") = 0.0, py::arg("frac_update") = 0.0,
      py::arg("frac_identical") = 0.0, py::arg("frac_oos") = 1.0, py::arg("family_size") = 3,
      "Write a seeded synthetic corpus pair; returns the two manifest paths.");

  m.def(
      "classify",
      [](const std::string& ref_manifest, const std::string& test_manifest,
         const std::string& scheme, const std::string& as_of, double t_match,
         double t_classification, int d_match, int n_match, double alpha, int cluster_threshold,
         int jobs) {
        const DatasetManifest reference = load_manifest(ref_manifest);
        const DatasetManifest test = load_manifest(test_manifest);
        const PreparedPipeline pipeline = PreparedPipeline::prepare(
            reference, make_params(scheme, as_of, t_match, t_classification, d_match, n_match,
                                   alpha, cluster_threshold));
        std::vector<const AppRecord*> apps;
        for (const auto& e : test.entries) apps.push_back(&e.record);
        py::list out;
        for (const auto& v : classify_many(pipeline, apps, jobs)) out.append(verdict_to_dict(v));
        return out;
      },
      py::arg("ref_manifest"), py::arg("test_manifest"), py::arg("scheme") = "original",
      py::arg("as_of") = "2019-01-31", py::arg("t_match") = 1.0,
      py::arg("t_classification") = 1.0, py::arg("d_match") = 2, py::arg("n_match") = 10,
      py::arg("alpha") = 1.0, py::arg("cluster_threshold") = 5, py::arg("jobs") = 1,
      "Run the three-stage ensemble; returns one verdict dict per test app.");

  m.def(
      "evaluate",
      [](const std::string& ref_manifest, const std::string& test_manifest,
         const std::string& scheme, const std::string& as_of, double t_match,
         double t_classification, int d_match, int n_match, double alpha, int cluster_threshold,
         int jobs) {
        const ExperimentResult r = run_experiment(
            load_manifest(ref_manifest), load_manifest(test_manifest),
            make_params(scheme, as_of, t_match, t_classification, d_match, n_match, alpha,
                        cluster_threshold),
            jobs);
        py::dict d;
        d["dataset"] = r.dataset;
        d["scheme"] = std::string(to_string(r.scheme));
        d["total"] = r.total;
        d["classified"] = r.classified;
        d["correct"] = r.correct;
        if (r.accuracy)
          d["accuracy"] = *r.accuracy;
        else
          d["accuracy"] = py::none();
        if (r.fraction_classified)
          d["fraction_classified"] = *r.fraction_classified;
        else
          d["fraction_classified"] = py::none();
        return d;
      },
      py::arg("ref_manifest"), py::arg("test_manifest"), py::arg("scheme") = "original",
      py::arg("as_of") = "2019-01-31", py::arg("t_match") = 1.0,
      py::arg("t_classification") = 1.0, py::arg("d_match") = 2, py::arg("n_match") = 10,
      py::arg("alpha") = 1.0, py::arg("cluster_threshold") = 5, py::arg("jobs") = 1,
      "Score the ensemble against scheme ground truth; returns a summary dict.");
}
