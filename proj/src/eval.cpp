#include "malscope/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace malscope {

using nlohmann::json;

namespace {

bool labels_agree(VerdictLabel verdict, Label truth) {
  return (verdict == VerdictLabel::Malicious && truth == Label::Malicious) ||
         (verdict == VerdictLabel::Benign && truth == Label::Benign);
}

std::string format_threshold(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

std::string format_fraction(const std::optional<double>& value) {
  if (!value) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *value);
  return buf;
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs < 1) throw Error("jobs must be at least 1");
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Accuracy/coverage bookkeeping shared by ensemble and standalone runs.
void finalize_counts(ExperimentResult& r) {
  r.total = static_cast<long long>(r.verdicts.size());
  r.classified = 0;
  r.correct = 0;
  for (const auto& v : r.verdicts) {
    if (v.label == VerdictLabel::Unclassified) continue;
    ++r.classified;
    if (labels_agree(v.label, r.truth.at(v.id))) ++r.correct;
  }
  r.empty_test_set = r.total == 0;
  if (r.classified > 0)
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.classified);
  if (r.total > 0)
    r.fraction_classified = static_cast<double>(r.classified) / static_cast<double>(r.total);
}

std::vector<const AppRecord*> non_excluded_tests(const DatasetManifest& test,
                                                const std::map<std::string, Label>& truth) {
  std::vector<const AppRecord*> apps;
  for (const auto& entry : test.entries)
    if (truth.count(entry.id)) apps.push_back(&entry.record);
  return apps;
}

}  // namespace

std::map<std::string, Label> test_truth(const DatasetManifest& test, LabelingScheme scheme,
                                        const Date& as_of) {
  std::map<std::string, Label> truth;
  for (const auto& [id, labeled] : label_dataset(test, scheme, as_of))
    if (labeled.label != Label::Excluded) truth.emplace(id, labeled.label);
  return truth;
}

ExperimentResult run_experiment(const DatasetManifest& reference, const DatasetManifest& test,
                                const DetectionParams& params, int jobs) {
  const PreparedPipeline pipeline = PreparedPipeline::prepare(reference, params);

  ExperimentResult r;
  r.dataset = test.name;
  r.scheme = params.scheme;
  r.method = "ensemble";
  r.param = "-";
  r.truth = test_truth(test, params.scheme, params.as_of);
  r.verdicts = classify_many(pipeline, non_excluded_tests(test, r.truth), jobs);
  finalize_counts(r);

  constexpr std::array<Method, 3> stages = {Method::Quick, Method::Probabilistic, Method::Deep};
  for (std::size_t s = 0; s < stages.size(); ++s) {
    MethodContribution c;
    c.method = stages[s];
    double stage_total = 0.0;
    for (const auto& v : r.verdicts) {
      if (v.method == stages[s]) ++c.answered;
      if (std::find(v.stages_run.begin(), v.stages_run.end(), stages[s]) != v.stages_run.end()) {
        ++c.invocations;
        stage_total += v.stage_seconds[s];
      }
    }
    if (r.classified > 0)
      c.fraction = static_cast<double>(c.answered) / static_cast<double>(r.classified);
    if (c.invocations > 0) c.mean_seconds = stage_total / static_cast<double>(c.invocations);
    r.contributions.push_back(c);
  }
  return r;
}

std::vector<ExperimentResult> sweep(const DatasetManifest& reference,
                                    const std::vector<const DatasetManifest*>& tests,
                                    const std::vector<LabelingScheme>& schemes,
                                    const SweepGrids& grids, const DetectionParams& base,
                                    int jobs) {
  base.validate();
  if (grids.t_match.empty() || grids.depth.empty())
    throw Error("sweep grids must be non-empty");
  const std::vector<double>& tc_grid =
      grids.t_classification.empty() ? grids.t_match : grids.t_classification;

  std::vector<ExperimentResult> results;
  for (const LabelingScheme scheme : schemes) {
    DetectionParams params = base;
    params.scheme = scheme;
    const PreparedPipeline pipeline = PreparedPipeline::prepare(reference, params);

    for (const DatasetManifest* test : tests) {
      const std::map<std::string, Label> truth = test_truth(*test, scheme, params.as_of);
      const std::vector<const AppRecord*> apps = non_excluded_tests(*test, truth);

      // One standalone experiment: run `stage` over every app and wrap the
      // answers as verdicts so the shared bookkeeping applies.
      auto standalone = [&](const std::string& method, const std::string& param,
                            auto&& stage) {
        ExperimentResult r;
        r.dataset = test->name;
        r.scheme = scheme;
        r.method = method;
        r.param = param;
        r.truth = truth;
        r.verdicts.resize(apps.size());
        parallel_for(apps.size(), jobs, [&](std::size_t i) {
          const auto start = std::chrono::steady_clock::now();
          Verdict v = stage(*apps[i]);
          v.id = apps[i]->id;
          v.elapsed_seconds = seconds_since(start);
          r.verdicts[i] = std::move(v);
        });
        std::sort(r.verdicts.begin(), r.verdicts.end(),
                  [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
        finalize_counts(r);
        results.push_back(std::move(r));
      };

      for (const double t : grids.t_match) {
        standalone("quick", format_threshold(t), [&](const AppRecord& app) {
          Verdict v;
          const QuickVerdict q = pipeline.quick_only(app, t);
          v.stages_run.push_back(Method::Quick);
          if (q.outcome == QuickOutcome::Deferred) return v;
          v.label = q.outcome == QuickOutcome::Malicious ? VerdictLabel::Malicious
                                                         : VerdictLabel::Benign;
          v.method = Method::Quick;
          return v;
        });
      }
      for (const double t : tc_grid) {
        standalone("probabilistic", format_threshold(t), [&](const AppRecord& app) {
          Verdict v;
          const Classification c = pipeline.probabilistic_only(app, t);
          v.stages_run.push_back(Method::Probabilistic);
          if (!c.answered) return v;
          v.label = c.label == Label::Malicious ? VerdictLabel::Malicious : VerdictLabel::Benign;
          v.method = Method::Probabilistic;
          v.confidence = c.confidence;
          return v;
        });
      }
      for (const int d : grids.depth) {
        DeepParams deep = base.deep;
        deep.d_match = d;
        standalone("deep", std::to_string(d), [&](const AppRecord& app) {
          Verdict v;
          const DeepResult res = pipeline.deep_only(app, deep);
          v.stages_run.push_back(Method::Deep);
          if (res.verdict == VerdictLabel::Unclassified) return v;
          v.label = res.verdict;
          v.method = Method::Deep;
          return v;
        });
      }
    }
  }

  std::stable_sort(results.begin(), results.end(),
                   [](const ExperimentResult& a, const ExperimentResult& b) {
                     if (a.dataset != b.dataset) return a.dataset < b.dataset;
                     const std::string sa = to_string(a.scheme), sb = to_string(b.scheme);
                     if (sa != sb) return sa < sb;
                     if (a.method != b.method) return a.method < b.method;
                     return a.param < b.param;
                   });
  return results;
}

std::string results_to_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "dataset,scheme,method,param,accuracy,fraction_classified,classified,total\n";
  for (const auto& r : results) {
    out << r.dataset << ',' << to_string(r.scheme) << ',' << r.method << ',' << r.param << ','
        << format_fraction(r.accuracy) << ',' << format_fraction(r.fraction_classified) << ','
        << r.classified << ',' << r.total << '\n';
  }
  return out.str();
}

std::vector<EvalVerdict> to_eval_verdicts(const std::vector<Verdict>& verdicts,
                                          const std::map<std::string, Label>& truth) {
  std::vector<EvalVerdict> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    const auto it = truth.find(v.id);
    if (it == truth.end()) throw Error("no ground truth for app '" + v.id + "'");
    out.push_back({v.id, v.label, v.method, it->second});
  }
  return out;
}

IntersectionReport intersection_report(
    const std::vector<std::pair<LabelingScheme, std::vector<EvalVerdict>>>& by_scheme) {
  struct MethodSpec {
    std::string name;
    std::function<bool(const EvalVerdict&)> classified;
  };
  const std::vector<MethodSpec> specs = {
      {"quick", [](const EvalVerdict& v) { return v.method == Method::Quick; }},
      {"probabilistic", [](const EvalVerdict& v) { return v.method == Method::Probabilistic; }},
      {"deep", [](const EvalVerdict& v) { return v.method == Method::Deep; }},
      {"ensemble", [](const EvalVerdict& v) { return v.label != VerdictLabel::Unclassified; }},
  };

  std::vector<std::map<std::string, const EvalVerdict*>> lookup(by_scheme.size());
  for (std::size_t s = 0; s < by_scheme.size(); ++s)
    for (const auto& v : by_scheme[s].second) lookup[s].emplace(v.id, &v);

  IntersectionReport report;
  for (const auto& spec : specs) {
    IntersectionRow row;
    row.method = spec.name;

    std::set<std::string> shared;
    for (std::size_t s = 0; s < by_scheme.size(); ++s) {
      std::set<std::string> classified;
      for (const auto& v : by_scheme[s].second)
        if (spec.classified(v)) classified.insert(v.id);
      if (s == 0) {
        shared = std::move(classified);
      } else {
        std::set<std::string> kept;
        std::set_intersection(shared.begin(), shared.end(), classified.begin(), classified.end(),
                              std::inserter(kept, kept.begin()));
        shared = std::move(kept);
      }
    }
    row.ids.assign(shared.begin(), shared.end());

    for (std::size_t s = 0; s < by_scheme.size(); ++s) {
      IntersectionSchemeStats stats;
      stats.scheme = by_scheme[s].first;
      for (const auto& id : row.ids) {
        const EvalVerdict& v = *lookup[s].at(id);
        if (labels_agree(v.label, v.truth)) ++stats.correct;
      }
      if (!row.ids.empty())
        stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(row.ids.size());
      row.per_scheme.push_back(stats);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string intersection_to_csv(const IntersectionReport& report) {
  std::ostringstream out;
  out << "method,scheme,intersection_size,correct,accuracy\n";
  for (const auto& row : report.rows) {
    for (const auto& stats : row.per_scheme) {
      out << row.method << ',' << to_string(stats.scheme) << ',' << row.ids.size() << ','
          << stats.correct << ',' << format_fraction(stats.accuracy) << '\n';
    }
  }
  return out.str();
}

GapReport gap_analysis(const DatasetManifest& manifest, const Date& as_of,
                       const std::map<std::string, std::string>* families,
                       const std::map<std::string, UrlReport>* url_reports) {
  GapReport report;
  report.total_apps = static_cast<long long>(manifest.entries.size());
  for (const auto& [id, labeled] : label_dataset(manifest, LabelingScheme::Vt50pVt1, as_of))
    if (labeled.label == Label::Excluded) report.gap_ids.push_back(id);
  if (report.total_apps > 0)
    report.gap_fraction = static_cast<double>(report.gap_ids.size()) /
                          static_cast<double>(report.total_apps);

  if (families) {
    std::map<std::string, long long> counts;
    for (const auto& id : report.gap_ids) {
      const auto it = families->find(id);
      if (it == families->end() || it->second.empty()) continue;
      ++counts[it->second];
      ++report.families_known;
    }
    for (const auto& [family, count] : counts)
      report.family_percent[family] =
          100.0 * static_cast<double>(count) / static_cast<double>(report.families_known);
  }

  if (url_reports) {
    long long positives_sum = 0;
    report.urls_total = static_cast<long long>(url_reports->size());
    for (const auto& [url, r] : *url_reports) {
      if (r.positives >= 1) ++report.urls_flagged;
      positives_sum += r.positives;
    }
    if (report.urls_total > 0) {
      report.urls_flagged_fraction = static_cast<double>(report.urls_flagged) /
                                     static_cast<double>(report.urls_total);
      report.urls_mean_positives =
          static_cast<double>(positives_sum) / static_cast<double>(report.urls_total);
    }
  }
  return report;
}

json gap_report_to_json(const GapReport& report, bool include_ids) {
  json j;
  j["total_apps"] = report.total_apps;
  j["gap_count"] = report.gap_ids.size();
  j["gap_fraction"] = report.gap_fraction;
  if (include_ids) j["gap_ids"] = report.gap_ids;
  j["families_known"] = report.families_known;
  j["family_percent"] = report.family_percent;
  json urls;
  urls["total"] = report.urls_total;
  urls["flagged"] = report.urls_flagged;
  urls["flagged_fraction"] =
      report.urls_flagged_fraction ? json(*report.urls_flagged_fraction) : json(nullptr);
  urls["mean_positives"] =
      report.urls_mean_positives ? json(*report.urls_mean_positives) : json(nullptr);
  j["urls"] = urls;
  return j;
}

std::map<std::string, std::string> load_families_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> families;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error("'" + path.string() + "' line " + std::to_string(lineno) +
                  ": expected app_id,family");
    const std::string id = line.substr(0, comma);
    if (lineno == 1 && id == "app_id") continue;  // optional header
    families[id] = line.substr(comma + 1);
  }
  return families;
}

std::map<std::string, UrlReport> load_url_reports_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::map<std::string, UrlReport> reports;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    UrlReport r;
    try {
      const json j = json::parse(line);
      r.url = j.at("url").get<std::string>();
      r.positives = j.at("positives").get<int>();
      r.total = j.at("total").get<int>();
    } catch (const json::exception& e) {
      throw Error("'" + path.string() + "' line " + std::to_string(lineno) + ": " + e.what());
    }
    if (r.total <= 0 || r.positives < 0 || r.positives > r.total)
      throw Error("'" + path.string() + "' line " + std::to_string(lineno) +
                  ": positives must lie in [0, total]");
    if (!reports.emplace(r.url, r).second)
      throw Error("'" + path.string() + "' line " + std::to_string(lineno) + ": duplicate url '" +
                  r.url + "'");
  }
  return reports;
}

}  // namespace malscope
