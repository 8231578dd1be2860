#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "malscope/corpus.hpp"
#include "malscope/types.hpp"

namespace malscope {

// Relabels one app according to the chosen scheme. Original returns the
// curated label untouched; the VT-based schemes look only at the report.
Label apply_scheme(LabelingScheme scheme, const ScanReport& report, Label original_label);

struct LabeledApp {
  std::string id;
  Label label = Label::Benign;
  ScanReport report;    // the as-of-selected report the label came from
  bool post_dated = false;
};

// Labels every app in the manifest using its latest report at `as_of`.
std::map<std::string, LabeledApp> label_dataset(const DatasetManifest& manifest,
                                                LabelingScheme scheme, const Date& as_of);

struct SchemeComposition {
  LabelingScheme scheme = LabelingScheme::Original;
  long long malicious = 0;
  long long benign = 0;
  long long excluded = 0;

  long long total() const { return malicious + benign + excluded; }
  double fraction_malicious() const;
};

struct CompositionReport {
  long long total = 0;
  std::vector<SchemeComposition> schemes;  // one entry per scheme, fixed order
  long long more_malicious_count = 0;      // selected report has positives_delta > 0
  long long less_malicious_count = 0;      // selected report has positives_delta < 0
};

CompositionReport composition_report(const DatasetManifest& manifest, const Date& as_of);

// One row per scheme plus a trailing delta row; fixed header
// scheme,malicious,benign,excluded,fraction_malicious.
std::string composition_to_csv(const CompositionReport& report);
void write_composition_csv(const CompositionReport& report, const std::filesystem::path& path);

}  // namespace malscope
