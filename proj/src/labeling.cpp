#include "malscope/labeling.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace malscope {

Label apply_scheme(LabelingScheme scheme, const ScanReport& report, Label original_label) {
  if (original_label == Label::Excluded)
    throw Error("original label must be malicious or benign");
  // "50% or more" is evaluated as positives*2 >= total so the boundary is
  // exact in integer arithmetic.
  switch (scheme) {
    case LabelingScheme::Original:
      return original_label;
    case LabelingScheme::Vt1Vt1:
      return report.positives >= 1 ? Label::Malicious : Label::Benign;
    case LabelingScheme::Vt50pVt50p:
      return report.positives * 2 >= report.total ? Label::Malicious : Label::Benign;
    case LabelingScheme::Vt50pVt1:
      if (report.positives * 2 >= report.total) return Label::Malicious;
      if (report.positives == 0) return Label::Benign;
      return Label::Excluded;
  }
  throw Error("unknown labeling scheme");
}

std::map<std::string, LabeledApp> label_dataset(const DatasetManifest& manifest,
                                                LabelingScheme scheme, const Date& as_of) {
  std::map<std::string, LabeledApp> out;
  for (const auto& entry : manifest.entries) {
    const SelectedReport selected = latest_report(entry.reports, as_of);
    LabeledApp app;
    app.id = entry.id;
    app.label = apply_scheme(scheme, selected.report, entry.original_label);
    app.report = selected.report;
    app.post_dated = selected.post_dated;
    out.emplace(entry.id, std::move(app));
  }
  return out;
}

double SchemeComposition::fraction_malicious() const {
  const long long t = total();
  return t == 0 ? 0.0 : static_cast<double>(malicious) / static_cast<double>(t);
}

CompositionReport composition_report(const DatasetManifest& manifest, const Date& as_of) {
  CompositionReport report;
  report.total = static_cast<long long>(manifest.entries.size());
  for (const LabelingScheme scheme : all_schemes()) {
    SchemeComposition comp;
    comp.scheme = scheme;
    for (const auto& entry : manifest.entries) {
      const SelectedReport selected = latest_report(entry.reports, as_of);
      switch (apply_scheme(scheme, selected.report, entry.original_label)) {
        case Label::Malicious: ++comp.malicious; break;
        case Label::Benign: ++comp.benign; break;
        case Label::Excluded: ++comp.excluded; break;
      }
    }
    report.schemes.push_back(comp);
  }
  for (const auto& entry : manifest.entries) {
    const SelectedReport selected = latest_report(entry.reports, as_of);
    if (selected.report.positives_delta > 0) ++report.more_malicious_count;
    if (selected.report.positives_delta < 0) ++report.less_malicious_count;
  }
  return report;
}

std::string composition_to_csv(const CompositionReport& report) {
  std::ostringstream out;
  out << "scheme,malicious,benign,excluded,fraction_malicious\n";
  char fraction[32];
  for (const auto& comp : report.schemes) {
    std::snprintf(fraction, sizeof(fraction), "%.6f", comp.fraction_malicious());
    out << to_string(comp.scheme) << ',' << comp.malicious << ',' << comp.benign << ','
        << comp.excluded << ',' << fraction << '\n';
  }
  // Trailing row: report-delta counts (apps whose selected report gained or
  // lost positives); the fraction column stays empty.
  out << "delta," << report.more_malicious_count << ',' << report.less_malicious_count << ",0,\n";
  return out.str();
}

void write_composition_csv(const CompositionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << composition_to_csv(report);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace malscope
