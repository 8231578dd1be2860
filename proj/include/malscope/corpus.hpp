#pragma once

#include <filesystem>
#include <json.hpp>

#include "malscope/types.hpp"

namespace malscope {

// JSON (de)serialization for the on-disk record/report/manifest schemas.
nlohmann::json record_to_json(const AppRecord& record);
AppRecord record_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const ScanReport& report);
ScanReport report_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);

// Loads and fully validates a manifest. Record and report paths are resolved
// relative to the manifest file; every list is canonicalized on the way in.
DatasetManifest load_manifest(const std::filesystem::path& path);

AppRecord load_record(const std::filesystem::path& path);
ScanReport load_report(const std::filesystem::path& path);

// Binary PGM (P5) icon container.
void write_pgm(const GrayscaleImage& img, const std::filesystem::path& path);
GrayscaleImage read_pgm(const std::filesystem::path& path);

// Writes `<out_dir>/<id>/{info.json, icon.pgm, features.json}` for every app
// in a reference manifest. Reruns produce byte-identical files.
void materialize_reference(const DatasetManifest& manifest, const std::filesystem::path& out_dir);

// Reads one materialized app directory back into a record (inverse of
// materialize_reference for the fields it writes).
AppRecord load_reference_record(const std::filesystem::path& app_dir);

struct SelectedReport {
  ScanReport report;
  bool post_dated = false;  // set when every report postdates as_of
};

// Picks the report with the latest scan_date <= as_of; falls back to the
// earliest report (flagged post_dated) when none qualifies. Deterministic
// regardless of input order.
SelectedReport latest_report(const std::vector<ScanReport>& reports, const Date& as_of);

}  // namespace malscope
