#pragma once

// Small fixture factories shared by the unit suites. Everything here builds
// records that pass AppRecord::validate so tests exercise real invariants.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "malscope/types.hpp"

namespace testutil {

// Deterministic 40-char lowercase hex id from a small integer.
inline std::string hex_id(unsigned n) {
  char buf[41];
  std::snprintf(buf, sizeof(buf), "%040x", n);
  return std::string(buf);
}

inline malscope::AppRecord make_record(unsigned id_num, const std::string& package_name) {
  malscope::AppRecord r;
  r.id = hex_id(id_num);
  r.package_name = package_name;
  r.dex_digest = "digest-" + std::to_string(id_num);
  r.compiler = malscope::CompilerTag::Dx;
  r.min_sdk = 9;
  r.max_sdk = 28;
  return r;
}

inline malscope::ScanReport make_report(const std::string& app_id, malscope::Date date,
                                        int positives, int total = 60, int delta = 0) {
  malscope::ScanReport rep;
  rep.app_id = app_id;
  rep.scan_date = date;
  rep.positives = positives;
  rep.total = total;
  rep.positives_delta = delta;
  return rep;
}

inline malscope::ManifestEntry make_entry(malscope::AppRecord record, malscope::Label original,
                                          std::vector<malscope::ScanReport> reports) {
  malscope::ManifestEntry e;
  e.id = record.id;
  e.original_label = original;
  e.record_path = "records/" + e.id + ".json";
  for (std::size_t k = 0; k < reports.size(); ++k)
    e.report_paths.push_back("reports/" + e.id + "-" + std::to_string(k + 1) + ".json");
  e.record = std::move(record);
  e.reports = std::move(reports);
  return e;
}

inline malscope::GrayscaleImage make_image(int width, int height, unsigned seed) {
  malscope::GrayscaleImage img;
  img.width = width;
  img.height = height;
  std::mt19937 rng(seed);
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

// Unique scratch directory under the system temp root, removed on
// destruction. Keeps filesystem tests independent of the build tree.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("malscope-test-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
