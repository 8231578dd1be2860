#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace malscope {

// Thrown for data/invariant problems (bad manifests, invalid records,
// impossible training sets). The CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Calendar date, ISO-8601 "YYYY-MM-DD". Kept as plain fields so records
// and reports stay trivially comparable and serializable.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  bool valid() const;
  std::string to_string() const;
  static Date parse(const std::string& iso);
};

enum class CompilerTag { Dx = 0, DexMerge = 1, Dexlib1 = 2, Dexlib2 = 3, Jack4x = 4, Unknown = 5 };

const char* to_string(CompilerTag tag);
CompilerTag compiler_from_string(const std::string& name);

enum class Label { Malicious, Benign, Excluded };

const char* to_string(Label label);
Label label_from_string(const std::string& name);

enum class LabelingScheme { Original, Vt1Vt1, Vt50pVt50p, Vt50pVt1 };

const char* to_string(LabelingScheme scheme);
LabelingScheme scheme_from_string(const std::string& name);
const std::array<LabelingScheme, 4>& all_schemes();

// Final three-way answer of a detector, distinct from Label: detectors never
// emit Excluded, and Unclassified means "no method answered".
enum class VerdictLabel { Malicious, Benign, Unclassified };

const char* to_string(VerdictLabel label);
VerdictLabel verdict_label_from_string(const std::string& name);

enum class PermissionCategory { Android, Custom };

struct PermissionEntry {
  std::string name;
  PermissionCategory category = PermissionCategory::Android;
  bool dangerous = false;

  auto operator<=>(const PermissionEntry&) const = default;
};

struct GrayscaleImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width*height entries

  bool operator==(const GrayscaleImage&) const = default;
  void validate() const;
};

// The 27 API-package count keys, in feature-vector order.
const std::array<std::string, 27>& api_call_keys();

// One app's pre-extracted identity. Lists are canonical (sorted, deduplicated)
// after load; see canonicalize().
struct AppRecord {
  std::string id;            // 40-char lowercase hex
  std::string package_name;
  std::string description;
  std::optional<GrayscaleImage> icon;
  std::string dex_digest;    // content hash of classes.dex
  CompilerTag compiler = CompilerTag::Unknown;
  int min_sdk = 0;
  int max_sdk = 0;
  std::vector<std::string> activities;
  std::vector<std::string> services;
  std::vector<std::string> receivers;
  std::vector<std::string> providers;
  std::vector<std::string> files;
  std::vector<std::string> libraries;
  std::vector<std::string> classes;
  std::vector<std::string> methods;
  std::vector<PermissionEntry> permissions;
  std::map<std::string, long long> api_call_counts;  // keys from api_call_keys()
  std::optional<std::vector<std::string>> urls;

  bool operator==(const AppRecord&) const = default;

  // Sorts and deduplicates every name list (and permissions/urls).
  void canonicalize();
  // Checks the record invariants; throws Error naming the app id.
  void validate() const;
};

bool is_hex_id(const std::string& s);

// One dated antivirus snapshot for an app.
struct ScanReport {
  std::string app_id;
  Date scan_date;
  int positives = 0;
  int total = 1;
  int positives_delta = 0;
  std::optional<std::map<std::string, std::string>> scanner_verdicts;

  bool operator==(const ScanReport&) const = default;
  void validate() const;
};

// Total order used wherever a single report must be picked deterministically
// out of an unordered pile.
bool report_order_less(const ScanReport& a, const ScanReport& b);

enum class ManifestRole { Reference, Test };

const char* to_string(ManifestRole role);
ManifestRole role_from_string(const std::string& name);

enum class Scenario { Conventional, Confusion, None };

const char* to_string(Scenario scenario);
Scenario scenario_from_string(const std::string& name);

struct ManifestEntry {
  std::string id;
  Label original_label = Label::Benign;   // malicious or benign only
  std::string record_path;                // relative to the manifest file
  std::vector<std::string> report_paths;
  AppRecord record;
  std::vector<ScanReport> reports;
};

struct DatasetManifest {
  std::string name;
  ManifestRole role = ManifestRole::Test;
  Scenario scenario = Scenario::None;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& app_id) const;
};

}  // namespace malscope
