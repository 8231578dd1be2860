#include "malscope/types.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace malscope {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return d[m - 1];
}

}  // namespace

bool Date::valid() const {
  return year >= 1 && month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(const std::string& iso) {
  Date d;
  char sep1 = 0, sep2 = 0, tail = 0;
  int n = std::sscanf(iso.c_str(), "%4d%c%2d%c%2d%c", &d.year, &sep1, &d.month, &sep2, &d.day, &tail);
  if (n != 5 || sep1 != '-' || sep2 != '-' || iso.size() != 10 || !d.valid())
    throw Error("invalid ISO date '" + iso + "' (expected YYYY-MM-DD)");
  return d;
}

const char* to_string(CompilerTag tag) {
  switch (tag) {
    case CompilerTag::Dx: return "dx";
    case CompilerTag::DexMerge: return "dexmerge";
    case CompilerTag::Dexlib1: return "dexlib1";
    case CompilerTag::Dexlib2: return "dexlib2";
    case CompilerTag::Jack4x: return "jack4x";
    case CompilerTag::Unknown: return "unknown";
  }
  return "unknown";
}

CompilerTag compiler_from_string(const std::string& name) {
  if (name == "dx") return CompilerTag::Dx;
  if (name == "dexmerge") return CompilerTag::DexMerge;
  if (name == "dexlib1") return CompilerTag::Dexlib1;
  if (name == "dexlib2") return CompilerTag::Dexlib2;
  if (name == "jack4x") return CompilerTag::Jack4x;
  if (name == "unknown") return CompilerTag::Unknown;
  throw Error("unknown compiler tag '" + name + "'");
}

const char* to_string(Label label) {
  switch (label) {
    case Label::Malicious: return "malicious";
    case Label::Benign: return "benign";
    case Label::Excluded: return "excluded";
  }
  return "excluded";
}

Label label_from_string(const std::string& name) {
  if (name == "malicious") return Label::Malicious;
  if (name == "benign") return Label::Benign;
  if (name == "excluded") return Label::Excluded;
  throw Error("unknown label '" + name + "'");
}

const char* to_string(LabelingScheme scheme) {
  switch (scheme) {
    case LabelingScheme::Original: return "original";
    case LabelingScheme::Vt1Vt1: return "vt1-vt1";
    case LabelingScheme::Vt50pVt50p: return "vt50p-vt50p";
    case LabelingScheme::Vt50pVt1: return "vt50p-vt1";
  }
  return "original";
}

LabelingScheme scheme_from_string(const std::string& name) {
  if (name == "original") return LabelingScheme::Original;
  if (name == "vt1-vt1") return LabelingScheme::Vt1Vt1;
  if (name == "vt50p-vt50p") return LabelingScheme::Vt50pVt50p;
  if (name == "vt50p-vt1") return LabelingScheme::Vt50pVt1;
  throw Error("unknown labeling scheme '" + name + "'");
}

const std::array<LabelingScheme, 4>& all_schemes() {
  static const std::array<LabelingScheme, 4> schemes = {
      LabelingScheme::Original, LabelingScheme::Vt1Vt1, LabelingScheme::Vt50pVt50p,
      LabelingScheme::Vt50pVt1};
  return schemes;
}

const char* to_string(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::Malicious: return "malicious";
    case VerdictLabel::Benign: return "benign";
    case VerdictLabel::Unclassified: return "unclassified";
  }
  return "unclassified";
}

VerdictLabel verdict_label_from_string(const std::string& name) {
  if (name == "malicious") return VerdictLabel::Malicious;
  if (name == "benign") return VerdictLabel::Benign;
  if (name == "unclassified") return VerdictLabel::Unclassified;
  throw Error("unknown verdict label '" + name + "'");
}

void GrayscaleImage::validate() const {
  if (width <= 0 || height <= 0)
    throw Error("image dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw Error("image pixel count does not match width*height");
}

const std::array<std::string, 27>& api_call_keys() {
  static const std::array<std::string, 27> keys = {
      "android.accounts.AccountManager",
      "android.app.Activity",
      "android.app.DownloadManager",
      "android.app.IntentService",
      "android.content.ContentResolver",
      "android.content.ContextWrapper",
      "android.content.pm.PackageInstaller",
      "android.database.sqlite.SQLiteDatabase",
      "android.hardware.Camera",
      "android.hardware.display.DisplayManager",
      "android.location.Location",
      "android.media.AudioRecord",
      "android.media.MediaRecorder",
      "android.net.Network",
      "android.net.NetworkInfo",
      "android.net.wifi.WifiInfo",
      "android.net.wifi.WifiManager",
      "android.os.PowerManager",
      "android.os.Process",
      "android.telephony.SmsManager",
      "android.widget.Toast",
      "dalvik.system.DexClassLoader",
      "dalvik.system.PathClassLoader",
      "java.lang.class",
      "java.lang.reflect.Method",
      "java.net.HttpCookie",
      "java.net.URL.openConnection",
  };
  return keys;
}

bool is_hex_id(const std::string& s) {
  if (s.size() != 40) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

namespace {

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

void AppRecord::canonicalize() {
  sort_unique(activities);
  sort_unique(services);
  sort_unique(receivers);
  sort_unique(providers);
  sort_unique(files);
  sort_unique(libraries);
  sort_unique(classes);
  sort_unique(methods);
  std::sort(permissions.begin(), permissions.end());
  permissions.erase(std::unique(permissions.begin(), permissions.end()), permissions.end());
  if (urls) sort_unique(*urls);
}

void AppRecord::validate() const {
  auto fail = [this](const std::string& msg) {
    throw Error("record '" + id + "': " + msg);
  };
  if (!is_hex_id(id)) throw Error("record id '" + id + "' is not 40-char lowercase hex");
  if (min_sdk < 0 || max_sdk < 0) fail("SDK versions must be non-negative");
  if (min_sdk > 0 && max_sdk > 0 && min_sdk > max_sdk)
    fail("min_sdk > max_sdk");
  if (icon) {
    try {
      icon->validate();
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  const auto& keys = api_call_keys();
  for (const auto& [key, count] : api_call_counts) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      fail("unknown api_call_counts key '" + key + "'");
    if (count < 0) fail("negative api call count for '" + key + "'");
  }
}

void ScanReport::validate() const {
  if (!is_hex_id(app_id))
    throw Error("scan report app_id '" + app_id + "' is not 40-char lowercase hex");
  if (total <= 0)
    throw Error("report for '" + app_id + "': total must be positive");
  if (positives < 0 || positives > total)
    throw Error("report for '" + app_id + "': positives " + std::to_string(positives) +
                " outside [0, " + std::to_string(total) + "]");
  if (!scan_date.valid())
    throw Error("report for '" + app_id + "': invalid scan_date");
}

bool report_order_less(const ScanReport& a, const ScanReport& b) {
  if (a.scan_date != b.scan_date) return a.scan_date < b.scan_date;
  if (a.positives != b.positives) return a.positives < b.positives;
  if (a.total != b.total) return a.total < b.total;
  if (a.positives_delta != b.positives_delta) return a.positives_delta < b.positives_delta;
  return a.scanner_verdicts < b.scanner_verdicts;
}

const char* to_string(ManifestRole role) {
  return role == ManifestRole::Reference ? "reference" : "test";
}

ManifestRole role_from_string(const std::string& name) {
  if (name == "reference") return ManifestRole::Reference;
  if (name == "test") return ManifestRole::Test;
  throw Error("unknown manifest role '" + name + "'");
}

const char* to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Conventional: return "conventional";
    case Scenario::Confusion: return "confusion";
    case Scenario::None: return "none";
  }
  return "none";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "conventional") return Scenario::Conventional;
  if (name == "confusion") return Scenario::Confusion;
  if (name == "none") return Scenario::None;
  throw Error("unknown scenario '" + name + "'");
}

const ManifestEntry* DatasetManifest::find(const std::string& app_id) const {
  for (const auto& e : entries)
    if (e.id == app_id) return &e;
  return nullptr;
}

}  // namespace malscope
