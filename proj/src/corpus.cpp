#include "malscope/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "malscope/classifier.hpp"

namespace malscope {

using nlohmann::json;

namespace {

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse error in '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

json record_to_json(const AppRecord& r) {
  json j;
  j["id"] = r.id;
  j["package_name"] = r.package_name;
  j["description"] = r.description;
  if (r.icon) {
    j["icon"] = {{"width", r.icon->width},
                 {"height", r.icon->height},
                 {"pixels", r.icon->pixels}};
  }
  j["dex_digest"] = r.dex_digest;
  j["compiler"] = to_string(r.compiler);
  j["min_sdk"] = r.min_sdk;
  j["max_sdk"] = r.max_sdk;
  j["activities"] = r.activities;
  j["services"] = r.services;
  j["receivers"] = r.receivers;
  j["providers"] = r.providers;
  j["files"] = r.files;
  j["libraries"] = r.libraries;
  j["classes"] = r.classes;
  j["methods"] = r.methods;
  json perms = json::array();
  for (const auto& p : r.permissions) {
    perms.push_back({{"name", p.name},
                     {"category", p.category == PermissionCategory::Android ? "android" : "custom"},
                     {"dangerous", p.dangerous}});
  }
  j["permissions"] = perms;
  j["api_call_counts"] = r.api_call_counts;
  if (r.urls) j["urls"] = *r.urls;
  return j;
}

AppRecord record_from_json(const json& j) {
  AppRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.package_name = j.at("package_name").get<std::string>();
    r.description = j.value("description", std::string{});
    if (j.contains("icon") && !j.at("icon").is_null()) {
      const auto& ji = j.at("icon");
      GrayscaleImage img;
      img.width = ji.at("width").get<int>();
      img.height = ji.at("height").get<int>();
      img.pixels = ji.at("pixels").get<std::vector<std::uint8_t>>();
      r.icon = std::move(img);
    }
    r.dex_digest = j.at("dex_digest").get<std::string>();
    r.compiler = compiler_from_string(j.at("compiler").get<std::string>());
    r.min_sdk = j.at("min_sdk").get<int>();
    r.max_sdk = j.at("max_sdk").get<int>();
    r.activities = j.value("activities", std::vector<std::string>{});
    r.services = j.value("services", std::vector<std::string>{});
    r.receivers = j.value("receivers", std::vector<std::string>{});
    r.providers = j.value("providers", std::vector<std::string>{});
    r.files = j.value("files", std::vector<std::string>{});
    r.libraries = j.value("libraries", std::vector<std::string>{});
    r.classes = j.value("classes", std::vector<std::string>{});
    r.methods = j.value("methods", std::vector<std::string>{});
    for (const auto& jp : j.value("permissions", json::array())) {
      PermissionEntry p;
      p.name = jp.at("name").get<std::string>();
      const auto cat = jp.at("category").get<std::string>();
      if (cat == "android")
        p.category = PermissionCategory::Android;
      else if (cat == "custom")
        p.category = PermissionCategory::Custom;
      else
        throw Error("permission category must be android or custom, got '" + cat + "'");
      p.dangerous = jp.at("dangerous").get<bool>();
      r.permissions.push_back(std::move(p));
    }
    // Bind before iterating: items() keeps a reference to its container, so
    // calling it directly on the temporary from value() would dangle.
    const json counts = j.value("api_call_counts", json::object());
    for (const auto& [key, value] : counts.items())
      r.api_call_counts[key] = value.get<long long>();
    if (j.contains("urls") && !j.at("urls").is_null())
      r.urls = j.at("urls").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed app record: ") + e.what());
  }
  r.canonicalize();
  r.validate();
  return r;
}

json report_to_json(const ScanReport& r) {
  json j;
  j["app_id"] = r.app_id;
  j["scan_date"] = r.scan_date.to_string();
  j["positives"] = r.positives;
  j["total"] = r.total;
  j["positives_delta"] = r.positives_delta;
  if (r.scanner_verdicts) j["scanner_verdicts"] = *r.scanner_verdicts;
  return j;
}

ScanReport report_from_json(const json& j) {
  ScanReport r;
  try {
    r.app_id = j.at("app_id").get<std::string>();
    r.scan_date = Date::parse(j.at("scan_date").get<std::string>());
    r.positives = j.at("positives").get<int>();
    r.total = j.at("total").get<int>();
    r.positives_delta = j.value("positives_delta", 0);
    if (j.contains("scanner_verdicts") && !j.at("scanner_verdicts").is_null())
      r.scanner_verdicts = j.at("scanner_verdicts").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed scan report: ") + e.what());
  }
  r.validate();
  return r;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  j["role"] = to_string(m.role);
  j["scenario"] = to_string(m.scenario);
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"id", e.id},
                       {"original_label", to_string(e.original_label)},
                       {"record", e.record_path},
                       {"reports", e.report_paths}});
  }
  j["entries"] = entries;
  return j;
}

AppRecord load_record(const std::filesystem::path& path) {
  try {
    return record_from_json(load_json_file(path));
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [" + path.string() + "]");
  }
}

ScanReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(load_json_file(path));
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [" + path.string() + "]");
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.role = role_from_string(j.at("role").get<std::string>());
    m.scenario = scenario_from_string(j.value("scenario", "none"));
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.id = je.at("id").get<std::string>();
      e.original_label = label_from_string(je.at("original_label").get<std::string>());
      e.record_path = je.at("record").get<std::string>();
      e.report_paths = je.at("reports").get<std::vector<std::string>>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error("malformed manifest '" + path.string() + "': " + e.what());
  }

  std::set<std::string> seen;
  for (auto& e : m.entries) {
    if (!seen.insert(e.id).second)
      throw Error("manifest '" + m.name + "': duplicate app id '" + e.id + "'");
    if (e.original_label == Label::Excluded)
      throw Error("manifest '" + m.name + "': app '" + e.id + "' original_label must be malicious or benign");
    if (e.report_paths.empty())
      throw Error("manifest '" + m.name + "': app '" + e.id + "' has no scan reports");

    const auto record_file = base / e.record_path;
    if (!std::filesystem::exists(record_file))
      throw Error("manifest '" + m.name + "': missing record file '" + record_file.string() + "'");
    e.record = load_record(record_file);
    if (e.record.id != e.id)
      throw Error("manifest '" + m.name + "': entry id '" + e.id + "' does not match record id '" +
                  e.record.id + "'");

    for (const auto& rp : e.report_paths) {
      const auto report_file = base / rp;
      if (!std::filesystem::exists(report_file))
        throw Error("manifest '" + m.name + "': missing report file '" + report_file.string() + "'");
      auto report = load_report(report_file);
      if (report.app_id != e.id)
        throw Error("manifest '" + m.name + "': report '" + rp + "' belongs to '" + report.app_id +
                    "', not '" + e.id + "'");
      e.reports.push_back(std::move(report));
    }
  }
  return m;
}

void write_pgm(const GrayscaleImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

GrayscaleImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw Error("'" + path.string() + "' is not a binary PGM (P5) file");
  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval != 255)
    throw Error("'" + path.string() + "' has an unsupported PGM header");
  in.get();  // single whitespace after maxval
  GrayscaleImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw Error("'" + path.string() + "' is truncated");
  return img;
}

void materialize_reference(const DatasetManifest& manifest, const std::filesystem::path& out_dir) {
  if (manifest.role != ManifestRole::Reference)
    throw Error("materialize_reference expects a reference manifest, got role '" +
                std::string(to_string(manifest.role)) + "'");
  for (const auto& e : manifest.entries) {
    const auto app_dir = out_dir / e.id;
    std::error_code ec;
    std::filesystem::create_directories(app_dir, ec);
    if (ec) throw Error("cannot create '" + app_dir.string() + "': " + ec.message());

    json info = record_to_json(e.record);
    info.erase("icon");  // the icon lives in icon.pgm
    write_text_file(app_dir / "info.json", dump(info));

    if (e.record.icon) write_pgm(*e.record.icon, app_dir / "icon.pgm");

    try {
      const FeatureVector features = extract_features(e.record);
      write_text_file(app_dir / "features.json",
                      dump(json(std::vector<double>(features.begin(), features.end()))));
    } catch (const std::exception& ex) {
      throw Error("feature extraction failed for '" + e.id + "': " + ex.what());
    }
  }
}

AppRecord load_reference_record(const std::filesystem::path& app_dir) {
  AppRecord r = record_from_json(load_json_file(app_dir / "info.json"));
  const auto icon_path = app_dir / "icon.pgm";
  if (std::filesystem::exists(icon_path)) r.icon = read_pgm(icon_path);
  return r;
}

SelectedReport latest_report(const std::vector<ScanReport>& reports, const Date& as_of) {
  if (reports.empty()) throw Error("latest_report: empty report list");
  const ScanReport* best = nullptr;
  for (const auto& r : reports) {
    if (r.scan_date > as_of) continue;
    if (!best || report_order_less(*best, r)) best = &r;
  }
  if (best) return {*best, false};
  // Every report postdates as_of; fall back to the earliest one.
  const ScanReport* earliest = &reports.front();
  for (const auto& r : reports)
    if (report_order_less(r, *earliest)) earliest = &r;
  return {*earliest, true};
}

}  // namespace malscope
