#include "malscope/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

namespace malscope {

namespace {

using Rng = std::mt19937_64;

// Raw modulo draws keep output identical across standard libraries (the
// std distributions are implementation-defined); the slight modulo bias is
// irrelevant for fixture data.
long long draw(Rng& rng, long long lo, long long hi) {
  return lo + static_cast<long long>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double draw_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
}

std::string draw_hex40(Rng& rng, std::set<std::string>& used) {
  static constexpr char kDigits[] = "0123456789abcdef";
  for (;;) {
    std::string s(40, '0');
    for (auto& c : s) c = kDigits[rng() % 16];
    if (used.insert(s).second) return s;
  }
}

// Vendor and app words are chosen pairwise >= 2 edits apart and never
// contain '_'; out-of-sample names embed '_' so their bigram sets can never
// equal a reference center's.
constexpr std::array<const char*, 16> kVendors = {
    "bluefox",  "marmotap", "zephyrus", "quickowl", "lanterna", "pixelbay",
    "stonecat", "windmill", "cobaltra", "heronsky", "driftwood", "moonpath",
    "emberfly", "saltgrove", "tundrapp", "violetta"};

constexpr std::array<const char*, 17> kAppWords = {
    "artbook",  "calcmate", "dashride", "echofeed", "farmtale", "gymtrack",
    "holidays", "invoicer", "jukepad",  "kidsmath", "lensedit", "memocard",
    "notewise", "oceanrun", "puzzlbox", "quizhero", "runmiles"};

constexpr std::array<const char*, 8> kMalVendors = {
    "grayhollow", "nightmarket", "fakestore", "dropzone",
    "shadylabs",  "clonefarm",   "dimalley",  "mirrorpit"};

constexpr std::array<const char*, 24> kDescWords = {
    "fast",   "simple", "daily",    "offline", "smart",  "secure", "photo", "music",
    "budget", "travel", "fitness",  "puzzle",  "casual", "weather", "notes", "family",
    "editor", "widget", "tracker",  "planner", "social", "reader",  "game",  "tool"};

constexpr std::array<const char*, 6> kFamilySuffixes = {"", "2", "go", "x", "pro", "hd"};

constexpr std::array<const char*, 6> kLibNames = {"libcrypto.so", "libjpeg.so",   "libpng.so",
                                                  "libsqlite.so", "libcurlite.so", "libglfx.so"};

// Indices 0-7 are ordinary; 8-13 are dangerous.
struct PermSpec {
  const char* name;
  bool dangerous;
};
constexpr std::array<PermSpec, 14> kAndroidPerms = {{
    {"android.permission.INTERNET", false},
    {"android.permission.ACCESS_NETWORK_STATE", false},
    {"android.permission.VIBRATE", false},
    {"android.permission.WAKE_LOCK", false},
    {"android.permission.RECEIVE_BOOT_COMPLETED", false},
    {"android.permission.FOREGROUND_SERVICE", false},
    {"android.permission.BLUETOOTH", false},
    {"android.permission.NFC", false},
    {"android.permission.READ_CONTACTS", true},
    {"android.permission.ACCESS_FINE_LOCATION", true},
    {"android.permission.RECORD_AUDIO", true},
    {"android.permission.CAMERA", true},
    {"android.permission.SEND_SMS", true},
    {"android.permission.READ_SMS", true},
}};

// Per-API-key count ranges, by class. Slots follow api_call_keys() order;
// the SMS/class-loader/reflection slots separate the classes.
struct Range {
  int lo, hi;
};
constexpr std::array<Range, 27> kBenignApiRanges = {{
    {0, 2}, {2, 9}, {0, 2}, {0, 4}, {0, 8}, {1, 6}, {0, 1}, {0, 6}, {0, 2},
    {0, 1}, {0, 4}, {0, 1}, {0, 1}, {0, 4}, {0, 5}, {0, 2}, {0, 2}, {0, 3},
    {0, 2}, {0, 1}, {2, 10}, {0, 1}, {0, 2}, {1, 6}, {0, 3}, {0, 2}, {1, 8},
}};
constexpr std::array<Range, 27> kMaliciousApiRanges = {{
    {0, 3}, {1, 7}, {0, 4}, {0, 4}, {1, 9}, {1, 6}, {0, 3}, {0, 5}, {0, 2},
    {0, 1}, {0, 6}, {0, 2}, {0, 2}, {0, 4}, {1, 6}, {0, 3}, {0, 3}, {0, 3},
    {1, 4}, {6, 15}, {0, 6}, {4, 12}, {3, 8}, {1, 6}, {2, 10}, {0, 3}, {2, 9},
}};

std::string doubled(long long n) {
  const std::string s = std::to_string(n);
  return s + s;
}

std::string family_package(long long family) {
  std::string vendor = kVendors[family % kVendors.size()];
  if (family >= static_cast<long long>(kVendors.size()))
    vendor += doubled(family / static_cast<long long>(kVendors.size()));
  return "com." + vendor + "." + kAppWords[family % kAppWords.size()];
}

std::string member_name(const std::string& base, int member) {
  if (member < static_cast<int>(kFamilySuffixes.size())) return base + kFamilySuffixes[member];
  return base + "m" + std::to_string(member);
}

std::string draw_description(Rng& rng) {
  const long long words = draw(rng, 8, 14);
  std::string text;
  for (long long i = 0; i < words; ++i) {
    if (i) text += ' ';
    text += kDescWords[draw(rng, 0, kDescWords.size() - 1)];
  }
  return text;
}

GrayscaleImage draw_icon(Rng& rng) {
  GrayscaleImage img;
  img.width = 16;
  img.height = 16;
  img.pixels.resize(256);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

std::vector<PermissionEntry> draw_permissions(Rng& rng, bool malicious_model,
                                              const std::string& package) {
  // Benign apps draw from the ordinary-heavy front of the pool, malicious
  // ones from the dangerous-heavy back, separating the dangerous ratio.
  const long long lo = malicious_model ? 2 : 0;
  const long long hi = malicious_model ? 13 : 9;
  const long long count = malicious_model ? draw(rng, 6, 12) : draw(rng, 3, 8);
  std::set<long long> picked;
  while (static_cast<long long>(picked.size()) < std::min(count, hi - lo + 1))
    picked.insert(draw(rng, lo, hi));
  std::vector<PermissionEntry> perms;
  for (const long long i : picked)
    perms.push_back({kAndroidPerms[i].name, PermissionCategory::Android,
                     kAndroidPerms[i].dangerous});
  const long long custom = draw(rng, 0, 2);
  for (long long i = 0; i < custom; ++i)
    perms.push_back({package + ".permission.EXTRA" + std::to_string(i),
                     PermissionCategory::Custom, false});
  return perms;
}

CompilerTag draw_compiler(Rng& rng, bool malicious_model) {
  const double u = draw_unit(rng);
  if (!malicious_model) {
    if (u < 0.60) return CompilerTag::Dx;
    if (u < 0.85) return CompilerTag::DexMerge;
    return CompilerTag::Jack4x;
  }
  if (u < 0.40) return CompilerTag::Dexlib1;
  if (u < 0.70) return CompilerTag::Dexlib2;
  if (u < 0.90) return CompilerTag::Dx;
  return CompilerTag::Unknown;
}

AppRecord make_record(Rng& rng, std::set<std::string>& used_ids, const std::string& package,
                      bool malicious_model) {
  AppRecord r;
  r.id = draw_hex40(rng, used_ids);
  r.package_name = package;
  r.description = draw_description(rng);
  if (draw_unit(rng) < 0.9) r.icon = draw_icon(rng);
  r.dex_digest = draw_hex40(rng, used_ids);
  r.compiler = draw_compiler(rng, malicious_model);
  r.min_sdk = static_cast<int>(draw(rng, 15, 23));
  r.max_sdk = static_cast<int>(draw(rng, 26, 30));

  const long long activities = draw(rng, 5, 12);
  for (long long i = 0; i < activities; ++i)
    r.activities.push_back(package + ".ui.Screen" + std::to_string(i));
  const long long services = draw(rng, 1, 5);
  for (long long i = 0; i < services; ++i)
    r.services.push_back(package + ".svc.Task" + std::to_string(i));
  const long long receivers = draw(rng, 0, 4);
  for (long long i = 0; i < receivers; ++i)
    r.receivers.push_back(package + ".rcv.Hook" + std::to_string(i));
  const long long providers = draw(rng, 0, 2);
  for (long long i = 0; i < providers; ++i)
    r.providers.push_back(package + ".data.Store" + std::to_string(i));

  const long long files = draw(rng, 8, 20);
  for (long long i = 0; i < files; ++i)
    r.files.push_back(i % 2 == 0 ? "res/layout/view" + std::to_string(i) + ".xml"
                                 : "assets/data" + std::to_string(i) + ".bin");
  const long long libraries = draw(rng, 1, 4);
  for (long long i = 0; i < libraries; ++i)
    r.libraries.push_back(kLibNames[draw(rng, 0, kLibNames.size() - 1)]);
  const long long classes = draw(rng, 15, 30);
  for (long long i = 0; i < classes; ++i)
    r.classes.push_back(package + ".Class" + std::to_string(i));
  const long long methods = draw(rng, 30, 70);
  for (long long i = 0; i < methods; ++i)
    r.methods.push_back(package + ".Class" + std::to_string(i % classes) + ".run" +
                        std::to_string(i));

  r.permissions = draw_permissions(rng, malicious_model, package);

  const auto& ranges = malicious_model ? kMaliciousApiRanges : kBenignApiRanges;
  const auto& keys = api_call_keys();
  for (std::size_t i = 0; i < keys.size(); ++i)
    r.api_call_counts[keys[i]] = draw(rng, ranges[i].lo, ranges[i].hi);

  r.canonicalize();
  r.validate();
  return r;
}

void add_payload(Rng& rng, std::set<std::string>& used_ids, AppRecord& r) {
  r.dex_digest = draw_hex40(rng, used_ids);  // burns an id slot; harmless
  r.compiler = CompilerTag::Dexlib1;
  const long long agents = draw(rng, 2, 4);
  for (long long i = 0; i < agents; ++i) {
    r.classes.push_back("com.payload.Agent" + std::to_string(i));
    for (long long j = 0, n = draw(rng, 1, 3); j < n; ++j)
      r.methods.push_back("com.payload.Agent" + std::to_string(i) + ".exec" + std::to_string(j));
  }
  r.services.push_back("com.payload.svc.Push0");
  r.receivers.push_back("com.payload.rcv.Boot0");
  for (long long i = 0, n = draw(rng, 1, 2); i < n; ++i)
    r.files.push_back("assets/payload" + std::to_string(i) + ".bin");
  if (draw_unit(rng) < 0.5) r.libraries.push_back("libinject.so");
  for (const auto& spec : {kAndroidPerms[12], kAndroidPerms[13]})
    r.permissions.push_back({spec.name, PermissionCategory::Android, spec.dangerous});
  const auto& keys = api_call_keys();
  r.api_call_counts[keys[19]] += draw(rng, 6, 12);  // SmsManager
  r.api_call_counts[keys[21]] += draw(rng, 4, 8);   // DexClassLoader
  r.api_call_counts[keys[24]] += draw(rng, 2, 6);   // reflect.Method
  r.canonicalize();
  r.validate();
}

void add_update(Rng& rng, std::set<std::string>& used_ids, AppRecord& r) {
  r.dex_digest = draw_hex40(rng, used_ids);
  r.compiler = CompilerTag::Dx;
  r.activities.push_back(r.package_name + ".ui.Whatsnew");
  r.files.push_back("res/layout/whatsnew.xml");
  r.classes.push_back(r.package_name + ".Update1");
  r.methods.push_back(r.package_name + ".Update1.apply");
  const auto& keys = api_call_keys();
  r.api_call_counts[keys[26]] += draw(rng, 0, 2);  // URL.openConnection
  r.canonicalize();
  r.validate();
}

std::vector<ScanReport> make_reports(const GenSpec& spec, const PositivesProfile& profile,
                                     const std::string& id) {
  ScanReport first;
  first.app_id = id;
  first.scan_date = spec.snapshot_dates.first;
  first.positives = profile.first;
  first.total = profile.total;
  first.positives_delta = 0;
  ScanReport second;
  second.app_id = id;
  second.scan_date = spec.snapshot_dates.second;
  second.positives = profile.second;
  second.total = profile.total;
  second.positives_delta = profile.second - profile.first;
  return {first, second};
}

ManifestEntry make_entry(const GenSpec& spec, AppRecord record, Label truth) {
  ManifestEntry e;
  e.id = record.id;
  e.original_label = truth;
  e.record_path = "records/" + record.id + ".json";
  const auto& profile = truth == Label::Malicious ? spec.malicious_profile : spec.benign_profile;
  e.reports = make_reports(spec, profile, record.id);
  for (std::size_t k = 0; k < e.reports.size(); ++k)
    e.report_paths.push_back("reports/" + record.id + "-" + std::to_string(k) + ".json");
  e.record = std::move(record);
  return e;
}

// Largest-remainder allocation so exact fractional splits come out exact.
std::array<long long, 4> allocate_kinds(const GenSpec& spec) {
  const std::array<double, 4> fractions = {spec.fraction_repackaged, spec.fraction_benign_update,
                                           spec.fraction_identical, spec.fraction_out_of_sample};
  std::array<long long, 4> counts{};
  std::array<double, 4> remainders{};
  long long assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double exact = fractions[k] * static_cast<double>(spec.n_test);
    counts[k] = static_cast<long long>(std::floor(exact + 1e-9));
    remainders[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  for (long long left = spec.n_test - assigned; left > 0; --left) {
    const std::size_t k = static_cast<std::size_t>(
        std::max_element(remainders.begin(), remainders.end()) - remainders.begin());
    ++counts[k];
    remainders[k] = -1.0;
  }
  return counts;
}

}  // namespace

void GenSpec::validate() const {
  if (name.empty()) throw Error("generator spec: name must be non-empty");
  if (n_benign_refs < 0 || n_malicious_refs < 0 || n_test < 0)
    throw Error("generator spec: counts must be non-negative");
  if (package_family_size < 1) throw Error("generator spec: package_family_size must be >= 1");
  const std::array<double, 4> fractions = {fraction_repackaged, fraction_benign_update,
                                           fraction_identical, fraction_out_of_sample};
  for (const double f : fractions)
    if (f < 0.0 || f > 1.0) throw Error("generator spec: kind fractions must lie in [0, 1]");
  if (n_test > 0) {
    const double sum = fraction_repackaged + fraction_benign_update + fraction_identical +
                       fraction_out_of_sample;
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error("generator spec: kind fractions must sum to 1");
    if (scenario == Scenario::None)
      throw Error("generator spec: scenario must be conventional or confusion");
    if (scenario == Scenario::Conventional && fraction_out_of_sample < 1.0)
      throw Error("generator spec: the conventional scenario is out-of-sample only");
    if (fraction_out_of_sample < 1.0 && n_benign_refs == 0)
      throw Error("generator spec: derived test apps need benign reference parents");
  }
  if (fraction_oos_malicious < 0.0 || fraction_oos_malicious > 1.0)
    throw Error("generator spec: fraction_oos_malicious must lie in [0, 1]");
  if (!snapshot_dates.first.valid() || !snapshot_dates.second.valid())
    throw Error("generator spec: invalid snapshot date");
  if (snapshot_dates.second < snapshot_dates.first)
    throw Error("generator spec: snapshot dates must be in ascending order");
  for (const auto* p : {&benign_profile, &malicious_profile}) {
    if (p->total < 1) throw Error("generator spec: positives profile total must be >= 1");
    if (p->first < 0 || p->first > p->total || p->second < 0 || p->second > p->total)
      throw Error("generator spec: positives must lie in [0, total]");
  }
}

std::pair<DatasetManifest, DatasetManifest> generate(const GenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::set<std::string> used_ids;
  std::set<std::string> used_names;

  DatasetManifest reference;
  reference.name = spec.name + "-ref";
  reference.role = ManifestRole::Reference;
  reference.scenario = Scenario::None;

  std::vector<const ManifestEntry*> benign_parents;
  for (long long i = 0; i < spec.n_benign_refs; ++i) {
    const long long family = i / spec.package_family_size;
    const int member = static_cast<int>(i % spec.package_family_size);
    std::string package = member_name(family_package(family), member);
    while (!used_names.insert(package).second) package += "q";
    reference.entries.push_back(
        make_entry(spec, make_record(rng, used_ids, package, false), Label::Benign));
  }
  for (long long i = 0; i < spec.n_malicious_refs; ++i) {
    std::string package = "net." + std::string(kMalVendors[i % kMalVendors.size()]) + "." +
                          kAppWords[i % kAppWords.size()] + std::to_string(i);
    while (!used_names.insert(package).second) package += "q";
    reference.entries.push_back(
        make_entry(spec, make_record(rng, used_ids, package, true), Label::Malicious));
  }
  for (long long i = 0; i < spec.n_benign_refs; ++i)
    benign_parents.push_back(&reference.entries[i]);

  DatasetManifest test;
  test.name = spec.name + "-test";
  test.role = ManifestRole::Test;
  test.scenario = spec.scenario;

  const std::array<long long, 4> kinds = allocate_kinds(spec);
  for (long long i = 0; i < kinds[0]; ++i) {  // repackaged clones
    AppRecord r = benign_parents[i % benign_parents.size()]->record;
    r.id = draw_hex40(rng, used_ids);
    add_payload(rng, used_ids, r);
    test.entries.push_back(make_entry(spec, std::move(r), Label::Malicious));
  }
  for (long long i = 0; i < kinds[1]; ++i) {  // benign updates
    AppRecord r = benign_parents[i % benign_parents.size()]->record;
    r.id = draw_hex40(rng, used_ids);
    add_update(rng, used_ids, r);
    test.entries.push_back(make_entry(spec, std::move(r), Label::Benign));
  }
  for (long long i = 0; i < kinds[2]; ++i) {  // identical-digest copies
    AppRecord r = benign_parents[i % benign_parents.size()]->record;
    r.id = draw_hex40(rng, used_ids);
    test.entries.push_back(make_entry(spec, std::move(r), Label::Benign));
  }
  const long long oos_malicious =
      std::llround(spec.fraction_oos_malicious * static_cast<double>(kinds[3]));
  for (long long i = 0; i < kinds[3]; ++i) {  // out-of-sample apps
    const bool malicious = i < oos_malicious;
    std::string package = "org." + std::string(kVendors[i % kVendors.size()]) + "." +
                          kAppWords[i % kAppWords.size()] + "_" + std::to_string(i);
    while (!used_names.insert(package).second) package += "q";
    test.entries.push_back(make_entry(spec, make_record(rng, used_ids, package, malicious),
                                      malicious ? Label::Malicious : Label::Benign));
  }
  return {std::move(reference), std::move(test)};
}

void write_corpus(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "records", ec);
  if (!ec) std::filesystem::create_directories(dir / "reports", ec);
  if (ec) throw Error("cannot create corpus directories under '" + dir.string() + "': " +
                      ec.message());

  auto write_text = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
  };

  for (const auto& entry : manifest.entries) {
    write_text(dir / entry.record_path, record_to_json(entry.record).dump(2) + "\n");
    if (entry.report_paths.size() != entry.reports.size())
      throw Error("entry '" + entry.id + "': report path/object count mismatch");
    for (std::size_t k = 0; k < entry.reports.size(); ++k)
      write_text(dir / entry.report_paths[k], report_to_json(entry.reports[k]).dump(2) + "\n");
  }
  write_text(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

}  // namespace malscope
