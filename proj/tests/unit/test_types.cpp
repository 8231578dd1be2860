#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "malscope/types.hpp"

using namespace malscope;
using testutil::hex_id;
using testutil::make_record;
using testutil::make_report;

TEST_SUITE("types") {

TEST_CASE("date parses and round-trips ISO-8601") {
  const Date d = Date::parse("2019-01-31");
  CHECK(d.year == 2019);
  CHECK(d.month == 1);
  CHECK(d.day == 31);
  CHECK(d.to_string() == "2019-01-31");
  CHECK(Date::parse("2020-02-29").valid());  // leap year
}

TEST_CASE("date rejects malformed and impossible values") {
  CHECK_THROWS_AS(Date::parse("2019-02-29"), Error);  // not a leap year
  CHECK_THROWS_AS(Date::parse("2019-13-01"), Error);
  CHECK_THROWS_AS(Date::parse("2019-00-10"), Error);
  CHECK_THROWS_AS(Date::parse("2019-04-31"), Error);
  CHECK_THROWS_AS(Date::parse("19-04-01"), Error);
  CHECK_THROWS_AS(Date::parse("2019/04/01"), Error);
  CHECK_THROWS_AS(Date::parse(""), Error);
}

TEST_CASE("date ordering is calendar order") {
  CHECK(Date{2018, 12, 31} < Date{2019, 1, 1});
  CHECK(Date{2019, 1, 1} < Date{2019, 1, 2});
  CHECK(Date{2019, 1, 2} < Date{2019, 2, 1});
  CHECK(Date{2019, 2, 1} == Date::parse("2019-02-01"));
}

TEST_CASE("enum names round-trip") {
  for (CompilerTag t : {CompilerTag::Dx, CompilerTag::DexMerge, CompilerTag::Dexlib1,
                        CompilerTag::Dexlib2, CompilerTag::Jack4x, CompilerTag::Unknown})
    CHECK(compiler_from_string(to_string(t)) == t);
  for (Label l : {Label::Malicious, Label::Benign, Label::Excluded})
    CHECK(label_from_string(to_string(l)) == l);
  for (LabelingScheme s : all_schemes()) CHECK(scheme_from_string(to_string(s)) == s);
  for (VerdictLabel v : {VerdictLabel::Malicious, VerdictLabel::Benign, VerdictLabel::Unclassified})
    CHECK(verdict_label_from_string(to_string(v)) == v);
  for (ManifestRole r : {ManifestRole::Reference, ManifestRole::Test})
    CHECK(role_from_string(to_string(r)) == r);
  for (Scenario s : {Scenario::Conventional, Scenario::Confusion, Scenario::None})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scheme_from_string("vt99"), Error);
  CHECK_THROWS_AS(compiler_from_string(""), Error);
}

TEST_CASE("scheme serialized names are the documented strings") {
  CHECK(std::string(to_string(LabelingScheme::Original)) == "original");
  CHECK(std::string(to_string(LabelingScheme::Vt1Vt1)) == "vt1-vt1");
  CHECK(std::string(to_string(LabelingScheme::Vt50pVt50p)) == "vt50p-vt50p");
  CHECK(std::string(to_string(LabelingScheme::Vt50pVt1)) == "vt50p-vt1");
}

TEST_CASE("api call key list is fixed and complete") {
  const auto& keys = api_call_keys();
  CHECK(keys.size() == 27);
  // Spot anchors used by the detector's discriminative features.
  CHECK(keys[19] == "android.telephony.SmsManager");
  CHECK(keys[21] == "dalvik.system.DexClassLoader");
  CHECK(keys[22] == "dalvik.system.PathClassLoader");
  CHECK(keys[24] == "java.lang.reflect.Method");
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
}

TEST_CASE("hex id check accepts only 40-char lowercase hex") {
  CHECK(is_hex_id(hex_id(7)));
  CHECK(is_hex_id("0123456789abcdef0123456789abcdef01234567"));
  CHECK_FALSE(is_hex_id("0123456789ABCDEF0123456789abcdef01234567"));
  CHECK_FALSE(is_hex_id("0123"));
  CHECK_FALSE(is_hex_id(std::string(40, 'g')));
}

TEST_CASE("record validation rejects broken invariants") {
  AppRecord r = make_record(1, "com.example.app");
  CHECK_NOTHROW(r.validate());

  AppRecord bad_id = r;
  bad_id.id = "nope";
  CHECK_THROWS_AS(bad_id.validate(), Error);

  AppRecord bad_sdk = r;
  bad_sdk.min_sdk = 30;
  bad_sdk.max_sdk = 10;
  CHECK_THROWS_AS(bad_sdk.validate(), Error);

  AppRecord neg_sdk = r;
  neg_sdk.min_sdk = -1;
  CHECK_THROWS_AS(neg_sdk.validate(), Error);

  AppRecord bad_icon = r;
  bad_icon.icon = GrayscaleImage{2, 2, {0, 0, 0}};  // 3 pixels for a 2x2 image
  CHECK_THROWS_AS(bad_icon.validate(), Error);

  AppRecord bad_key = r;
  bad_key.api_call_counts["com.made.up.Package"] = 1;
  CHECK_THROWS_AS(bad_key.validate(), Error);

  AppRecord neg_count = r;
  neg_count.api_call_counts[api_call_keys()[0]] = -3;
  CHECK_THROWS_AS(neg_count.validate(), Error);
}

TEST_CASE("report validation enforces positives within total") {
  ScanReport ok = make_report(hex_id(2), Date{2018, 1, 1}, 14, 60);
  CHECK_NOTHROW(ok.validate());

  ScanReport over = make_report(hex_id(2), Date{2018, 1, 1}, 70, 60);
  CHECK_THROWS_AS(over.validate(), Error);

  ScanReport neg = make_report(hex_id(2), Date{2018, 1, 1}, -1, 60);
  CHECK_THROWS_AS(neg.validate(), Error);

  ScanReport zero_total = make_report(hex_id(2), Date{2018, 1, 1}, 0, 0);
  CHECK_THROWS_AS(zero_total.validate(), Error);
}

TEST_CASE("canonicalize sorts and deduplicates every list") {
  AppRecord a = make_record(3, "com.example.app");
  a.activities = {"B", "A", "B", "C"};
  a.services = {"s2", "s1"};
  a.files = {"f", "f", "e"};
  a.methods = {"m3", "m1", "m2", "m1"};
  a.permissions = {{"android.permission.CAMERA", PermissionCategory::Android, true},
                   {"android.permission.CAMERA", PermissionCategory::Android, true},
                   {"android.permission.A", PermissionCategory::Custom, false}};
  a.urls = std::vector<std::string>{"http://b", "http://a", "http://b"};
  a.canonicalize();
  CHECK(a.activities == std::vector<std::string>{"A", "B", "C"});
  CHECK(a.services == std::vector<std::string>{"s1", "s2"});
  CHECK(a.files == std::vector<std::string>{"e", "f"});
  CHECK(a.methods == std::vector<std::string>{"m1", "m2", "m3"});
  CHECK(a.permissions.size() == 2);
  CHECK(*a.urls == std::vector<std::string>{"http://a", "http://b"});
}

TEST_CASE("canonicalize makes list order irrelevant to equality") {
  std::mt19937 rng(42);
  AppRecord base = make_record(4, "com.example.shuffle");
  base.activities = {"a1", "a2", "a3", "a4"};
  base.classes = {"C1", "C2", "C3"};
  base.methods = {"m1", "m2", "m3", "m4", "m5"};
  base.canonicalize();
  for (int trial = 0; trial < 20; ++trial) {
    AppRecord shuffled = base;
    std::shuffle(shuffled.activities.begin(), shuffled.activities.end(), rng);
    std::shuffle(shuffled.classes.begin(), shuffled.classes.end(), rng);
    std::shuffle(shuffled.methods.begin(), shuffled.methods.end(), rng);
    shuffled.canonicalize();
    CHECK(shuffled == base);
  }
}

TEST_CASE("report order is a strict total order on distinct reports") {
  const std::string id = hex_id(5);
  std::vector<ScanReport> reports = {
      make_report(id, Date{2018, 1, 1}, 5), make_report(id, Date{2018, 1, 1}, 9),
      make_report(id, Date{2018, 6, 1}, 5), make_report(id, Date{2017, 1, 1}, 50),
      make_report(id, Date{2018, 1, 1}, 5, 70)};
  for (const auto& a : reports)
    for (const auto& b : reports) {
      if (a == b) {
        CHECK_FALSE(report_order_less(a, b));
      } else {
        CHECK(report_order_less(a, b) != report_order_less(b, a));
      }
    }
}

}  // TEST_SUITE
