#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "malscope/corpus.hpp"
#include "malscope/types.hpp"

namespace malscope {

// Scanner counts for one ground-truth class at the two snapshot dates.
struct PositivesProfile {
  int first = 0;
  int second = 0;
  int total = 60;
};

// Everything the generator needs to build a (reference, test) corpus pair
// with known ground truth, byte-reproducible from the seed.
struct GenSpec {
  std::uint64_t seed = 20190131;
  std::string name = "synthetic";

  long long n_benign_refs = 120;
  long long n_malicious_refs = 80;
  // Sibling apps per benign vendor family; 1 makes every reference its own
  // cluster (pairwise package-name distance is kept >= 2 by construction).
  int package_family_size = 3;

  Scenario scenario = Scenario::Conventional;
  long long n_test = 200;
  // Test-app kinds; must sum to 1. Repackaged clones, benign updates, and
  // identical-digest copies derive from reference benigns (confusion);
  // out-of-sample apps share nothing with the reference set (conventional).
  double fraction_repackaged = 0.0;
  double fraction_benign_update = 0.0;
  double fraction_identical = 0.0;
  double fraction_out_of_sample = 1.0;
  double fraction_oos_malicious = 0.5;

  std::pair<Date, Date> snapshot_dates{Date{2013, 6, 1}, Date{2018, 12, 15}};
  PositivesProfile benign_profile{0, 0, 60};
  PositivesProfile malicious_profile{14, 40, 60};

  void validate() const;
};

// Builds both manifests in memory (records and reports attached, no files).
std::pair<DatasetManifest, DatasetManifest> generate(const GenSpec& spec);

// Writes `<dir>/manifest.json` plus records/ and reports/ subdirectories,
// with manifest paths relative to the manifest file. Reruns are
// byte-identical for identical inputs.
void write_corpus(const DatasetManifest& manifest, const std::filesystem::path& dir);

}  // namespace malscope
