#pragma once

#include <cstddef>
#include <string_view>

#include "malscope/types.hpp"

namespace malscope {

struct SimilarityConfig {
  int ngram_size = 2;
  double ssim_c1 = (0.01 * 255.0) * (0.01 * 255.0);
  double ssim_c2 = (0.03 * 255.0) * (0.03 * 255.0);
  int icon_side = 64;
};

// Jaccard index of the character n-gram sets of a and b.
// Both empty -> 1.0, exactly one empty -> 0.0. Strings shorter than the
// n-gram size contribute themselves as a single gram.
double jaccard_strings(std::string_view a, std::string_view b, const SimilarityConfig& cfg = {});

// Set Jaccard over canonical (sorted, deduplicated) string lists.
double jaccard_lists(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Unit-cost edit distance (insert/delete/substitute).
std::size_t levenshtein(std::string_view a, std::string_view b);

// Global structural similarity of two grayscale images. Both sides are
// nearest-neighbor resized to cfg.icon_side squared before comparison;
// the result is clamped to [0,1].
double ssim(const GrayscaleImage& a, const GrayscaleImage& b, const SimilarityConfig& cfg = {});

// Mean of the available sub-scores among package-name Jaccard, description
// Jaccard, and icon SSIM. A sub-score is available only when both sides carry
// non-empty data; with nothing available the package-name Jaccard is returned
// alone.
double metadata_similarity(const AppRecord& a, const AppRecord& b, const SimilarityConfig& cfg = {});

}  // namespace malscope
