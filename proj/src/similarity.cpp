#include "malscope/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace malscope {

namespace {

std::set<std::string> gram_set(std::string_view s, int n) {
  std::set<std::string> grams;
  if (s.empty()) return grams;
  if (static_cast<int>(s.size()) < n) {
    grams.emplace(s);
    return grams;
  }
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    grams.emplace(s.substr(i, n));
  return grams;
}

}  // namespace

double jaccard_strings(std::string_view a, std::string_view b, const SimilarityConfig& cfg) {
  if (a == b) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const auto ga = gram_set(a, cfg.ngram_size);
  const auto gb = gram_set(b, cfg.ngram_size);
  std::size_t inter = 0;
  for (const auto& g : ga) inter += gb.count(g);
  const std::size_t uni = ga.size() + gb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_lists(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  // Inputs are canonical, so a single merge pass counts the overlap.
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // b is now the shorter string; one rolling row suffices.
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t saved = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, row[j] + 1, row[j - 1] + 1});
      diag = saved;
    }
  }
  return row[b.size()];
}

namespace {

std::vector<double> resize_nn(const GrayscaleImage& img, int side) {
  std::vector<double> out(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    const int sy = std::min(img.height - 1, y * img.height / side);
    for (int x = 0; x < side; ++x) {
      const int sx = std::min(img.width - 1, x * img.width / side);
      out[static_cast<std::size_t>(y) * side + x] =
          static_cast<double>(img.pixels[static_cast<std::size_t>(sy) * img.width + sx]);
    }
  }
  return out;
}

}  // namespace

double ssim(const GrayscaleImage& a, const GrayscaleImage& b, const SimilarityConfig& cfg) {
  a.validate();
  b.validate();
  const int side = cfg.icon_side;
  const auto pa = resize_nn(a, side);
  const auto pb = resize_nn(b, side);
  const double n = static_cast<double>(pa.size());

  double mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    mu_a += pa[i];
    mu_b += pb[i];
  }
  mu_a /= n;
  mu_b /= n;

  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - mu_a;
    const double db = pb[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;

  const double c1 = cfg.ssim_c1;
  const double c2 = cfg.ssim_c2;
  const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
  const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
  return std::clamp(num / den, 0.0, 1.0);
}

double metadata_similarity(const AppRecord& a, const AppRecord& b, const SimilarityConfig& cfg) {
  double sum = 0.0;
  int available = 0;
  if (!a.package_name.empty() && !b.package_name.empty()) {
    sum += jaccard_strings(a.package_name, b.package_name, cfg);
    ++available;
  }
  if (!a.description.empty() && !b.description.empty()) {
    sum += jaccard_strings(a.description, b.description, cfg);
    ++available;
  }
  if (a.icon && b.icon) {
    sum += ssim(*a.icon, *b.icon, cfg);
    ++available;
  }
  if (available == 0) return jaccard_strings(a.package_name, b.package_name, cfg);
  return sum / available;
}

}  // namespace malscope
