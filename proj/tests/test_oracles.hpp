#pragma once

// Independent reference implementations used as test oracles. These must stay
// decoupled from the library code paths they check.

#include <cmath>
#include <string>
#include <vector>

#include "textiq/image.hpp"

namespace textiq::oracle {

// Full-matrix edit-distance DP.
inline size_t levenshtein_full_matrix(const std::string& a, const std::string& b) {
  const size_t m = a.size();
  const size_t n = b.size();
  std::vector<std::vector<size_t>> d(m + 1, std::vector<size_t>(n + 1, 0));
  for (size_t i = 0; i <= m; ++i) d[i][0] = i;
  for (size_t j = 0; j <= n; ++j) d[0][j] = j;
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      const size_t subst = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      const size_t del = d[i - 1][j] + 1;
      const size_t ins = d[i][j - 1] + 1;
      d[i][j] = std::min(subst, std::min(del, ins));
    }
  }
  return d[m][n];
}

// Direct per-window SSIM: explicit 11x11 loops, no separable filtering.
inline double ssim_direct(const RasterImage& a, const RasterImage& b) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;

  double weights[kWin][kWin];
  double wsum = 0.0;
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) {
      const double dy = y - kWin / 2;
      const double dx = x - kWin / 2;
      weights[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      wsum += weights[y][x];
    }
  }
  for (auto& row : weights) {
    for (double& w : row) w /= wsum;
  }

  double total = 0.0;
  size_t count = 0;
  for (int oy = 0; oy + kWin <= a.height; ++oy) {
    for (int ox = 0; ox + kWin <= a.width; ++ox) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          mu_a += weights[y][x] * a.at(ox + x, oy + y);
          mu_b += weights[y][x] * b.at(ox + x, oy + y);
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double da = a.at(ox + x, oy + y) - mu_a;
          const double db = b.at(ox + x, oy + y) - mu_b;
          var_a += weights[y][x] * da * da;
          var_b += weights[y][x] * db * db;
          cov += weights[y][x] * da * db;
        }
      }
      const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace textiq::oracle
