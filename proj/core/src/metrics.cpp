#include "textiq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace textiq {

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
  require(a.same_dims(b), "MSE: image dimensions differ");
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

double psnr(const RasterImage& a, const RasterImage& b) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian filter, valid region only: output is (w-10) x (h-10).
std::vector<double> gaussian_valid(const std::vector<double>& src, int w, int h,
                                   const std::vector<double>& kernel, int& out_w, int& out_h) {
  const int k = static_cast<int>(kernel.size());
  out_w = w - k + 1;
  out_h = h - k + 1;
  std::vector<double> tmp(static_cast<size_t>(out_w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * src[static_cast<size_t>(y) * w + x + i];
      tmp[static_cast<size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * tmp[static_cast<size_t>(y + i) * out_w + x];
      out[static_cast<size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const RasterImage& a, const RasterImage& b) {
  require(a.same_dims(b), "SSIM: image dimensions differ");
  require(a.width >= kSsimWindow && a.height >= kSsimWindow,
          "SSIM: image smaller than the 11x11 window");

  const size_t n = a.pixels.size();
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  for (size_t i = 0; i < n; ++i) {
    pa[i] = a.pixels[i];
    pb[i] = b.pixels[i];
    paa[i] = pa[i] * pa[i];
    pbb[i] = pb[i] * pb[i];
    pab[i] = pa[i] * pb[i];
  }

  const std::vector<double> kernel = ssim_kernel();
  int ow = 0, oh = 0;
  const auto mu_a = gaussian_valid(pa, a.width, a.height, kernel, ow, oh);
  const auto mu_b = gaussian_valid(pb, a.width, a.height, kernel, ow, oh);
  const auto m_aa = gaussian_valid(paa, a.width, a.height, kernel, ow, oh);
  const auto m_bb = gaussian_valid(pbb, a.width, a.height, kernel, ow, oh);
  const auto m_ab = gaussian_valid(pab, a.width, a.height, kernel, ow, oh);

  constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

  double acc = 0.0;
  const size_t count = static_cast<size_t>(ow) * oh;
  for (size_t i = 0; i < count; ++i) {
    const double mu_ab = mu_a[i] * mu_b[i];
    const double var_a = m_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_ab;
    const double num = (2.0 * mu_ab + kC1) * (2.0 * cov + kC2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (var_a + var_b + kC2);
    acc += num / den;
  }
  return acc / static_cast<double>(count);
}

double mean_absolute_error(const std::vector<double>& labels, const std::vector<double>& preds) {
  require(labels.size() == preds.size() && !labels.empty(),
          "MAE: inputs must be non-empty and equal length");
  double acc = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) acc += std::fabs(labels[i] - preds[i]);
  return acc / static_cast<double>(labels.size());
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "correlation: length mismatch");
  require(xs.size() >= 2, "correlation: need at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw InvalidArgument("correlation undefined: zero-variance input");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t i, size_t j) { return values[i] < values[j]; });

  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "correlation: length mismatch");
  require(xs.size() >= 2, "correlation: need at least two points");
  return pearson(average_ranks(xs), average_ranks(ys));
}

}  // namespace textiq
