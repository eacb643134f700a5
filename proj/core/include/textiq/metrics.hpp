#pragma once

#include <vector>

#include "textiq/image.hpp"

namespace textiq {

// 10*log10(1/MSE) on [0,1] intensities. Identical images give +infinity.
double psnr(const RasterImage& a, const RasterImage& b);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), standard
// stabilizers (K1=0.01, K2=0.03, L=1), windows fully inside the image.
double ssim(const RasterImage& a, const RasterImage& b);

double mean_squared_error(const RasterImage& a, const RasterImage& b);
double mean_absolute_error(const std::vector<double>& labels, const std::vector<double>& preds);

// Both correlations reject fewer than two points or zero-variance inputs.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Fractional ranks with ties averaged, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace textiq
