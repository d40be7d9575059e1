#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hgin/tensor.hpp"

namespace hgin {

// 10*log10(peak^2/MSE); identical inputs return +infinity.
double psnr(const Tensor64& a, const Tensor64& b, double peak = 1.0);

// Single-scale SSIM over the channel-mean grayscale image: 11x11 Gaussian
// window (sigma 1.5), C1=0.01^2, C2=0.03^2, valid window positions only.
// Accepts [h,w], [h,w,c], or [1,h,w,c]; throws when the image is smaller
// than the window.
double ssim(const Tensor64& a, const Tensor64& b);

// Mean absolute / squared error as a percentage of the [0,1] range.
double l1_percent(const Tensor64& a, const Tensor64& b);
double l2_percent(const Tensor64& a, const Tensor64& b);

// Hole-ratio bucket label, e.g. 0.15 -> "0.1-0.2". Ratios outside [0,1)
// clamp into the first or last decile.
std::string bucket_label(double ratio);

struct EvalRow {
    std::string id;
    std::string bucket;
    double psnr = 0.0;
    double ssim = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    // Per-bucket means (id "mean"), sorted by bucket label. A +inf psnr row
    // makes its bucket mean +inf; that keeps the sentinel visible.
    std::vector<EvalRow> bucket_means() const;

    // Header, rows sorted by id, then the bucket means.
    void write_csv(std::ostream& os) const;
};

}  // namespace hgin
