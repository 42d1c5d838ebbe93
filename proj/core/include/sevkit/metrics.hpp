#pragma once

#include <string>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit::metrics {

/// Peak signal-to-noise ratio for images in [0,1] (peak 1): 10*log10(1/MSE).
/// Identical images report the 100 dB cap.
double psnr(const Tensor& a, const Tensor& b);

inline constexpr double kPsnrCap = 100.0;

/// Structural similarity with the canonical defaults: 11x11 Gaussian window,
/// sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, computed per channel over valid
/// window positions and averaged. Errors if the image is smaller than the
/// window.
double ssim(const Tensor& a, const Tensor& b);

/// Cosine similarity of flattened feature maps; zero-norm inputs map to 0.
double feature_cosine(const Tensor& fa, const Tensor& fb);

/// Per-image fidelity results for one evaluation row.
struct RowReport {
    std::string label;
    std::string noise_desc;
    std::vector<double> psnr_per_image;
    std::vector<double> ssim_per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double clipped_fraction = 0.0;
};

struct MetricReport {
    std::string corpus_tag;
    std::size_t image_count = 0;
    std::vector<RowReport> rows;

    double mean_psnr() const;
    /// CSV schema: image_id,noise_spec,psnr,ssim (one line per image per row).
    std::string to_csv() const;
    std::string to_table() const;
};

}  // namespace sevkit::metrics
