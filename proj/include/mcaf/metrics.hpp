#ifndef MCAF_METRICS_HPP
#define MCAF_METRICS_HPP

#include <optional>
#include <string>

#include "mcaf/image.hpp"

// Full-reference quality metrics. PSNR uses a +infinity sentinel when the MSE
// is exactly zero. SSIM follows the original single-scale formulation:
// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.
// CIEDE2000 operates in CIELAB under D65 with kL = kC = kH = 1.

namespace mcaf {

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Grayscale conversion for SSIM: unweighted channel mean by default,
// Rec. 601 luma weights behind the flag.
double ssim(const Image& a, const Image& b, bool luminance_weighted = false);

struct Lab {
    double l = 0, a = 0, b = 0;
};

Lab srgb_to_lab(double r, double g, double b);
double ciede2000_lab(const Lab& x, const Lab& y);
double ciede2000(double r1, double g1, double b1, double r2, double g2, double b2);
// mean per-pixel delta-E over the image
double ciede2000_image(const Image& a, const Image& b);

struct MetricReport {
    double mse = 0;
    double psnr = 0; // +inf when mse == 0
    double ssim = 0;
    double ciede2000 = 0;
    std::optional<double> niqe;
};

MetricReport compute_metrics(const Image& ref, const Image& test);
std::string metric_report_json(const MetricReport& r, const std::string& ref_path = "",
                               const std::string& test_path = "");

} // namespace mcaf

#endif
