#ifndef MCAF_DCP_HPP
#define MCAF_DCP_HPP

#include <string>
#include <utility>
#include <vector>

#include "mcaf/grading.hpp"
#include "mcaf/image.hpp"

// Dark-channel-prior machinery: the classical dehazing baseline, the
// mean-dark-channel haze density proxy, and the synthetic hazer used as an
// oracle (I = J*t + A*(1-t)).

namespace mcaf {

struct DcpConfig {
    int patch_radius = 7;          // 15x15 window
    double omega = 0.95;           // haze retention factor
    double t_floor = 0.1;          // transmission lower bound
    double light_quantile = 0.001; // airlight from the top 0.1% dark-channel pixels
};

struct Rgb {
    double r = 0, g = 0, b = 0;
    double operator[](int c) const { return c == 0 ? r : c == 1 ? g : b; }
};

// Single-channel float field.
struct FloatMap {
    int64_t h = 0, w = 0;
    std::vector<float> data;

    FloatMap() = default;
    FloatMap(int64_t h_, int64_t w_) : h(h_), w(w_), data(static_cast<size_t>(h_ * w_), 0.0f) {}
    float& at(int64_t y, int64_t x) { return data[static_cast<size_t>(y * w + x)]; }
    const float& at(int64_t y, int64_t x) const { return data[static_cast<size_t>(y * w + x)]; }
};

struct TransmissionStats {
    double min = 0, mean = 0, max = 0;
};

// Per-image haze summary. mean_dark_channel is reported on the 0-255 scale.
struct HazeReport {
    double mean_dark_channel = 0;
    HazeClass haze_class = HazeClass::thin;
    std::pair<double, double> thresholds{kDefaultHazeThresholds};
    TransmissionStats transmission;
};

struct DehazeResult {
    Image output;
    FloatMap dark;
    FloatMap trans;
    Rgb airlight;
    HazeReport report;
};

// Minimum over color channels and an edge-clamped (2r+1)^2 neighborhood.
FloatMap dark_channel(const Image& img, int radius);

// Per-channel mean of the image pixels whose dark-channel value lies in the
// top quantile (count = ceil(quantile * pixels)).
Rgb estimate_atmospheric_light(const Image& img, const FloatMap& dark, double quantile);

// t(x) = 1 - omega * min over patch and channels of I/A, clamped to [t_floor, 1].
FloatMap transmission(const Image& img, const Rgb& a, const DcpConfig& cfg);

// Full pipeline: J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
DehazeResult dcp_dehaze(const Image& img, const DcpConfig& cfg = {});

Image synthesize_haze(const Image& clear, const FloatMap& t, const Rgb& a);
Image synthesize_haze(const Image& clear, double t, const Rgb& a);

// Mean dark channel on the 0-255 scale.
double haze_density(const Image& img, int radius = 7);

HazeReport make_haze_report(const Image& img, const DcpConfig& cfg = {},
                            std::pair<double, double> thresholds = kDefaultHazeThresholds);

std::string haze_report_json(const std::string& path, const HazeReport& report);

} // namespace mcaf

#endif
