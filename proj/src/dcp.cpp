#include "mcaf/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace mcaf {

namespace {

// Edge-clamped neighborhood minimum of a single-channel field.
FloatMap patch_min(const FloatMap& src, int radius) {
    if (radius == 0) return src;
    // separable: rows then columns
    FloatMap rows(src.h, src.w);
    for (int64_t y = 0; y < src.h; ++y)
        for (int64_t x = 0; x < src.w; ++x) {
            float m = src.at(y, std::clamp<int64_t>(x - radius, 0, src.w - 1));
            for (int64_t dx = -radius; dx <= radius; ++dx) {
                const int64_t xx = std::clamp<int64_t>(x + dx, 0, src.w - 1);
                m = std::min(m, src.at(y, xx));
            }
            rows.at(y, x) = m;
        }
    FloatMap out(src.h, src.w);
    for (int64_t y = 0; y < src.h; ++y)
        for (int64_t x = 0; x < src.w; ++x) {
            float m = rows.at(std::clamp<int64_t>(y - radius, 0, src.h - 1), x);
            for (int64_t dy = -radius; dy <= radius; ++dy) {
                const int64_t yy = std::clamp<int64_t>(y + dy, 0, src.h - 1);
                m = std::min(m, rows.at(yy, x));
            }
            out.at(y, x) = m;
        }
    return out;
}

FloatMap channel_min(const Image& img) {
    FloatMap m(img.h, img.w);
    for (int64_t y = 0; y < img.h; ++y)
        for (int64_t x = 0; x < img.w; ++x)
            m.at(y, x) = std::min({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
    return m;
}

} // namespace

FloatMap dark_channel(const Image& img, int radius) {
    if (radius < 0) throw RangeError("dark_channel: negative radius");
    return patch_min(channel_min(img), radius);
}

Rgb estimate_atmospheric_light(const Image& img, const FloatMap& dark, double quantile) {
    if (quantile <= 0 || quantile > 1) throw RangeError("atmospheric light: quantile must be in (0, 1]");
    const int64_t n = img.pixels();
    const int64_t keep = std::max<int64_t>(1, static_cast<int64_t>(
        std::ceil(quantile * static_cast<double>(n))));

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return dark.data[static_cast<size_t>(a)] > dark.data[static_cast<size_t>(b)];
    });

    double acc[3] = {0, 0, 0};
    for (int64_t i = 0; i < keep; ++i) {
        const int64_t px = order[static_cast<size_t>(i)];
        for (int c = 0; c < 3; ++c) acc[c] += img.data[static_cast<size_t>(px * 3 + c)];
    }
    return Rgb{acc[0] / keep, acc[1] / keep, acc[2] / keep};
}

FloatMap transmission(const Image& img, const Rgb& a, const DcpConfig& cfg) {
    if (a.r <= 0 || a.g <= 0 || a.b <= 0) throw RangeError("transmission: airlight components must be positive");
    FloatMap ratio(img.h, img.w);
    for (int64_t y = 0; y < img.h; ++y)
        for (int64_t x = 0; x < img.w; ++x)
            ratio.at(y, x) = static_cast<float>(std::min(
                {img.at(y, x, 0) / a.r, img.at(y, x, 1) / a.g, img.at(y, x, 2) / a.b}));
    FloatMap m = patch_min(ratio, cfg.patch_radius);
    FloatMap t(img.h, img.w);
    for (size_t i = 0; i < m.data.size(); ++i) {
        const double raw = 1.0 - cfg.omega * static_cast<double>(m.data[i]);
        t.data[i] = static_cast<float>(std::clamp(raw, cfg.t_floor, 1.0));
    }
    return t;
}

DehazeResult dcp_dehaze(const Image& img, const DcpConfig& cfg) {
    DehazeResult res;
    res.dark = dark_channel(img, cfg.patch_radius);
    res.airlight = estimate_atmospheric_light(img, res.dark, cfg.light_quantile);
    res.trans = transmission(img, res.airlight, cfg);

    res.output = Image(img.h, img.w);
    res.output.geo = img.geo;
    for (int64_t y = 0; y < img.h; ++y)
        for (int64_t x = 0; x < img.w; ++x) {
            const double t = std::max(static_cast<double>(res.trans.at(y, x)), cfg.t_floor);
            for (int c = 0; c < 3; ++c) {
                const double j = (img.at(y, x, c) - res.airlight[c]) / t + res.airlight[c];
                res.output.at(y, x, c) = static_cast<float>(std::clamp(j, 0.0, 1.0));
            }
        }

    double dsum = 0;
    for (float v : res.dark.data) dsum += v;
    res.report.mean_dark_channel = 255.0 * dsum / static_cast<double>(res.dark.data.size());
    res.report.haze_class = classify_haze(res.report.mean_dark_channel, res.report.thresholds);

    double tmin = 1.0, tmax = 0.0, tsum = 0;
    for (float v : res.trans.data) {
        tmin = std::min(tmin, static_cast<double>(v));
        tmax = std::max(tmax, static_cast<double>(v));
        tsum += v;
    }
    res.report.transmission = {tmin, tsum / static_cast<double>(res.trans.data.size()), tmax};
    return res;
}

Image synthesize_haze(const Image& clear, const FloatMap& t, const Rgb& a) {
    if (t.h != clear.h || t.w != clear.w) throw ShapeError("synthesize_haze: transmission map size mismatch");
    for (int c = 0; c < 3; ++c)
        if (a[c] < 0 || a[c] > 1) throw RangeError("synthesize_haze: airlight must be in [0, 1]");
    Image hazy(clear.h, clear.w);
    hazy.geo = clear.geo;
    for (int64_t y = 0; y < clear.h; ++y)
        for (int64_t x = 0; x < clear.w; ++x) {
            const double tv = t.at(y, x);
            if (tv <= 0 || tv > 1) throw RangeError("synthesize_haze: transmission must be in (0, 1]");
            for (int c = 0; c < 3; ++c)
                hazy.at(y, x, c) = static_cast<float>(clear.at(y, x, c) * tv + a[c] * (1.0 - tv));
        }
    return hazy;
}

Image synthesize_haze(const Image& clear, double t, const Rgb& a) {
    FloatMap m(clear.h, clear.w);
    std::fill(m.data.begin(), m.data.end(), static_cast<float>(t));
    return synthesize_haze(clear, m, a);
}

double haze_density(const Image& img, int radius) {
    const FloatMap dark = dark_channel(img, radius);
    double acc = 0;
    for (float v : dark.data) acc += v;
    return 255.0 * acc / static_cast<double>(dark.data.size());
}

HazeReport make_haze_report(const Image& img, const DcpConfig& cfg,
                            std::pair<double, double> thresholds) {
    HazeReport rep;
    rep.mean_dark_channel = haze_density(img, cfg.patch_radius);
    rep.thresholds = thresholds;
    rep.haze_class = classify_haze(rep.mean_dark_channel, thresholds);
    const FloatMap dark = dark_channel(img, cfg.patch_radius);
    const Rgb a = estimate_atmospheric_light(img, dark, cfg.light_quantile);
    const FloatMap t = transmission(img, a, cfg);
    double tmin = 1.0, tmax = 0.0, tsum = 0;
    for (float v : t.data) {
        tmin = std::min(tmin, static_cast<double>(v));
        tmax = std::max(tmax, static_cast<double>(v));
        tsum += v;
    }
    rep.transmission = {tmin, tsum / static_cast<double>(t.data.size()), tmax};
    return rep;
}

std::string haze_report_json(const std::string& path, const HazeReport& report) {
    nlohmann::json j;
    j["path"] = path;
    j["mean_dark_channel"] = report.mean_dark_channel;
    j["class"] = to_string(report.haze_class);
    j["thresholds"] = {report.thresholds.first, report.thresholds.second};
    return j.dump();
}

} // namespace mcaf
