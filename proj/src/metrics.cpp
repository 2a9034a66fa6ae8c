#include "mcaf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "json.hpp"

namespace mcaf {

namespace {

void require_same_dims(const Image& a, const Image& b, const char* what) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(what) + ": image size mismatch");
}

std::vector<double> to_gray(const Image& img, bool luminance_weighted) {
    std::vector<double> g(static_cast<size_t>(img.pixels()));
    for (int64_t i = 0; i < img.pixels(); ++i) {
        const double r = img.data[static_cast<size_t>(3 * i)];
        const double gg = img.data[static_cast<size_t>(3 * i + 1)];
        const double b = img.data[static_cast<size_t>(3 * i + 2)];
        g[static_cast<size_t>(i)] =
            luminance_weighted ? 0.299 * r + 0.587 * gg + 0.114 * b : (r + gg + b) / 3.0;
    }
    return g;
}

} // namespace

double mse(const Image& a, const Image& b) {
    require_same_dims(a, b, "mse");
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b, double peak) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Image& a, const Image& b, bool luminance_weighted) {
    require_same_dims(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);
    if (a.h < kWin || a.w < kWin) throw ShapeError("ssim: images smaller than the 11x11 window");

    double window[kWin][kWin];
    double wsum = 0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const double dy = y - kWin / 2, dx = x - kWin / 2;
            window[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
            wsum += window[y][x];
        }
    for (auto& row : window)
        for (double& v : row) v /= wsum;

    const std::vector<double> ga = to_gray(a, luminance_weighted);
    const std::vector<double> gb = to_gray(b, luminance_weighted);
    auto px = [&](const std::vector<double>& g, int64_t y, int64_t x) {
        return g[static_cast<size_t>(y * a.w + x)];
    };

    // valid positions only: window fully inside the image
    double total = 0;
    int64_t count = 0;
    for (int64_t y = 0; y + kWin <= a.h; ++y)
        for (int64_t x = 0; x + kWin <= a.w; ++x) {
            double mu1 = 0, mu2 = 0;
            for (int wy = 0; wy < kWin; ++wy)
                for (int wx = 0; wx < kWin; ++wx) {
                    mu1 += window[wy][wx] * px(ga, y + wy, x + wx);
                    mu2 += window[wy][wx] * px(gb, y + wy, x + wx);
                }
            double s1 = 0, s2 = 0, s12 = 0;
            for (int wy = 0; wy < kWin; ++wy)
                for (int wx = 0; wx < kWin; ++wx) {
                    const double d1 = px(ga, y + wy, x + wx) - mu1;
                    const double d2 = px(gb, y + wy, x + wx) - mu2;
                    s1 += window[wy][wx] * d1 * d1;
                    s2 += window[wy][wx] * d2 * d2;
                    s12 += window[wy][wx] * d1 * d2;
                }
            const double num = (2 * mu1 * mu2 + kC1) * (2 * s12 + kC2);
            const double den = (mu1 * mu1 + mu2 * mu2 + kC1) * (s1 + s2 + kC2);
            total += num / den;
            ++count;
        }
    return total / static_cast<double>(count);
}

Lab srgb_to_lab(double r, double g, double b) {
    auto linear = [](double c) {
        return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    };
    const double rl = linear(r), gl = linear(g), bl = linear(b);
    // sRGB -> XYZ, D65
    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    const double xn = 0.95047, yn = 1.0, zn = 1.08883;
    auto f = [](double t) {
        const double d = 6.0 / 29.0;
        return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
    };
    const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
    return Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double ciede2000_lab(const Lab& x, const Lab& y) {
    constexpr double kPi = 3.14159265358979323846;
    const double c1 = std::hypot(x.a, x.b);
    const double c2 = std::hypot(y.a, y.b);
    const double cbar = 0.5 * (c1 + c2);
    const double cbar7 = std::pow(cbar, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7.0))));

    const double a1p = (1.0 + g) * x.a;
    const double a2p = (1.0 + g) * y.a;
    const double c1p = std::hypot(a1p, x.b);
    const double c2p = std::hypot(a2p, y.b);

    auto hue = [&](double ap, double bb) {
        if (ap == 0.0 && bb == 0.0) return 0.0;
        double h = std::atan2(bb, ap);
        if (h < 0) h += 2 * kPi;
        return h * 180.0 / kPi;
    };
    const double h1p = hue(a1p, x.b);
    const double h2p = hue(a2p, y.b);

    const double dlp = y.l - x.l;
    const double dcp = c2p - c1p;

    // the 180-degree comparisons are knife edges for hues that differ by
    // exactly half a turn; a tiny tolerance keeps atan2 rounding from
    // flipping the branch
    constexpr double kHueEps = 1e-7;
    double dhp = 0.0;
    if (c1p * c2p != 0.0) {
        dhp = h2p - h1p;
        if (dhp > 180.0 + kHueEps)
            dhp -= 360.0;
        else if (dhp < -180.0 - kHueEps)
            dhp += 360.0;
    }
    const double dHp = 2.0 * std::sqrt(c1p * c2p) * std::sin(dhp * kPi / 360.0);

    const double lbar = 0.5 * (x.l + y.l);
    const double cbarp = 0.5 * (c1p + c2p);

    double hbarp;
    if (c1p * c2p == 0.0) {
        hbarp = h1p + h2p;
    } else {
        const double diff = std::abs(h1p - h2p);
        if (diff <= 180.0 + kHueEps)
            hbarp = 0.5 * (h1p + h2p);
        else if (h1p + h2p < 360.0)
            hbarp = 0.5 * (h1p + h2p + 360.0);
        else
            hbarp = 0.5 * (h1p + h2p - 360.0);
    }

    const double t = 1.0 - 0.17 * std::cos((hbarp - 30.0) * kPi / 180.0) +
                     0.24 * std::cos(2.0 * hbarp * kPi / 180.0) +
                     0.32 * std::cos((3.0 * hbarp + 6.0) * kPi / 180.0) -
                     0.20 * std::cos((4.0 * hbarp - 63.0) * kPi / 180.0);

    const double dtheta = 30.0 * std::exp(-std::pow((hbarp - 275.0) / 25.0, 2.0));
    const double cbarp7 = std::pow(cbarp, 7.0);
    const double rc = 2.0 * std::sqrt(cbarp7 / (cbarp7 + std::pow(25.0, 7.0)));
    const double lterm = (lbar - 50.0) * (lbar - 50.0);
    const double sl = 1.0 + 0.015 * lterm / std::sqrt(20.0 + lterm);
    const double sc = 1.0 + 0.045 * cbarp;
    const double sh = 1.0 + 0.015 * cbarp * t;
    const double rt = -std::sin(2.0 * dtheta * kPi / 180.0) * rc;

    const double tl = dlp / sl;
    const double tc = dcp / sc;
    const double th = dHp / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double ciede2000(double r1, double g1, double b1, double r2, double g2, double b2) {
    for (double v : {r1, g1, b1, r2, g2, b2})
        if (v < 0.0 || v > 1.0) throw RangeError("ciede2000: components must be in [0, 1]");
    return ciede2000_lab(srgb_to_lab(r1, g1, b1), srgb_to_lab(r2, g2, b2));
}

double ciede2000_image(const Image& a, const Image& b) {
    require_same_dims(a, b, "ciede2000");
    double acc = 0;
    for (int64_t i = 0; i < a.pixels(); ++i) {
        const size_t o = static_cast<size_t>(3 * i);
        acc += ciede2000(a.data[o], a.data[o + 1], a.data[o + 2], b.data[o], b.data[o + 1], b.data[o + 2]);
    }
    return acc / static_cast<double>(a.pixels());
}

MetricReport compute_metrics(const Image& ref, const Image& test) {
    MetricReport r;
    r.mse = mse(ref, test);
    r.psnr = psnr(ref, test);
    r.ssim = ssim(ref, test);
    r.ciede2000 = ciede2000_image(ref, test);
    return r;
}

std::string metric_report_json(const MetricReport& r, const std::string& ref_path,
                               const std::string& test_path) {
    nlohmann::json j;
    if (!ref_path.empty()) j["ref"] = ref_path;
    if (!test_path.empty()) j["test"] = test_path;
    j["mse"] = r.mse;
    j["psnr"] = std::isfinite(r.psnr) ? nlohmann::json(r.psnr) : nlohmann::json(nullptr);
    j["ssim"] = r.ssim;
    j["ciede2000"] = r.ciede2000;
    if (r.niqe) j["niqe"] = *r.niqe;
    return j.dump();
}

} // namespace mcaf
