#include "doctest.h"

#include <cmath>

#include "mcaf/dcp.hpp"
#include "mcaf/metrics.hpp"
#include "test_support.hpp"

using namespace mcaf;
using mcaf::test::make_clear_scene;

namespace {

Image random_image(Rng& rng, int64_t h, int64_t w, double lo = 0.0, double hi = 1.0) {
    Image img(h, w);
    for (float& v : img.data) v = static_cast<float>(rng.uniform(lo, hi));
    return img;
}

// brute-force neighborhood minimum, no separability tricks
float dark_oracle_at(const Image& img, int64_t y, int64_t x, int radius) {
    float m = 1e9f;
    for (int64_t dy = -radius; dy <= radius; ++dy)
        for (int64_t dx = -radius; dx <= radius; ++dx) {
            const int64_t yy = std::clamp<int64_t>(y + dy, 0, img.h - 1);
            const int64_t xx = std::clamp<int64_t>(x + dx, 0, img.w - 1);
            for (int c = 0; c < 3; ++c) m = std::min(m, img.at(yy, xx, c));
        }
    return m;
}

} // namespace

TEST_CASE("dark_channel of an all-white image is one everywhere") {
    Image img(8, 8);
    std::fill(img.data.begin(), img.data.end(), 1.0f);
    const FloatMap d = dark_channel(img, 2);
    for (float v : d.data) CHECK(v == 1.0f);
}

TEST_CASE("a zero channel dominates the dark channel") {
    Rng rng(50);
    Image img = random_image(rng, 9, 9, 0.3, 1.0);
    img.at(4, 4, 1) = 0.0f; // one dark pixel reaches every patch with radius 4
    const FloatMap d = dark_channel(img, 4);
    for (float v : d.data) CHECK(v == 0.0f);
}

TEST_CASE("dark_channel matches the brute-force neighborhood oracle") {
    Rng rng(51);
    Image img = random_image(rng, 5, 5);
    const FloatMap d = dark_channel(img, 1);
    for (int64_t y = 0; y < 5; ++y)
        for (int64_t x = 0; x < 5; ++x) CHECK(d.at(y, x) == dark_oracle_at(img, y, x, 1));

    Image img2 = random_image(rng, 11, 7);
    const FloatMap d2 = dark_channel(img2, 3);
    for (int64_t y = 0; y < 11; ++y)
        for (int64_t x = 0; x < 7; ++x) CHECK(d2.at(y, x) == dark_oracle_at(img2, y, x, 3));
}

TEST_CASE("dark_channel is monotone under brightening") {
    Rng rng(52);
    Image img = random_image(rng, 10, 10);
    const FloatMap before = dark_channel(img, 2);
    for (int iter = 0; iter < 20; ++iter) {
        Image brighter = img;
        const int64_t y = rng.below(10), x = rng.below(10);
        const int c = static_cast<int>(rng.below(3));
        brighter.at(y, x, c) = std::min(1.0f, brighter.at(y, x, c) + 0.3f);
        const FloatMap after = dark_channel(brighter, 2);
        for (size_t i = 0; i < after.data.size(); ++i) CHECK(after.data[i] >= before.data[i]);
    }
}

TEST_CASE("atmospheric light of a uniform image is that color") {
    Image img(12, 12);
    for (int64_t i = 0; i < img.pixels(); ++i)
        for (int c = 0; c < 3; ++c) img.data[static_cast<size_t>(3 * i + c)] = 0.6f;
    const FloatMap d = dark_channel(img, 2);
    const Rgb a = estimate_atmospheric_light(img, d, 0.001);
    CHECK(a.r == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(a.g == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(a.b == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("atmospheric light picks the brightest hazy patch") {
    Rng rng(53);
    Image img = random_image(rng, 32, 32, 0.1, 0.5);
    // bright plateau large enough to survive the patch minimum
    for (int64_t y = 4; y < 24; ++y)
        for (int64_t x = 4; x < 24; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.9f;
    const FloatMap d = dark_channel(img, 3);
    const Rgb a = estimate_atmospheric_light(img, d, 0.001);
    CHECK(a.r == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(a.g == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(a.b == doctest::Approx(0.9).epsilon(1e-3));
}

TEST_CASE("quantile one averages the whole image") {
    Rng rng(54);
    Image img = random_image(rng, 6, 6);
    const FloatMap d = dark_channel(img, 1);
    const Rgb a = estimate_atmospheric_light(img, d, 1.0);
    double mean[3] = {0, 0, 0};
    for (int64_t i = 0; i < img.pixels(); ++i)
        for (int c = 0; c < 3; ++c) mean[c] += img.data[static_cast<size_t>(3 * i + c)];
    for (int c = 0; c < 3; ++c) {
        mean[c] /= static_cast<double>(img.pixels());
        CHECK(a[c] == doctest::Approx(mean[c]).epsilon(1e-6));
    }
}

TEST_CASE("transmission of an image equal to the airlight hits the floor") {
    Image img(10, 10);
    for (float& v : img.data) v = 0.7f;
    DcpConfig cfg;
    const FloatMap t = transmission(img, Rgb{0.7, 0.7, 0.7}, cfg);
    // raw value 1 - omega = 0.05 clamps up to the 0.1 floor
    for (float v : t.data) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("transmission of a black image is one") {
    Image img(10, 10);
    DcpConfig cfg;
    const FloatMap t = transmission(img, Rgb{0.8, 0.8, 0.8}, cfg);
    for (float v : t.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("transmission matches the direct formula on a random image") {
    Rng rng(55);
    Image img = random_image(rng, 6, 6);
    const Rgb a{0.82, 0.9, 0.76};
    DcpConfig cfg;
    cfg.patch_radius = 1;
    const FloatMap t = transmission(img, a, cfg);
    for (int64_t y = 0; y < 6; ++y)
        for (int64_t x = 0; x < 6; ++x) {
            double m = 1e9;
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    const int64_t yy = std::clamp<int64_t>(y + dy, 0, 5);
                    const int64_t xx = std::clamp<int64_t>(x + dx, 0, 5);
                    for (int c = 0; c < 3; ++c) m = std::min(m, img.at(yy, xx, c) / a[c]);
                }
            const double expect = std::clamp(1.0 - cfg.omega * m, cfg.t_floor, 1.0);
            CHECK(t.at(y, x) == doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("transmission stays in range and grows as omega shrinks") {
    Rng rng(56);
    Image img = random_image(rng, 16, 16);
    DcpConfig strong, weak;
    weak.omega = 0.5;
    const Rgb a{0.9, 0.9, 0.9};
    const FloatMap ts = transmission(img, a, strong);
    const FloatMap tw = transmission(img, a, weak);
    for (size_t i = 0; i < ts.data.size(); ++i) {
        CHECK(ts.data[i] >= 0.1f);
        CHECK(ts.data[i] <= 1.0f);
        CHECK(tw.data[i] >= ts.data[i]);
    }
}

TEST_CASE("dcp_dehaze leaves a haze-free scene nearly unchanged") {
    Rng rng(57);
    const Image clear = make_clear_scene(rng, 96, 96, Rgb{0.85, 0.85, 0.85});
    const DehazeResult res = dcp_dehaze(clear);
    double mad = 0;
    for (size_t i = 0; i < clear.data.size(); ++i)
        mad += std::abs(res.output.data[i] - clear.data[i]);
    mad /= static_cast<double>(clear.data.size());
    CHECK(mad < 0.05);
}

TEST_CASE("dcp_dehaze recovers a synthetically hazed scene by at least 3 dB") {
    Rng rng(58);
    const Rgb a{0.8, 0.8, 0.8};
    const Image clear = make_clear_scene(rng, 96, 96, a);
    const Image hazy = synthesize_haze(clear, 0.6, a);
    const DehazeResult res = dcp_dehaze(hazy);
    const double gain = psnr(res.output, clear) - psnr(hazy, clear);
    INFO("psnr gain " << gain);
    CHECK(gain >= 3.0);
}

TEST_CASE("dcp efficacy holds across seeded synthetic scenes") {
    Rng rng(59);
    int wins = 0;
    const int scenes = 10;
    for (int i = 0; i < scenes; ++i) {
        Rng srng = rng.split("scene-" + std::to_string(i));
        const double t = srng.uniform(0.3, 0.9);
        const double av = srng.uniform(0.7, 1.0);
        const Rgb a{av, av, av};
        const Image clear = make_clear_scene(srng, 96, 96, a);
        const Image hazy = synthesize_haze(clear, t, a);
        const DehazeResult res = dcp_dehaze(hazy);
        if (psnr(res.output, clear) - psnr(hazy, clear) >= 3.0) ++wins;
    }
    CHECK(wins >= 9);
}

TEST_CASE("degenerate all-airlight input dehazes to a constant without NaN") {
    Image img(24, 24);
    std::fill(img.data.begin(), img.data.end(), 1.0f);
    const DehazeResult res = dcp_dehaze(img);
    for (float v : res.output.data) {
        CHECK(std::isfinite(v));
        CHECK(v == res.output.data[0]);
    }
}

TEST_CASE("synthesize_haze endpoints and analytic inversion") {
    Rng rng(60);
    const Image clear = random_image(rng, 12, 12, 0.0, 1.0);
    const Rgb a{0.8, 0.75, 0.9};

    const Image none = synthesize_haze(clear, 1.0, a);
    for (size_t i = 0; i < clear.data.size(); ++i) CHECK(none.data[i] == doctest::Approx(clear.data[i]).epsilon(1e-7));

    CHECK_THROWS_AS(synthesize_haze(clear, 0.0, a), RangeError);
    const Image total = synthesize_haze(clear, 1e-6, a);
    CHECK(total.at(3, 3, 0) == doctest::Approx(a.r).epsilon(1e-4));
    CHECK(total.at(3, 3, 2) == doctest::Approx(a.b).epsilon(1e-4));

    const double t = 0.42;
    const Image hazy = synthesize_haze(clear, t, a);
    for (int64_t y = 0; y < 12; ++y)
        for (int64_t x = 0; x < 12; ++x)
            for (int c = 0; c < 3; ++c) {
                const double recovered = (hazy.at(y, x, c) - a[c] * (1.0 - t)) / t;
                CHECK(recovered == doctest::Approx(clear.at(y, x, c)).epsilon(1e-6));
            }
}

TEST_CASE("haze_density endpoints and mean oracle") {
    Image black(10, 10);
    CHECK(haze_density(black, 3) == 0.0);

    Image white(10, 10);
    std::fill(white.data.begin(), white.data.end(), 1.0f);
    CHECK(haze_density(white, 3) == doctest::Approx(255.0));

    // checkerboard with a zeroed channel on half the pixels
    Image board(8, 8);
    for (int64_t y = 0; y < 8; ++y)
        for (int64_t x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                board.at(y, x, c) = ((y + x) % 2 == 0 && c == 0) ? 0.0f : 0.5f;
    const FloatMap d = dark_channel(board, 1);
    double mean = 0;
    for (float v : d.data) mean += v;
    mean = 255.0 * mean / static_cast<double>(d.data.size());
    CHECK(haze_density(board, 1) == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("haze report serializes the documented fields") {
    Rng rng(61);
    const Image img = make_clear_scene(rng, 64, 64, Rgb{0.9, 0.9, 0.9});
    const HazeReport rep = make_haze_report(img);
    const std::string json = haze_report_json("x.png", rep);
    CHECK(json.find("\"path\"") != std::string::npos);
    CHECK(json.find("\"mean_dark_channel\"") != std::string::npos);
    CHECK(json.find("\"class\"") != std::string::npos);
    CHECK(json.find("\"thresholds\"") != std::string::npos);
    CHECK(rep.transmission.min >= 0.1);
    CHECK(rep.transmission.max <= 1.0);
}
