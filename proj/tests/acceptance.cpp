// Acceptance suite: one test case and one printed PASS/FAIL line per
// criterion. Everything runs from synthetic data; no downloads, no external
// model files.

#include "doctest.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mcaf/battery.hpp"
#include "mcaf/dcp.hpp"
#include "mcaf/grading.hpp"
#include "mcaf/loss.hpp"
#include "mcaf/metrics.hpp"
#include "mcaf/model.hpp"
#include "mcaf/niqe.hpp"
#include "mcaf/pipeline.hpp"
#include "mcaf/train.hpp"
#include "mcaf/weights.hpp"
#include "test_support.hpp"

using namespace mcaf;
namespace fs = std::filesystem;

namespace {

void report(int criterion, const char* name, bool pass, const std::string& detail = "") {
    std::printf("criterion %02d  %-24s %s%s%s\n", criterion, name, pass ? "PASS" : "FAIL",
                detail.empty() ? "" : "  -- ", detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

TEST_CASE("criterion 1: autodiff soundness") {
    const auto t0 = std::chrono::steady_clock::now();
    const BatteryResult r = gradcheck_battery(100, 1e-4, 1e-4, 2026);
    const double elapsed = seconds_since(t0);
    const bool pass = r.failed == 0 && elapsed < 120.0;
    report(1, "autodiff soundness", pass,
           std::to_string(r.graphs) + " graphs, " + std::to_string(r.checked) + " elements, max rel err " +
               std::to_string(r.max_rel_err) + ", " + std::to_string(elapsed) + " s");
    CHECK(r.failed == 0);
    CHECK(elapsed < 120.0);
}

TEST_CASE("criterion 2: convolution oracle") {
    Rng rng(2027);
    const int kernels[] = {1, 3, 5, 7};
    int failures = 0;
    double worst = 0;
    for (int iter = 0; iter < 200; ++iter) {
        const int k = kernels[rng.below(4)];
        const bool depthwise = rng.uniform() < 0.5;
        const int64_t ci = depthwise ? 2 + static_cast<int64_t>(rng.below(4)) : 2 + static_cast<int64_t>(rng.below(3));
        const int groups = depthwise ? static_cast<int>(ci) : 1;
        const int64_t co = depthwise ? ci : 1 + static_cast<int64_t>(rng.below(4));
        const int stride = 1 + static_cast<int>(rng.below(2));
        const int pad = static_cast<int>(rng.below(static_cast<uint64_t>(k / 2 + 1)));
        const int64_t h = k + static_cast<int64_t>(rng.below(6));
        const int64_t w = k + static_cast<int64_t>(rng.below(6));

        Tensor x = test::random_tensor<float>(Shape{1, ci, h, w}, rng);
        Tensor wt = test::random_tensor<float>(Shape{co, ci / groups, k, k}, rng);
        std::vector<double> bias(static_cast<size_t>(co));
        Tensor bt(Shape{1, co, 1, 1});
        for (size_t i = 0; i < bias.size(); ++i) {
            bias[i] = rng.uniform(-0.5, 0.5);
            bt.data[i] = static_cast<float>(bias[i]);
        }
        const Tensor got = conv2d_fwd(x, wt, &bt, stride, pad, groups);
        const Tensor ref = test::conv2d_oracle(x, wt, bias, stride, pad, groups);
        const double diff = test::max_abs_diff(got, ref);
        worst = std::max(worst, diff);
        if (diff >= 1e-6) ++failures;
    }
    report(2, "convolution oracle", failures == 0,
           "200 cases, worst max-abs " + std::to_string(worst));
    CHECK(failures == 0);
}

TEST_CASE("criterion 3: identity at init") {
    const ModelConfig cfg = ModelConfig::toy();
    Rng rng(2028);
    bool pass = true;
    for (int iter = 0; iter < 5; ++iter) {
        ParamStore ps = init_mcafnet_params<float>(cfg, 100 + iter);
        const Tensor x = test::random_tensor<float>(Shape{1, 3, 32, 32}, rng, -0.4, 1.4);
        const Tensor y = mcafnet_infer(ps, cfg, x);
        for (size_t i = 0; i < x.data.size(); ++i)
            if (y.data[i] != std::clamp(x.data[i], 0.0f, 1.0f)) pass = false;
    }
    report(3, "identity at init", pass, "5 random inits, exact clamp(input)");
    CHECK(pass);
}

TEST_CASE("criterion 4: efficiency accounting") {
    const ModelCost cost = count_params_flops(ModelConfig{}, 256, 256);

    const bool params_ok = cost.params >= 558100 * 0.85 && cost.params <= 558100 * 1.15;
    report(4, "params near 558.1K", params_ok,
           std::to_string(cost.params) + " params (" +
               std::to_string(100.0 * (cost.params - 558100.0) / 558100.0) + "% off)");
    CHECK(params_ok);

    // The efficiency table's 19.82G figure is not reachable by MAC-level
    // accounting of this architecture at 256x256: every parameter-compatible
    // variant counts ~4.5G MACs (the published number matches our count at
    // 512x512 instead). The check is kept as stated; see the analysis notes.
    const double flops_lo = 19.82e9 * 0.85, flops_hi = 19.82e9 * 1.15;
    const bool flops_ok = cost.flops >= flops_lo && cost.flops <= flops_hi;
    const ModelCost at512 = count_params_flops(ModelConfig{}, 512, 512);
    report(4, "flops near 19.82G @256", flops_ok,
           std::to_string(cost.flops / 1e9) + "G at 256x256 (512x512 gives " +
               std::to_string(at512.flops / 1e9) + "G)");
    CHECK_MESSAGE(flops_ok, "documented accounting gap: " << cost.flops / 1e9
                                                          << "G MACs at 256x256 vs published 19.82G");

    ModelConfig cfg;
    bool mfiba_ok = true;
    for (int c : {24, 48, 96})
        if (macs::mfiba(c, 3, 32, 32, cfg) >= macs::conv_stack(c, 3, 32, 32)) mfiba_ok = false;
    report(4, "mfiba below conv stack", mfiba_ok, "c in {24, 48, 96}");
    CHECK(mfiba_ok);
}

TEST_CASE("criterion 5: toy overfit") {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1);
    const Rgb a{0.8, 0.8, 0.8};
    const Image clear = test::make_textured_scene(rng, 64, 64);
    const Image hazy = synthesize_haze(clear, 0.6, a);

    TrainConfig tcfg;
    tcfg.steps = 200;
    tcfg.seed = 1;
    LossConfig lcfg;
    const TrainResult run1 =
        train_overfit(image_to_tensor(hazy), image_to_tensor(clear), ModelConfig::toy(), tcfg, lcfg);
    const TrainResult run2 =
        train_overfit(image_to_tensor(hazy), image_to_tensor(clear), ModelConfig::toy(), tcfg, lcfg);

    const double gain = run1.trace.back().psnr - run1.trace.front().psnr;
    const bool gain_ok = gain >= 6.0;

    std::vector<double> ma;
    for (size_t i = 19; i < run1.trace.size(); ++i) {
        double s = 0;
        for (size_t j = i - 19; j <= i; ++j) s += run1.trace[j].loss;
        ma.push_back(s / 20.0);
    }
    int non_increasing = 0;
    for (size_t i = 1; i < ma.size(); ++i)
        if (ma[i] <= ma[i - 1] + 1e-12) ++non_increasing;
    const double frac = static_cast<double>(non_increasing) / static_cast<double>(ma.size() - 1);
    const bool ma_ok = frac >= 0.9;

    const bool deterministic = trace_to_jsonl(run1.trace) == trace_to_jsonl(run2.trace);
    const double elapsed = seconds_since(t0);
    const bool time_ok = elapsed < 300.0;

    report(5, "toy overfit", gain_ok && ma_ok && deterministic && time_ok,
           "gain " + std::to_string(gain) + " dB, MA non-increasing " + std::to_string(100 * frac) +
               "%, deterministic " + (deterministic ? "yes" : "no") + ", " + std::to_string(elapsed) + " s");
    CHECK(gain >= 6.0);
    CHECK(frac >= 0.9);
    CHECK(deterministic);
    CHECK(elapsed < 300.0);
}

TEST_CASE("criterion 6: dcp efficacy") {
    Rng rng(2030);
    int wins = 0;
    const int scenes = 50;
    double worst_gain = 1e9;
    for (int i = 0; i < scenes; ++i) {
        Rng srng = rng.split("scene-" + std::to_string(i));
        const double t = srng.uniform(0.3, 0.9);
        const double av = srng.uniform(0.7, 1.0);
        const Rgb a{av, av, av};
        const Image clear = test::make_clear_scene(srng, 96, 96, a);
        const Image hazy = synthesize_haze(clear, t, a);
        const DehazeResult res = dcp_dehaze(hazy);
        const double gain = psnr(res.output, clear) - psnr(hazy, clear);
        worst_gain = std::min(worst_gain, gain);
        if (gain >= 3.0) ++wins;
    }
    const bool pass = wins >= 45; // 90% of 50
    report(6, "dcp efficacy", pass,
           std::to_string(wins) + "/50 scenes at +3 dB, worst gain " + std::to_string(worst_gain));
    CHECK(pass);
}

TEST_CASE("criterion 7: split table exactness") {
    const SplitCounts thin = split_counts(763);
    const SplitCounts moderate = split_counts(1526);
    const SplitCounts thick = split_counts(764);
    const bool pass = thin.train == 610 && thin.test == 76 && thin.val == 77 &&
                      moderate.train == 1220 && moderate.test == 152 && moderate.val == 154 &&
                      thick.train == 611 && thick.test == 76 && thick.val == 77;
    report(7, "split table exactness", pass, "763 -> 610/76/77, 1526 -> 1220/152/154, 764 -> 611/76/77");
    CHECK(pass);
}

TEST_CASE("criterion 8: threshold rule and kmeans oracle") {
    const bool rule_ok = classify_haze(100.0) == HazeClass::thin &&
                         classify_haze(110.58) == HazeClass::moderate &&
                         classify_haze(159.31) == HazeClass::moderate &&
                         classify_haze(200.0) == HazeClass::thick;

    Rng rng(2031);
    std::vector<double> values;
    for (double mu : {60.0, 135.0, 200.0})
        for (int i = 0; i < 300; ++i) values.push_back(rng.normal(mu, 10.0));
    const KmeansResult km = kmeans_thresholds(values, 3);
    const std::vector<double> dp = test::dp_cluster_boundaries(values, 3);
    bool km_ok = km.thresholds.size() == dp.size();
    double worst = 0;
    for (size_t i = 0; km_ok && i < dp.size(); ++i) {
        worst = std::max(worst, std::abs(km.thresholds[i] - dp[i]));
        if (std::abs(km.thresholds[i] - dp[i]) > 5.0) km_ok = false;
    }
    report(8, "threshold rule + kmeans", rule_ok && km_ok,
           "rule ok " + std::string(rule_ok ? "yes" : "no") + ", kmeans vs DP worst gap " +
               std::to_string(worst));
    CHECK(rule_ok);
    CHECK(km_ok);
}

TEST_CASE("criterion 9: metric correctness") {
    // closed-form PSNR/MSE
    Rng rng(2032);
    Image a = test::make_textured_scene(rng, 32, 32);
    Image b = a;
    for (float& v : b.data) v = std::min(1.0f, v + 0.1f);
    bool closed_ok = true;
    {
        Image c1(16, 16), c2(16, 16);
        std::fill(c1.data.begin(), c1.data.end(), 0.5f);
        std::fill(c2.data.begin(), c2.data.end(), 0.6f);
        const double m = mse(c1, c2);
        if (std::abs(m - 0.01) > 1e-6) closed_ok = false;
        if (std::abs(psnr(c1, c2) - 20.0) > 1e-4) closed_ok = false;
        if (mse(c1, c1) != 0.0 || !std::isinf(psnr(c1, c1))) closed_ok = false;
    }

    const bool ssim_ok = std::abs(ssim(a, a) - 1.0) < 1e-9;

    bool ciede_ok = true;
    double ciede_worst = 0;
    for (const auto& p : test::ciede_reference_pairs()) {
        const double de = ciede2000_lab(Lab{p.l1, p.a1, p.b1}, Lab{p.l2, p.a2, p.b2});
        ciede_worst = std::max(ciede_worst, std::abs(de - p.de));
        if (std::abs(de - p.de) >= 1e-4) ciede_ok = false;
    }

    // NIQE ordering on 30 seeded cases
    std::vector<Image> corpus;
    Rng crng(2033);
    for (int i = 0; i < 16; ++i) {
        Rng s = crng.split("corpus-" + std::to_string(i));
        corpus.push_back(test::make_textured_scene(s, 288, 288));
    }
    const NiqeModel model = niqe_fit(corpus);
    int ordered = 0;
    for (int i = 0; i < 30; ++i) {
        Rng s = crng.split("case-" + std::to_string(i));
        const Image clean = test::make_textured_scene(s, 288, 288);
        const Image blurred = test::blur_image(clean, 3);
        Rng n = s.split("noise");
        const Image noisy = test::add_noise(clean, n, 0.25);
        const double sc = niqe_score(clean, model);
        if (sc < niqe_score(blurred, model) && sc < niqe_score(noisy, model)) ++ordered;
    }
    const bool niqe_ok = ordered >= 27; // 90% of 30

    report(9, "metric correctness", closed_ok && ssim_ok && ciede_ok && niqe_ok,
           "ciede worst " + std::to_string(ciede_worst) + ", niqe ordering " + std::to_string(ordered) +
               "/30");
    CHECK(closed_ok);
    CHECK(ssim_ok);
    CHECK(ciede_ok);
    CHECK(niqe_ok);
}

TEST_CASE("criterion 10: loss composition") {
    Rng rng(2034);
    const Tensor pred = test::random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    const Tensor target = test::random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);

    LossConfig identity_cfg; // identity extractor
    bool identity_ok;
    {
        Tape<float> tape;
        const float p = perceptual_loss(tape, tape.leaf(pred), tape.leaf(target), identity_cfg)
                            .val()
                            .data[0];
        const float l = l2_loss(tape.leaf(pred), tape.leaf(target)).val().data[0];
        identity_ok = p == l;
    }

    LossConfig conv_cfg;
    conv_cfg.extractor = ExtractorKind::conv_stack;
    conv_cfg.extractor_seed = 77;
    bool compose_ok;
    double compose_err;
    {
        Tape<float> tape;
        const double total =
            total_loss(tape, tape.leaf(pred), tape.leaf(target), {}, conv_cfg).val().data[0];
        Tape<float> t2;
        const double l2v = l2_loss(t2.leaf(pred), t2.leaf(target)).val().data[0];
        const double percv =
            perceptual_loss(t2, t2.leaf(pred), t2.leaf(target), conv_cfg).val().data[0];
        compose_err = std::abs(total - (l2v + 0.04 * percv));
        compose_ok = compose_err < 1e-7;
    }
    report(10, "loss composition", identity_ok && compose_ok,
           "identity extractor exact " + std::string(identity_ok ? "yes" : "no") +
               ", composition err " + std::to_string(compose_err));
    CHECK(identity_ok);
    CHECK(compose_ok);
}

TEST_CASE("criterion 11: format round trips") {
    const fs::path dir = fs::temp_directory_path() / "mcaf_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // weight container: save -> load -> save is byte-identical, and the
    // reported parameter count equals the serialized element count
    const ModelConfig cfg = ModelConfig::toy();
    ParamStore ps = init_mcafnet_params<float>(cfg, 5);
    const std::string w1 = (dir / "w1.bin").string();
    const std::string w2 = (dir / "w2.bin").string();
    save_params(w1, ps);
    const auto tensors = load_tensors(w1);
    save_tensors(w2, tensors);
    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    const bool weights_ok = slurp(w1) == slurp(w2) && !slurp(w1).empty();
    const bool count_ok = serialized_element_count(tensors) == count_params_flops(cfg, 64, 64).params;

    // manifest: build -> serialize -> parse -> serialize is byte-identical
    const fs::path hz = dir / "hz", cl = dir / "cl";
    fs::create_directories(hz);
    fs::create_directories(cl);
    Rng rng(2035);
    for (int i = 0; i < 6; ++i) {
        const Rgb a{0.9, 0.9, 0.9};
        Rng s = rng.split("pair" + std::to_string(i));
        const Image clear = test::make_clear_scene(s, 32, 32, a);
        const std::string name = "p" + std::to_string(i) + ".png";
        save_image(synthesize_haze(clear, s.uniform(0.3, 0.9), a), (hz / name).string());
        save_image(clear, (cl / name).string());
    }
    ManifestConfig mcfg;
    mcfg.seed = 3;
    const Manifest m1 = build_manifest(hz.string(), cl.string(), mcfg);
    const Manifest m2 = build_manifest(hz.string(), cl.string(), mcfg);
    const std::string j1 = manifest_to_jsonl(m1);
    const bool manifest_ok = !j1.empty() && j1 == manifest_to_jsonl(m2) &&
                             manifest_to_jsonl(manifest_from_jsonl(j1)) == j1;

    report(11, "format round trips", weights_ok && count_ok && manifest_ok,
           std::string("weights byte-identical ") + (weights_ok ? "yes" : "no") +
               ", count match " + (count_ok ? "yes" : "no") + ", manifest " +
               (manifest_ok ? "yes" : "no"));
    CHECK(weights_ok);
    CHECK(count_ok);
    CHECK(manifest_ok);
    fs::remove_all(dir);
}
