#include "doctest.h"

#include <cmath>

#include "mcaf/gradcheck.hpp"
#include "mcaf/loss.hpp"
#include "mcaf/train.hpp"
#include "test_support.hpp"

using namespace mcaf;
using mcaf::test::max_abs_diff;
using mcaf::test::random_tensor;

namespace {

template <typename T>
double eval_l2(const TensorT<T>& a, const TensorT<T>& b) {
    Tape<T> tape;
    return l2_loss(tape.leaf(a), tape.leaf(b)).val().data[0];
}

Tensor synth_pair(const Tensor& clear, double t, double a) {
    Tensor hazy(clear.shape);
    for (size_t i = 0; i < clear.data.size(); ++i)
        hazy.data[i] = static_cast<float>(clear.data[i] * t + a * (1.0 - t));
    return hazy;
}

} // namespace

TEST_CASE("l2_loss basic identities and loop oracle") {
    Rng rng(31);
    Tensor a = random_tensor<float>(Shape{1, 3, 6, 6}, rng, 0.0, 1.0);
    CHECK(eval_l2(a, a) == 0.0);

    Tensor b = a;
    for (auto& v : b.data) v += 0.1f;
    CHECK(eval_l2(a, b) == doctest::Approx(0.01).epsilon(1e-5));

    Tensor c = random_tensor<float>(Shape{1, 3, 6, 6}, rng, 0.0, 1.0);
    double oracle = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(c.data[i]);
        oracle += d * d;
    }
    oracle /= static_cast<double>(a.data.size());
    CHECK(eval_l2(a, c) == doctest::Approx(oracle).epsilon(1e-7));

    Tensor wrong(Shape{1, 3, 5, 5});
    Tape<float> tape;
    CHECK_THROWS_AS(l2_loss(tape.leaf(a), tape.leaf(wrong)), ShapeError);
}

TEST_CASE("perceptual_loss with the identity extractor equals l2_loss exactly") {
    Rng rng(32);
    Tensor a = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
    Tensor b = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
    LossConfig cfg; // identity extractor
    Tape<float> tape;
    Var<float> p = perceptual_loss(tape, tape.leaf(a), tape.leaf(b), cfg);
    CHECK(p.val().data[0] == eval_l2(a, b));
}

TEST_CASE("perceptual_loss vanishes for equal inputs under any extractor") {
    Rng rng(33);
    Tensor a = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    for (ExtractorKind kind : {ExtractorKind::identity, ExtractorKind::conv_stack}) {
        LossConfig cfg;
        cfg.extractor = kind;
        cfg.extractor_seed = 9;
        Tape<float> tape;
        Var<float> p = perceptual_loss(tape, tape.leaf(a), tape.leaf(a), cfg);
        CHECK(p.val().data[0] == 0.0f);
    }
}

TEST_CASE("conv-stack extractor is deterministic for a fixed seed") {
    Rng rng(34);
    Tensor a = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor b = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    LossConfig cfg;
    cfg.extractor = ExtractorKind::conv_stack;
    cfg.extractor_seed = 123;

    float first = 0;
    for (int run = 0; run < 2; ++run) {
        Tape<float> tape;
        Var<float> p = perceptual_loss(tape, tape.leaf(a), tape.leaf(b), cfg);
        if (run == 0)
            first = p.val().data[0];
        else
            CHECK(p.val().data[0] == first); // bit-for-bit
    }
    CHECK(first > 0.0f);

    // three taps, and a different seed gives a different pyramid
    Tape<float> tape;
    auto taps = extract_features(tape, tape.leaf(a), cfg);
    CHECK(taps.size() == 3);
    LossConfig other = cfg;
    other.extractor_seed = 124;
    Tape<float> tape2;
    Var<float> p2 = perceptual_loss(tape2, tape2.leaf(a), tape2.leaf(b), other);
    CHECK(p2.val().data[0] != first);
}

TEST_CASE("total_loss degenerates to l2 when lambda is zero with no fakes") {
    Rng rng(35);
    Tensor a = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
    Tensor b = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
    LossConfig cfg;
    cfg.lambda = 0.0;
    Tape<float> tape;
    Var<float> t = total_loss(tape, tape.leaf(a), tape.leaf(b), {}, cfg);
    CHECK(t.val().data[0] == eval_l2(a, b));
}

TEST_CASE("total_loss equals the hand-assembled composition") {
    Rng rng(36);
    Tensor pred = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor target = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor fake = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);

    LossConfig cfg;
    cfg.extractor = ExtractorKind::conv_stack;
    cfg.extractor_seed = 5;
    // lambda = 0.04 balances the two components; fakes enter at 0.1
    Tape<float> tape;
    Var<float> total =
        total_loss(tape, tape.leaf(pred), tape.leaf(target), {tape.leaf(fake)}, cfg);

    Tape<float> t2;
    const double l2v = l2_loss(t2.leaf(pred), t2.leaf(target)).val().data[0];
    const double percv = perceptual_loss(t2, t2.leaf(pred), t2.leaf(target), cfg).val().data[0];
    Tensor small = bilinear_fwd(target, 8, 8);
    const double fakev = l2_loss(t2.leaf(fake), t2.leaf(small)).val().data[0];
    const double expect = l2v + 0.04 * percv + 0.1 * fakev;
    CHECK(total.val().data[0] == doctest::Approx(expect).epsilon(1e-7));

    // sanity arithmetic at the published weight: 1 + 0.04 * 0.5 = 1.02
    CHECK(1.0 + cfg.lambda * 0.5 == doctest::Approx(1.02));
}

TEST_CASE("total_loss is non-negative and zero only at equality") {
    Rng rng(37);
    Tensor a = random_tensor<float>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
    LossConfig cfg; // identity extractor
    {
        Tape<float> tape;
        CHECK(total_loss(tape, tape.leaf(a), tape.leaf(a), {}, cfg).val().data[0] == 0.0f);
    }
    for (int iter = 0; iter < 10; ++iter) {
        Tensor b = a;
        const size_t at = rng.below(b.data.size());
        b.data[at] += 1e-3f;
        Tape<float> tape;
        CHECK(total_loss(tape, tape.leaf(a), tape.leaf(b), {}, cfg).val().data[0] > 0.0f);
    }
}

TEST_CASE("total_loss gradients through the toy model match finite differences") {
    ModelConfig mcfg = ModelConfig::toy();
    ParamStoreT<double> ps = init_mcafnet_params<double>(mcfg, 11);
    Rng rng(38);
    TensorT<double> clear = random_tensor<double>(Shape{1, 3, 8, 8}, rng, 0.1, 0.9);
    TensorT<double> hazy = random_tensor<double>(Shape{1, 3, 8, 8}, rng, 0.1, 0.9);
    LossConfig lcfg; // identity extractor, fake supervision on

    ScalarBuilder builder = [&](Tape<double>& t, ParamBinder<double>& p) {
        McafNetOut<double> out = mcafnet_forward(p, mcfg, t.leaf(hazy, "hazy"));
        return total_loss(t, out.dehazed, t.leaf(clear, "clear"), out.fakes, lcfg);
    };
    GradCheckOptions opt;
    opt.tol = 1e-3;
    opt.max_per_param = 2;
    auto report = grad_check(builder, ps, opt);
    INFO("max relative error " << report.max_rel_err);
    CHECK(report.passed);
}

TEST_CASE("train_overfit with zero learning rate freezes everything") {
    Rng rng(39);
    Tensor clear = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor hazy = synth_pair(clear, 0.6, 0.8);

    TrainConfig tcfg;
    tcfg.steps = 5;
    tcfg.lr = 0.0;
    LossConfig lcfg;
    TrainResult r = train_overfit(hazy, clear, ModelConfig::toy(), tcfg, lcfg);

    ParamStore fresh = init_mcafnet_params<float>(ModelConfig::toy(), tcfg.seed);
    for (size_t i = 0; i < fresh.count(); ++i)
        CHECK(max_abs_diff(fresh.value_at(i), r.params.value_at(i)) == 0.0);
    for (const auto& e : r.trace) CHECK(e.loss == r.trace[0].loss);
}

TEST_CASE("train_overfit is bit-for-bit deterministic per seed") {
    Rng rng(40);
    Tensor clear = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor hazy = synth_pair(clear, 0.6, 0.8);

    TrainConfig tcfg;
    tcfg.steps = 8;
    tcfg.seed = 21;
    LossConfig lcfg;
    TrainResult r1 = train_overfit(hazy, clear, ModelConfig::toy(), tcfg, lcfg);
    TrainResult r2 = train_overfit(hazy, clear, ModelConfig::toy(), tcfg, lcfg);
    CHECK(trace_to_jsonl(r1.trace) == trace_to_jsonl(r2.trace));
    for (size_t i = 0; i < r1.params.count(); ++i)
        CHECK(max_abs_diff(r1.params.value_at(i), r2.params.value_at(i)) == 0.0);
}

TEST_CASE("train_overfit reduces the loss on a small synthetic pair") {
    Rng rng(41);
    Tensor clear = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor hazy = synth_pair(clear, 0.6, 0.8);

    TrainConfig tcfg;
    tcfg.steps = 40;
    LossConfig lcfg;
    TrainResult r = train_overfit(hazy, clear, ModelConfig::toy(), tcfg, lcfg);
    CHECK(r.trace.back().loss < r.trace.front().loss);
    CHECK(r.trace.back().psnr > r.trace.front().psnr);
}

TEST_CASE("divergence raises a training error carrying the step index") {
    Rng rng(42);
    Tensor clear = random_tensor<float>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor hazy = synth_pair(clear, 0.6, 0.8);

    TrainConfig tcfg;
    tcfg.steps = 50;
    tcfg.lr = 1e18;
    LossConfig lcfg;
    try {
        train_overfit(hazy, clear, ModelConfig::toy(), tcfg, lcfg);
        FAIL("expected divergence");
    } catch (const TrainingError& e) {
        CHECK(e.step >= 0);
        CHECK(e.step < 50);
    }
}

TEST_CASE("cosine schedule starts at lr and approaches the floor") {
    TrainConfig tcfg;
    tcfg.steps = 100;
    tcfg.lr = 1e-3;
    CHECK(tcfg.lr_at(0) == doctest::Approx(1e-3));
    CHECK(tcfg.lr_at(100) == doctest::Approx(1e-8));
    CHECK(tcfg.lr_at(50) < tcfg.lr_at(10));
}
