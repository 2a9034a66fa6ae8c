#ifndef MCAF_LOSS_HPP
#define MCAF_LOSS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mcaf/autograd.hpp"
#include "mcaf/rng.hpp"

// Hybrid training objective: pixel L2 plus a weighted perceptual term, with
// optional auxiliary L2 supervision of the CSAM fake images against the
// downsampled target. The perceptual feature extractor is pluggable; the
// built-in choices are the identity (exact math) and a frozen random conv
// pyramid with taps at depths 3, 8 and 15.

namespace mcaf {

enum class ExtractorKind { identity, conv_stack };

struct LossConfig {
    double lambda = 0.04;
    double fake_weight = 0.1;
    ExtractorKind extractor = ExtractorKind::identity;
    uint64_t extractor_seed = 0;
};

template <typename T>
Var<T> l2_loss(Var<T> pred, Var<T> target) {
    if (pred.shape() != target.shape())
        throw ShapeError("l2_loss: " + pred.shape().str() + " vs " + target.shape().str());
    Var<T> d = sub(pred, target);
    return mean_all(mul(d, d));
}

namespace detail {

struct ExtractorLayer {
    int cin = 0, cout = 0, stride = 1;
    bool tap = false;
};

// Channel plan loosely following the tap structure of a small conv pyramid:
// taps after layers 3, 8 and 15, with a stride-2 reduction after each tap
// group boundary.
inline std::vector<ExtractorLayer> extractor_plan() {
    std::vector<ExtractorLayer> plan;
    auto push = [&](int ci, int co, int s, bool tap) { plan.push_back({ci, co, s, tap}); };
    push(3, 8, 1, false);
    push(8, 8, 1, false);
    push(8, 8, 1, true); // layer 3
    push(8, 16, 2, false);
    for (int i = 5; i <= 7; ++i) push(16, 16, 1, false);
    push(16, 16, 1, true); // layer 8
    push(16, 32, 2, false);
    for (int i = 10; i <= 14; ++i) push(32, 32, 1, false);
    push(32, 32, 1, true); // layer 15
    return plan;
}

template <typename T>
std::vector<TensorT<T>> extractor_weights(uint64_t seed) {
    std::vector<TensorT<T>> ws;
    Rng rng = Rng(seed).split("perceptual-extractor");
    int idx = 0;
    for (const auto& l : extractor_plan()) {
        Rng r = rng.split("layer" + std::to_string(idx++));
        TensorT<T> w(Shape{l.cout, l.cin, 3, 3});
        const double std = std::sqrt(2.0 / (l.cin * 9));
        for (auto& v : w.data) v = static_cast<T>(r.normal(0.0, std));
        ws.push_back(std::move(w));
    }
    return ws;
}

} // namespace detail

// Feature maps of the configured extractor. Extractor weights are constants
// on the tape, never parameters.
template <typename T>
std::vector<Var<T>> extract_features(Tape<T>& tape, Var<T> x, const LossConfig& cfg) {
    if (cfg.extractor == ExtractorKind::identity) return {x};
    std::vector<Var<T>> taps;
    auto plan = detail::extractor_plan();
    auto weights = detail::extractor_weights<T>(cfg.extractor_seed);
    Var<T> h = x;
    for (size_t i = 0; i < plan.size(); ++i) {
        Var<T> w = tape.leaf(weights[i], "extractor");
        h = conv2d(h, w, Var<T>{}, plan[i].stride, 1, 1);
        h = relu(h);
        if (plan[i].tap) taps.push_back(h);
    }
    return taps;
}

template <typename T>
Var<T> perceptual_loss(Tape<T>& tape, Var<T> pred, Var<T> target, const LossConfig& cfg) {
    std::vector<Var<T>> fp = extract_features(tape, pred, cfg);
    std::vector<Var<T>> ft = extract_features(tape, target, cfg);
    if (fp.empty()) throw ShapeError("perceptual_loss: extractor produced no feature maps");
    Var<T> acc = l2_loss(fp[0], ft[0]);
    for (size_t i = 1; i < fp.size(); ++i) acc = add(acc, l2_loss(fp[i], ft[i]));
    return acc;
}

template <typename T>
Var<T> total_loss(Tape<T>& tape, Var<T> pred, Var<T> target, const std::vector<Var<T>>& fakes,
                  const LossConfig& cfg) {
    if (cfg.lambda < 0) throw ShapeError("total_loss: lambda must be >= 0");
    Var<T> loss = l2_loss(pred, target);
    if (cfg.lambda > 0) loss = add(loss, scale_const(perceptual_loss(tape, pred, target, cfg), cfg.lambda));
    for (const Var<T>& fake : fakes) {
        Var<T> small = bilinear_resize(target, fake.shape().h, fake.shape().w);
        loss = add(loss, scale_const(l2_loss(fake, small), cfg.fake_weight));
    }
    return loss;
}

} // namespace mcaf

#endif
