#include "mcaf/battery.hpp"

#include "mcaf/rng.hpp"

namespace mcaf {

namespace {

TensorT<double> random_values(Shape s, Rng& rng, double lo, double hi) {
    TensorT<double> t(s);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Builds one random parameterized graph. Parameters are registered in the
// store; the builder replays the same op sequence on every evaluation.
struct GraphSpec {
    ParamStoreT<double> params;
    ScalarBuilder builder;
};

GraphSpec make_graph(uint64_t seed) {
    Rng rng = Rng(seed).split("gradcheck-graph");
    GraphSpec spec;

    const int64_t c = 4 * (1 + static_cast<int64_t>(rng.below(2))); // 4 or 8
    const int64_t h = 4 + static_cast<int64_t>(rng.below(4));
    const int64_t w = 4 + static_cast<int64_t>(rng.below(4));
    spec.params.add("x", random_values(Shape{1, c, h, w}, rng, -1.0, 1.0));

    struct Step {
        int op;
        int aux;
    };
    std::vector<Step> steps;
    const int nops = 2 + static_cast<int>(rng.below(3));
    Shape cur{1, c, h, w};
    int pidx = 0;
    for (int i = 0; i < nops; ++i) {
        const int op = static_cast<int>(rng.below(8));
        Step s{op, 0};
        const std::string suffix = std::to_string(pidx++);
        switch (op) {
            case 0: { // conv, optionally depthwise
                const int k = rng.uniform() < 0.5 ? 1 : 3;
                const bool dw = rng.uniform() < 0.5;
                const int64_t groups = dw ? cur.c : 1;
                const int64_t co = dw ? cur.c : 4;
                spec.params.add("w" + suffix,
                                random_values(Shape{co, cur.c / groups, k, k}, rng, -0.5, 0.5));
                spec.params.add("b" + suffix, random_values(Shape{1, co, 1, 1}, rng, -0.2, 0.2));
                s.aux = (k == 3 ? 1 : 0) | (dw ? 2 : 0);
                cur = Shape{cur.b, co, cur.h, cur.w};
                break;
            }
            case 1: { // layer norm
                spec.params.add("g" + suffix, random_values(Shape{1, cur.c, 1, 1}, rng, 0.5, 1.5));
                spec.params.add("t" + suffix, random_values(Shape{1, cur.c, 1, 1}, rng, -0.3, 0.3));
                break;
            }
            case 2: { // softmax over a random axis
                s.aux = 1 + static_cast<int>(rng.below(3));
                break;
            }
            case 3: { // bilinear resize
                s.aux = static_cast<int>(3 + rng.below(6)) * 16 + static_cast<int>(3 + rng.below(6));
                cur = Shape{cur.b, cur.c, s.aux / 16, s.aux % 16};
                break;
            }
            case 4: { // pixel shuffle when possible, otherwise gelu
                if (cur.c % 4 == 0) {
                    cur = Shape{cur.b, cur.c / 4, cur.h * 2, cur.w * 2};
                    s.aux = 1;
                }
                break;
            }
            case 5: { // gated elementwise product
                spec.params.add("p" + suffix, random_values(cur, rng, 0.2, 0.9));
                break;
            }
            case 6: { // channel statistics block
                break;
            }
            default: { // sigmoid
                break;
            }
        }
        steps.push_back(s);
    }

    spec.builder = [steps](Tape<double>& tape, ParamBinder<double>& p) -> Var<double> {
        Var<double> y = p("x");
        int pidx = 0;
        for (const Step& s : steps) {
            const std::string suffix = std::to_string(pidx++);
            switch (s.op) {
                case 0: {
                    const int k = (s.aux & 1) ? 3 : 1;
                    const int groups = (s.aux & 2) ? static_cast<int>(y.shape().c) : 1;
                    y = conv2d(y, p("w" + suffix), p("b" + suffix), 1, k / 2, groups);
                    break;
                }
                case 1:
                    y = layer_norm(y, p("g" + suffix), p("t" + suffix));
                    break;
                case 2:
                    y = softmax(y, s.aux, 1.3);
                    break;
                case 3:
                    y = bilinear_resize(y, s.aux / 16, s.aux % 16);
                    break;
                case 4:
                    y = s.aux ? pixel_shuffle(y, 2) : gelu(y);
                    break;
                case 5:
                    y = mul(y, p("p" + suffix));
                    break;
                case 6: {
                    // smooth attention-style gating (max-like ops stay out of
                    // the battery: finite differences disagree at their kinks)
                    Var<double> gate = sigmoid(global_avg_pool(y));
                    Var<double> gated = mul(y, gate);
                    y = mul(gated, sigmoid(channel_mean(gated)));
                    break;
                }
                default:
                    y = sigmoid(y);
                    break;
            }
        }
        return mean_all(mul(y, y));
    };
    return spec;
}

} // namespace

BatteryResult gradcheck_battery(int graphs, double tol, double step, uint64_t seed) {
    BatteryResult result;
    result.graphs = graphs;
    GradCheckOptions opt;
    opt.tol = tol;
    opt.step = step;
    opt.max_per_param = 8;
    for (int i = 0; i < graphs; ++i) {
        GraphSpec spec = make_graph(seed * 1000003ull + static_cast<uint64_t>(i));
        const GradCheckReport report = grad_check(spec.builder, spec.params, opt);
        result.checked += report.checked;
        result.max_rel_err = std::max(result.max_rel_err, report.max_rel_err);
        if (!report.passed) {
            ++result.failed;
            for (const auto& e : report.worst)
                if (result.worst.size() < 10) result.worst.push_back(e);
        }
    }
    return result;
}

} // namespace mcaf
