#ifndef MCAF_GRADCHECK_HPP
#define MCAF_GRADCHECK_HPP

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "mcaf/params.hpp"
#include "mcaf/rng.hpp"

namespace mcaf {

// A graph builder maps (tape, parameters) to a scalar output. It must be
// deterministic: the checker re-executes it many times with perturbed
// parameters.
using ScalarBuilder = std::function<Var<double>(Tape<double>&, ParamBinder<double>&)>;

struct GradCheckEntry {
    std::string param;
    int64_t index = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_err = 0;
};

struct GradCheckReport {
    bool passed = true;
    int64_t checked = 0;
    double max_rel_err = 0;
    std::vector<GradCheckEntry> worst; // sorted by rel_err, descending
};

struct GradCheckOptions {
    double step = 1e-4;
    double tol = 1e-4;
    int64_t max_per_param = 24; // elements sampled per parameter
    uint64_t sample_seed = 17;
    size_t keep_worst = 10;
};

// Central-difference verification of reverse-mode gradients. Everything runs
// in double precision regardless of the precision the model trains in.
inline GradCheckReport grad_check(const ScalarBuilder& builder, ParamStoreT<double>& params,
                                  const GradCheckOptions& opt = {}) {
    if (opt.step <= 0 || opt.step > 1e-2) throw ShapeError("grad_check: step must be in (0, 1e-2]");

    const auto eval = [&](ParamStoreT<double>& p) {
        Tape<double> tape;
        ParamBinder<double> bind(tape, p);
        Var<double> out = builder(tape, bind);
        if (out.val().numel() != 1) throw ShapeError("grad_check: builder must return a scalar");
        return out.val().data[0];
    };

    // Analytic gradients.
    params.zero_grads();
    {
        Tape<double> tape;
        ParamBinder<double> bind(tape, params);
        Var<double> out = builder(tape, bind);
        tape.backward(out);
        bind.collect_grads(params);
    }

    GradCheckReport report;
    Rng rng = Rng(opt.sample_seed).split("grad-check-sampling");
    for (size_t pi = 0; pi < params.count(); ++pi) {
        const std::string& name = params.names()[pi];
        TensorT<double>& value = params.value_at(pi);
        const TensorT<double>& grad = params.grad_at(pi);
        const int64_t n = value.numel();

        std::vector<int64_t> picks;
        if (n <= opt.max_per_param) {
            picks.resize(static_cast<size_t>(n));
            for (int64_t k = 0; k < n; ++k) picks[static_cast<size_t>(k)] = k;
        } else {
            for (int64_t k = 0; k < opt.max_per_param; ++k)
                picks.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
            std::sort(picks.begin(), picks.end());
            picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
        }

        for (int64_t k : picks) {
            const double saved = value.data[static_cast<size_t>(k)];
            value.data[static_cast<size_t>(k)] = saved + opt.step;
            const double fp = eval(params);
            value.data[static_cast<size_t>(k)] = saved - opt.step;
            const double fm = eval(params);
            value.data[static_cast<size_t>(k)] = saved;

            const double numeric = (fp - fm) / (2.0 * opt.step);
            const double analytic = grad.data[static_cast<size_t>(k)];
            const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));

            ++report.checked;
            report.max_rel_err = std::max(report.max_rel_err, rel);
            if (rel > opt.tol) report.passed = false;

            if (report.worst.size() < opt.keep_worst || rel > report.worst.back().rel_err) {
                report.worst.push_back(GradCheckEntry{name, k, analytic, numeric, rel});
                std::sort(report.worst.begin(), report.worst.end(),
                          [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.rel_err > b.rel_err; });
                if (report.worst.size() > opt.keep_worst) report.worst.resize(opt.keep_worst);
            }
        }
    }
    return report;
}

} // namespace mcaf

#endif
