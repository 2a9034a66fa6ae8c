#include "mcaf/train.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace mcaf {

namespace {

double tensor_psnr(const Tensor& a, const Tensor& b) {
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.data.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace

TrainResult train_overfit(const Tensor& hazy, const Tensor& clear, const ModelConfig& mcfg,
                          const TrainConfig& tcfg, const LossConfig& lcfg) {
    tcfg.validate();
    if (hazy.shape != clear.shape) throw ShapeError("train: hazy/clear shape mismatch");

    TrainResult result;
    result.params = init_mcafnet_params<float>(mcfg, tcfg.seed);
    ParamStore& params = result.params;

    // Adam moment buffers, one pair per parameter, in store order.
    std::vector<std::vector<double>> m(params.count()), v(params.count());
    for (size_t i = 0; i < params.count(); ++i) {
        m[i].assign(params.value_at(i).data.size(), 0.0);
        v[i].assign(params.value_at(i).data.size(), 0.0);
    }

    for (int step = 0; step < tcfg.steps; ++step) {
        const double lr = tcfg.lr_at(step);
        double loss_value = 0;
        try {
            Tape<float> tape;
            ParamBinder<float> bind(tape, params);
            McafNetOut<float> out = mcafnet_forward(bind, mcfg, tape.leaf(hazy, "hazy"));
            Var<float> target = tape.leaf(clear, "clear");
            Var<float> loss = total_loss(tape, out.dehazed, target, out.fakes, lcfg);
            loss_value = static_cast<double>(loss.val().data[0]);
            if (!std::isfinite(loss_value)) throw NumericError("loss diverged");

            result.trace.push_back(TraceEntry{step, loss_value, tensor_psnr(out.dehazed.val(), clear), lr});

            params.zero_grads();
            tape.backward(loss);
            bind.collect_grads(params);
        } catch (const NumericError& e) {
            throw TrainingError(step, e.what());
        }

        if (tcfg.max_grad_norm > 0) {
            double norm_sq = 0;
            for (size_t i = 0; i < params.count(); ++i)
                for (float g : params.grad_at(i).data) norm_sq += static_cast<double>(g) * g;
            const double norm = std::sqrt(norm_sq);
            if (norm > tcfg.max_grad_norm) {
                const float scale = static_cast<float>(tcfg.max_grad_norm / norm);
                for (size_t i = 0; i < params.count(); ++i)
                    for (float& g : params.grad_at(i).data) g *= scale;
            }
        }

        const double bc1 = 1.0 - std::pow(tcfg.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(tcfg.beta2, step + 1);
        for (size_t i = 0; i < params.count(); ++i) {
            auto& value = params.value_at(i).data;
            auto& grad = params.grad_at(i).data;
            for (size_t k = 0; k < value.size(); ++k) {
                const double g = static_cast<double>(grad[k]);
                m[i][k] = tcfg.beta1 * m[i][k] + (1.0 - tcfg.beta1) * g;
                v[i][k] = tcfg.beta2 * v[i][k] + (1.0 - tcfg.beta2) * g * g;
                const double mhat = m[i][k] / bc1;
                const double vhat = v[i][k] / bc2;
                value[k] = static_cast<float>(static_cast<double>(value[k]) -
                                              lr * mhat / (std::sqrt(vhat) + tcfg.adam_eps));
            }
        }
    }
    return result;
}

std::string trace_to_jsonl(const std::vector<TraceEntry>& trace) {
    std::ostringstream os;
    for (const TraceEntry& e : trace) {
        nlohmann::json j;
        j["step"] = e.step;
        j["loss"] = e.loss;
        j["psnr"] = std::isfinite(e.psnr) ? nlohmann::json(e.psnr) : nlohmann::json(nullptr);
        j["lr"] = e.lr;
        os << j.dump() << "\n";
    }
    return os.str();
}

} // namespace mcaf
