#ifndef MCAF_TRAIN_HPP
#define MCAF_TRAIN_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcaf/loss.hpp"
#include "mcaf/model.hpp"

namespace mcaf {

struct TrainingError : std::runtime_error {
    int step;
    TrainingError(int step_, const std::string& msg)
        : std::runtime_error("training error at step " + std::to_string(step_) + ": " + msg), step(step_) {}
};

struct TrainConfig {
    int steps = 200;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_min = 1e-8;        // cosine annealing floor
    double max_grad_norm = 0.5;  // global-norm clip; <= 0 disables
    uint64_t seed = 0;

    void validate() const {
        if (steps < 0) throw ShapeError("train: steps must be >= 0");
        if (lr < 0) throw ShapeError("train: learning rate must be >= 0");
    }

    double lr_at(int step) const {
        const double floor = std::min(lr_min, lr);
        if (steps <= 0) return lr;
        const double t = static_cast<double>(step) / static_cast<double>(steps);
        return floor + 0.5 * (lr - floor) * (1.0 + std::cos(3.14159265358979323846 * t));
    }
};

struct TraceEntry {
    int step = 0;
    double loss = 0;
    double psnr = 0;
    double lr = 0;
};

struct TrainResult {
    std::vector<TraceEntry> trace;
    ParamStore params;
};

// Deterministic single-pair overfit loop (Adam + cosine decay, batch 1).
TrainResult train_overfit(const Tensor& hazy, const Tensor& clear, const ModelConfig& mcfg,
                          const TrainConfig& tcfg, const LossConfig& lcfg);

// Serialize one trace entry as a JSON line: {"step":..,"loss":..,"psnr":..,"lr":..}
std::string trace_to_jsonl(const std::vector<TraceEntry>& trace);

} // namespace mcaf

#endif
