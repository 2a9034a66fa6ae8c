#ifndef MCAF_BATTERY_HPP
#define MCAF_BATTERY_HPP

#include <cstdint>

#include "mcaf/gradcheck.hpp"

namespace mcaf {

struct BatteryResult {
    int graphs = 0;
    int failed = 0;
    int64_t checked = 0;
    double max_rel_err = 0;
    std::vector<GradCheckEntry> worst;
};

// Runs grad_check over seeded random compositions of the tensor ops (conv,
// layer norm, softmax, resize, pixel shuffle, activations, attention-style
// products) reduced to a scalar. Used by the CLI and by the acceptance suite.
BatteryResult gradcheck_battery(int graphs, double tol = 1e-4, double step = 1e-4,
                                uint64_t seed = 0);

} // namespace mcaf

#endif
