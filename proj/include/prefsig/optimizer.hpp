#pragma once

#include "prefsig/model.hpp"

namespace prefsig {

// Adam with bias correction.
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    long step = 0;
    ParameterSet m;  // first moments
    ParameterSet v;  // second moments
    bool initialized = false;
};

void optimizer_step(ParameterSet& model, const ParameterSet& grads, OptimizerState& state,
                    double lr);

}  // namespace prefsig
