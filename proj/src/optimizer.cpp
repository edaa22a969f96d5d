#include "prefsig/optimizer.hpp"

#include <cmath>

#include "prefsig/errors.hpp"

namespace prefsig {

void optimizer_step(ParameterSet& model, const ParameterSet& grads, OptimizerState& state,
                    double lr) {
    if (!model.same_shape(grads)) throw ConfigError("gradient shape mismatch in optimizer_step");
    if (!state.initialized) {
        state.m = ParameterSet::zeros_like(model);
        state.v = ParameterSet::zeros_like(model);
        state.initialized = true;
    }
    if (!model.same_shape(state.m)) throw ConfigError("optimizer state shape mismatch");

    state.step += 1;
    const auto& cfg = state.config;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    std::vector<const Mat*> g;
    grads.for_each_tensor([&](const std::string&, const Mat& t) { g.push_back(&t); });
    std::vector<Mat*> ms, vs;
    state.m.for_each_tensor([&](const std::string&, Mat& t) { ms.push_back(&t); });
    state.v.for_each_tensor([&](const std::string&, Mat& t) { vs.push_back(&t); });

    std::size_t i = 0;
    model.for_each_tensor([&](const std::string&, Mat& p) {
        Mat& m = *ms[i];
        Mat& v = *vs[i];
        const Mat& grad = *g[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * grad.array().square().matrix();
        Mat m_hat = m / bc1;
        Mat v_hat = v / bc2;
        p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
        ++i;
    });
}

}  // namespace prefsig
