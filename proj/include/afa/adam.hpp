#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "afa/errors.hpp"
#include "afa/tensor.hpp"

namespace afa {

/// Adam with conventional defaults (beta1 0.9, beta2 0.999, eps 1e-8).
/// One state object serves one fixed parameter list; the moment buffers are
/// keyed by position, so the list order must not change between steps.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

inline void adam_step(std::vector<Tensor>& params, double lr, AdamState& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            state.m[p].assign(params[p].numel(), 0.0);
            state.v[p].assign(params[p].numel(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ContractError("adam_step: parameter list size changed between steps");
    }
    for (const Tensor& p : params) {
        if (!p.has_grad_buffer()) {
            throw ContractError("adam_step: parameter " + p.shape_str() + " has no gradient");
        }
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<double>& w = params[p].mutable_values();
        std::vector<double>& g = params[p].mutable_grad();
        std::vector<double>& m = state.m[p];
        std::vector<double>& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        std::fill(g.begin(), g.end(), 0.0);
    }
}

} // namespace afa
