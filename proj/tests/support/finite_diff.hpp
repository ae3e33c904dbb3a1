#pragma once

// Central finite-difference gradient oracle. Independent of the tape: the
// numeric side re-evaluates the forward closure with perturbed leaves, so a
// broken adjoint cannot hide.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "afa/tensor.hpp"

namespace testsupport {

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// `build` must reconstruct the scalar loss from the current leaf values on
/// every call. Leaves need grad buffers (requires_grad = true).
inline GradCheck gradient_check(std::vector<afa::Tensor> leaves,
                                const std::function<afa::Tensor()>& build,
                                double step = 1e-5) {
    for (afa::Tensor& leaf : leaves) leaf.zero_grad();
    afa::Tape tape;
    {
        afa::TapeScope scope(tape);
        afa::Tensor loss = build();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const afa::Tensor& leaf : leaves) analytic.push_back(leaf.grad());

    GradCheck result;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t i = 0; i < leaves[li].numel(); ++i) {
            const double original = leaves[li].mutable_values()[i];
            leaves[li].mutable_values()[i] = original + step;
            const double f_plus = build().scalar();
            leaves[li].mutable_values()[i] = original - step;
            const double f_minus = build().scalar();
            leaves[li].mutable_values()[i] = original;
            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[li][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            result.max_rel_err = std::max(result.max_rel_err, std::abs(a - numeric) / denom);
            ++result.checked;
        }
    }
    return result;
}

} // namespace testsupport
