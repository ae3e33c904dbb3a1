#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "afa/corpus.hpp"
#include "afa/errors.hpp"
#include "afa/ops.hpp"
#include "afa/rng.hpp"
#include "afa/tensor.hpp"
#include "afa/vocab.hpp"

namespace afa {

/// Result of one epsilon-greedy selection. `indices` is kept in selection
/// order because the policy probability is defined over the sequential draw.
struct MaskSelection {
    enum class Mode { greedy, explore };

    std::vector<std::size_t> indices;  // live positions, in selection order
    Mode mode = Mode::greedy;
    double log_prob = 0.0;
    std::vector<int> masked_ids;       // original row with MASK written at indices
    bool truncated = false;            // k exceeded the live length

    bool contains(std::size_t pos) const {
        return std::find(indices.begin(), indices.end(), pos) != indices.end();
    }
};

/// Log-probability of drawing `ordered` by sequential sampling without
/// replacement with probabilities proportional to `weights` (Plackett-Luce).
/// Weights need not be normalized; each factor is weight / remaining mass.
/// Both the numerator and the shrinking denominator go through the log floor.
inline double log_policy_prob(const std::vector<double>& weights,
                              const std::vector<std::size_t>& ordered) {
    double remaining = 0.0;
    for (double w : weights) remaining += w;
    double total = 0.0;
    for (std::size_t idx : ordered) {
        if (idx >= weights.size()) {
            throw IndexError("log_policy_prob: index " + std::to_string(idx) +
                             " out of row of " + std::to_string(weights.size()));
        }
        const double w = weights[idx];
        total += std::log(std::max(w, ops::kLogFloor)) -
                 std::log(std::max(remaining, ops::kLogFloor));
        remaining -= w;
    }
    return total;
}

/// Differentiable twin of the scalar version: builds the same expression out
/// of recorded tensor ops so the gradient reaches the attention row.
inline Tensor log_policy_prob(const Tensor& weights, const std::vector<std::size_t>& ordered) {
    if (weights.rows() != 1) {
        throw ShapeError("log_policy_prob: expected a 1 x n row, got " + weights.shape_str());
    }
    Tensor remaining = ops::sum_all(weights);
    Tensor total;
    for (std::size_t step = 0; step < ordered.size(); ++step) {
        Tensor w = ops::gather_elem(weights, 0, ordered[step]);
        Tensor term = ops::sub(ops::log_clamped(w), ops::log_clamped(remaining));
        total = step == 0 ? term : ops::add(total, term);
        if (step + 1 < ordered.size()) remaining = ops::sub(remaining, w);
    }
    if (!total.defined()) total = Tensor::scalar_of(0.0);
    return total;
}

/// Epsilon-greedy top-k selection over the live positions of one sequence.
/// With probability 1 - epsilon the k highest-attention positions are taken
/// (ties to the lower index); with probability epsilon an ordered uniform
/// k-subset is drawn. The branch is decided once per sequence. log_prob is
/// the Plackett-Luce probability of the realized order under `attention`.
inline MaskSelection select(const std::vector<double>& attention,
                            const std::vector<std::size_t>& live_positions,
                            const std::vector<int>& token_ids, std::size_t k, double epsilon,
                            RngStream& rng) {
    if (k < 1) throw ContractError("select: k must be at least 1");
    if (epsilon < 0.0 || epsilon > 1.0) {
        throw ContractError("select: epsilon must lie in [0, 1]");
    }
    if (live_positions.empty()) throw ContractError("select: no live positions");

    MaskSelection sel;
    std::size_t effective_k = k;
    if (k > live_positions.size()) {
        effective_k = live_positions.size();
        sel.truncated = true;
    }

    const bool explore = rng.uniform01() < epsilon;
    if (explore) {
        sel.mode = MaskSelection::Mode::explore;
        for (std::size_t slot : rng.sample_without_replacement(live_positions.size(), effective_k)) {
            sel.indices.push_back(live_positions[slot]);
        }
    } else {
        sel.mode = MaskSelection::Mode::greedy;
        std::vector<std::size_t> order = live_positions;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (attention[a] != attention[b]) return attention[a] > attention[b];
            return a < b;
        });
        sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(effective_k));
    }

    sel.log_prob = log_policy_prob(attention, sel.indices);
    sel.masked_ids = token_ids;
    for (std::size_t idx : sel.indices) sel.masked_ids[idx] = Vocab::kMask;
    return sel;
}

/// Substitute MASK at each row's selected positions. Labels and padding are
/// untouched; masking an already-masked position is a no-op.
inline Batch apply_mask(const Batch& batch, const std::vector<MaskSelection>& selections) {
    if (selections.size() != batch.size()) {
        throw ContractError("apply_mask: " + std::to_string(selections.size()) +
                            " selections for a batch of " + std::to_string(batch.size()));
    }
    Batch masked = batch;
    for (std::size_t e = 0; e < batch.size(); ++e) {
        for (std::size_t idx : selections[e].indices) {
            if (idx >= batch.seq_len() || !batch.pad_mask[e][idx]) {
                throw ContractError("apply_mask: selection touches non-live position " +
                                    std::to_string(idx) + " in row " + std::to_string(e));
            }
            masked.token_ids[e][idx] = Vocab::kMask;
        }
    }
    return masked;
}

} // namespace afa
