#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "afa/block.hpp"
#include "afa/corpus.hpp"
#include "afa/errors.hpp"
#include "afa/ops.hpp"
#include "afa/rng.hpp"
#include "afa/tensor.hpp"
#include "afa/vocab.hpp"

namespace afa {

struct DiscConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t ff_dim = 128;
    std::size_t max_len = 64;
    bool positional_encoding = true;
    double dropout = 0.3;
    // Replace the literal MASK id with UNK at the input, hiding the mask
    // symbol and forcing detection through content changes alone.
    bool mask_as_unk = false;
};

/// Binary detector of mask perturbations: embedding + one Transformer block +
/// mean pool + scalar sigmoid head. Output is P(sequence was masked). The
/// interface deliberately takes token ids only; the downstream task's labels
/// never reach this model.
class Discriminator {
public:
    DiscConfig cfg;
    Tensor embedding;  // V x dim, separate from the target's table
    TransformerBlock block;
    Tensor w_head;     // dim x 1
    Tensor b_head;     // 1 x 1

    static Discriminator init(const DiscConfig& cfg, RngStream& rng) {
        if (cfg.vocab_size < Vocab::kReserved) {
            throw ConfigError("Discriminator: vocab_size must cover the reserved ids");
        }
        Discriminator d;
        d.cfg = cfg;
        d.embedding = normal_init(cfg.vocab_size, cfg.dim, rng);
        d.block = TransformerBlock::init(cfg.dim, cfg.heads, cfg.ff_dim, rng);
        d.w_head = normal_init(cfg.dim, 1, rng);
        d.b_head = Tensor::zeros(1, 1, true);
        return d;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        out.push_back(embedding);
        block.collect_params(out);
        out.push_back(w_head);
        out.push_back(b_head);
        return out;
    }

    /// Per-row probability that the sequence was masked, clamped to
    /// [1e-12, 1 - 1e-12]. Returns a B x 1 tensor.
    Tensor predict(const Batch& batch, bool training, RngStream* dropout_rng) const {
        const std::size_t width = batch.seq_len();
        const Tensor pe = cfg.positional_encoding ? sinusoidal_encoding(width, cfg.dim) : Tensor();
        RngStream* rng = training ? dropout_rng : nullptr;
        const double rate = training ? cfg.dropout : 0.0;

        std::vector<Tensor> probs;
        for (std::size_t e = 0; e < batch.size(); ++e) {
            std::vector<int> ids = batch.token_ids[e];
            if (cfg.mask_as_unk) {
                for (int& id : ids) {
                    if (id == Vocab::kMask) id = Vocab::kUnk;
                }
            }
            Tensor x = ops::gather_rows(embedding, ids);
            if (cfg.positional_encoding) x = ops::add(x, pe);

            Tensor bias = Tensor::zeros(width, width);
            for (std::size_t j = 0; j < width; ++j) {
                if (batch.pad_mask[e][j]) continue;
                for (std::size_t i = 0; i < width; ++i) bias.at(i, j) = kPadBias;
            }

            TransformerBlock::Output blk = block.forward(x, bias, rate, rng);

            const std::size_t live = batch.live_count(e);
            Tensor pool = Tensor::zeros(1, width);
            for (std::size_t j = 0; j < width; ++j) {
                if (batch.pad_mask[e][j]) pool.at(0, j) = 1.0 / static_cast<double>(live);
            }
            Tensor logit = ops::add_row_broadcast(ops::matmul(ops::matmul(pool, blk.hidden), w_head),
                                                  b_head);
            probs.push_back(ops::clamp(ops::sigmoid(logit), ops::kLogFloor, 1.0 - ops::kLogFloor));
        }
        return ops::concat_rows(probs);
    }

    /// Convenience: probabilities as plain doubles, evaluation mode.
    std::vector<double> predict_values(const Batch& batch) const {
        return predict(batch, /*training=*/false, nullptr).values();
    }
};

/// Paired binary cross-entropy: originals labeled 0, masked counterparts
/// labeled 1, averaged over the batch.
inline Tensor disc_loss(const Tensor& p_orig, const Tensor& p_masked) {
    if (p_orig.rows() != p_masked.rows() || p_orig.cols() != 1 || p_masked.cols() != 1) {
        throw ShapeError("disc_loss: expected matching B x 1 tensors, got " + p_orig.shape_str() +
                         " and " + p_masked.shape_str());
    }
    Tensor orig_term = ops::sum_all(ops::log_clamped(ops::affine(p_orig, -1.0, 1.0)));
    Tensor masked_term = ops::sum_all(ops::log_clamped(p_masked));
    return ops::affine(ops::add(orig_term, masked_term),
                       -1.0 / static_cast<double>(p_orig.rows()));
}

/// Fraction of the pair batch classified correctly with threshold 0.5.
inline double disc_pair_accuracy(const std::vector<double>& p_orig,
                                 const std::vector<double>& p_masked) {
    std::size_t correct = 0;
    for (double p : p_orig) {
        if (!(p > 0.5)) ++correct;
    }
    for (double p : p_masked) {
        if (p > 0.5) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(p_orig.size() + p_masked.size());
}

} // namespace afa
