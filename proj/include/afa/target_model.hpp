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

namespace afa {

struct TargetConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t ff_dim = 128;
    int num_classes = 2;
    std::size_t max_len = 64;
    bool positional_encoding = true;
    double dropout = 0.3;
};

struct TargetOutput {
    Tensor logits;                                    // B x C
    std::vector<Tensor> attention_rows;               // per example: 1 x n, zero at PAD
    std::vector<std::vector<Tensor>> attention_full;  // [example][head]: n x n, diagnostics

    /// Plain copies of the per-example attention distributions.
    std::vector<std::vector<double>> attention_values() const {
        std::vector<std::vector<double>> out;
        out.reserve(attention_rows.size());
        for (const Tensor& row : attention_rows) out.push_back(row.values());
        return out;
    }
};

/// Classifier whose token-importance signal is the attention row of the last
/// live token, averaged over heads. With right padding the literal final row
/// of the attention matrix would belong to a padding token, so the last live
/// token anchors the extraction instead.
class TargetModel {
public:
    TargetConfig cfg;
    Tensor embedding;  // V x dim
    TransformerBlock block;
    Tensor w_cls;      // dim x C
    Tensor b_cls;      // 1 x C

    static TargetModel init(const TargetConfig& cfg, RngStream& rng) {
        if (cfg.vocab_size < Vocab::kReserved) {
            throw ConfigError("TargetModel: vocab_size must cover the reserved ids");
        }
        if (cfg.num_classes < 2) throw ConfigError("TargetModel: need at least 2 classes");
        TargetModel m;
        m.cfg = cfg;
        m.embedding = normal_init(cfg.vocab_size, cfg.dim, rng);
        m.block = TransformerBlock::init(cfg.dim, cfg.heads, cfg.ff_dim, rng);
        m.w_cls = normal_init(cfg.dim, static_cast<std::size_t>(cfg.num_classes), rng);
        m.b_cls = Tensor::zeros(1, static_cast<std::size_t>(cfg.num_classes), true);
        return m;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        out.push_back(embedding);
        block.collect_params(out);
        out.push_back(w_cls);
        out.push_back(b_cls);
        return out;
    }

    TargetOutput forward(const Batch& batch, bool training, RngStream* dropout_rng) const {
        const std::size_t width = batch.seq_len();
        const Tensor pe = cfg.positional_encoding ? sinusoidal_encoding(width, cfg.dim) : Tensor();
        RngStream* rng = training ? dropout_rng : nullptr;
        const double rate = training ? cfg.dropout : 0.0;

        TargetOutput out;
        std::vector<Tensor> logits_rows;
        for (std::size_t e = 0; e < batch.size(); ++e) {
            Tensor x = ops::gather_rows(embedding, batch.token_ids[e]);
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
            Tensor pooled = ops::matmul(pool, blk.hidden);
            logits_rows.push_back(ops::add_row_broadcast(ops::matmul(pooled, w_cls), b_cls));

            const std::size_t anchor = batch.last_live(e);
            Tensor row_sum;
            for (std::size_t h = 0; h < cfg.heads; ++h) {
                Tensor row = ops::gather_row(blk.attention[h], anchor);
                row_sum = h == 0 ? row : ops::add(row_sum, row);
            }
            out.attention_rows.push_back(
                ops::affine(row_sum, 1.0 / static_cast<double>(cfg.heads)));
            out.attention_full.push_back(std::move(blk.attention));
        }
        out.logits = ops::concat_rows(logits_rows);
        return out;
    }

    Tensor classification_loss(const TargetOutput& out, const std::vector<int>& labels) const {
        return ops::cross_entropy(out.logits, labels);
    }

    /// Argmax class per example, lower index on ties. Evaluation mode.
    std::vector<int> predict(const Batch& batch) const {
        TargetOutput out = forward(batch, /*training=*/false, nullptr);
        std::vector<int> preds;
        preds.reserve(batch.size());
        const std::size_t c = static_cast<std::size_t>(cfg.num_classes);
        for (std::size_t e = 0; e < batch.size(); ++e) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j) {
                if (out.logits.at(e, j) > out.logits.at(e, best)) best = j;
            }
            preds.push_back(static_cast<int>(best));
        }
        return preds;
    }
};

} // namespace afa
