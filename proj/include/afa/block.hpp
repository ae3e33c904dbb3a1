#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "afa/errors.hpp"
#include "afa/ops.hpp"
#include "afa/rng.hpp"
#include "afa/tensor.hpp"

namespace afa {

/// Attention logit added at padded key positions; exp(-1e9) underflows to
/// exactly zero after row-max subtraction, so padded tokens get zero mass.
inline constexpr double kPadBias = -1e9;

inline Tensor normal_init(std::size_t rows, std::size_t cols, RngStream& rng,
                          double stddev = 0.08) {
    Tensor t = Tensor::zeros(rows, cols, /*requires_grad=*/true);
    for (double& v : t.mutable_values()) v = rng.normal(0.0, stddev);
    return t;
}

inline Tensor const_filled(std::size_t rows, std::size_t cols, double value,
                           bool requires_grad = false) {
    Tensor t = Tensor::zeros(rows, cols, requires_grad);
    for (double& v : t.mutable_values()) v = value;
    return t;
}

/// Sinusoidal position table for sequences up to `len`, added to embeddings.
inline Tensor sinusoidal_encoding(std::size_t len, std::size_t dim) {
    Tensor pe = Tensor::zeros(len, dim);
    for (std::size_t pos = 0; pos < len; ++pos) {
        for (std::size_t i = 0; i < dim; i += 2) {
            const double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
            const double angle = static_cast<double>(pos) / rate;
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < dim) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

/// Single pre-classifier Transformer block: per-head scaled dot-product
/// attention, concatenation + output projection, then the usual residual /
/// layer-norm / feed-forward / residual / layer-norm stack. Dropout sits
/// after the attention projection and after the feed-forward output.
struct TransformerBlock {
    std::size_t dim = 0;
    std::size_t heads = 0;
    std::size_t ff_dim = 0;
    std::size_t head_dim = 0;

    std::vector<Tensor> w_q, w_k, w_v;  // one [dim x head_dim] triple per head
    Tensor w_out;                       // dim x dim
    Tensor ln1_gain, ln1_bias;
    Tensor ff_w1, ff_b1;                // dim x ff_dim, 1 x ff_dim
    Tensor ff_w2, ff_b2;                // ff_dim x dim, 1 x dim
    Tensor ln2_gain, ln2_bias;

    static TransformerBlock init(std::size_t dim, std::size_t heads, std::size_t ff_dim,
                                 RngStream& rng) {
        if (heads == 0 || dim % heads != 0) {
            throw ConfigError("TransformerBlock: dim " + std::to_string(dim) +
                              " not divisible by heads " + std::to_string(heads));
        }
        TransformerBlock b;
        b.dim = dim;
        b.heads = heads;
        b.ff_dim = ff_dim;
        b.head_dim = dim / heads;
        for (std::size_t h = 0; h < heads; ++h) {
            b.w_q.push_back(normal_init(dim, b.head_dim, rng));
            b.w_k.push_back(normal_init(dim, b.head_dim, rng));
            b.w_v.push_back(normal_init(dim, b.head_dim, rng));
        }
        b.w_out = normal_init(dim, dim, rng);
        b.ln1_gain = const_filled(1, dim, 1.0, true);
        b.ln1_bias = Tensor::zeros(1, dim, true);
        b.ff_w1 = normal_init(dim, ff_dim, rng);
        b.ff_b1 = Tensor::zeros(1, ff_dim, true);
        b.ff_w2 = normal_init(ff_dim, dim, rng);
        b.ff_b2 = Tensor::zeros(1, dim, true);
        b.ln2_gain = const_filled(1, dim, 1.0, true);
        b.ln2_bias = Tensor::zeros(1, dim, true);
        return b;
    }

    struct Output {
        Tensor hidden;                  // n x dim
        std::vector<Tensor> attention;  // per head, n x n row-stochastic over live keys
    };

    /// x: n x dim token representations; attn_bias: n x n additive logits
    /// (0 at live keys, kPadBias at padded keys). rng enables dropout.
    Output forward(const Tensor& x, const Tensor& attn_bias, double dropout_rate,
                   RngStream* rng) const {
        const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
        std::vector<Tensor> contexts;
        Output out;
        for (std::size_t h = 0; h < heads; ++h) {
            Tensor q = ops::matmul(x, w_q[h]);
            Tensor k = ops::matmul(x, w_k[h]);
            Tensor v = ops::matmul(x, w_v[h]);
            Tensor logits = ops::add(ops::affine(ops::matmul(q, ops::transpose(k)), scale),
                                     attn_bias);
            Tensor attn = ops::softmax_rows(logits);
            out.attention.push_back(attn);
            contexts.push_back(ops::matmul(attn, v));
        }
        Tensor projected = ops::matmul(ops::concat_cols(contexts), w_out);
        projected = ops::dropout(projected, dropout_rate, rng);
        Tensor normed = ops::layer_norm(ops::add(x, projected), ln1_gain, ln1_bias);
        Tensor ff = ops::add_row_broadcast(
            ops::matmul(ops::relu(ops::add_row_broadcast(ops::matmul(normed, ff_w1), ff_b1)),
                        ff_w2),
            ff_b2);
        ff = ops::dropout(ff, dropout_rate, rng);
        out.hidden = ops::layer_norm(ops::add(normed, ff), ln2_gain, ln2_bias);
        return out;
    }

    void collect_params(std::vector<Tensor>& out) const {
        for (std::size_t h = 0; h < heads; ++h) {
            out.push_back(w_q[h]);
            out.push_back(w_k[h]);
            out.push_back(w_v[h]);
        }
        out.push_back(w_out);
        out.push_back(ln1_gain);
        out.push_back(ln1_bias);
        out.push_back(ff_w1);
        out.push_back(ff_b1);
        out.push_back(ff_w2);
        out.push_back(ff_b2);
        out.push_back(ln2_gain);
        out.push_back(ln2_bias);
    }
};

} // namespace afa
