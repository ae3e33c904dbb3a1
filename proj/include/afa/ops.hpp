#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "afa/errors.hpp"
#include "afa/rng.hpp"
#include "afa/tensor.hpp"

namespace afa::ops {

/// Floor applied inside every log-of-probability expression. Bounds
/// -log(p) at about 27.63 when a probability saturates.
inline constexpr double kLogFloor = 1e-12;

namespace detail {

inline bool recording(std::initializer_list<const Tensor*> inputs) {
    if (active_tape() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->has_grad_buffer()) return true;
    }
    return false;
}

inline Tensor make_output(std::size_t rows, std::size_t cols, bool tracked) {
    Tensor out = Tensor::zeros(rows, cols);
    if (tracked) out.ensure_grad_buffer();
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner extents disagree, " + a.shape_str() + " x " +
                         b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const bool tracked = detail::recording({&a, &b});
    Tensor out = detail::make_output(m, n, tracked);

    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = out.mutable_values().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }

    if (tracked) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, bi, oi, m, k, n] {
            const auto& g = oi->grad;
            if (!ai->grad.empty()) {
                // dA += G * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            acc += g[i * n + j] * bi->data[kk * n + j];
                        }
                        ai->grad[i * k + kk] += acc;
                    }
                }
            }
            if (!bi->grad.empty()) {
                // dB += A^T * G
                for (std::size_t kk = 0; kk < k; ++kk) {
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aik = ai->data[i * k + kk];
                        if (aik == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) {
                            bi->grad[kk * n + j] += aik * g[i * n + j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(n, m, tracked);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, m, n] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    ai->grad[i * n + j] += oi->grad[j * m + i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    const bool tracked = detail::recording({&a, &b});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = a.values()[i] + b.values()[i];
    }
    if (tracked) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (!ai->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            }
            if (!bi->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
            }
        });
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    const bool tracked = detail::recording({&a, &b});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = a.values()[i] - b.values()[i];
    }
    if (tracked) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (!ai->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
            }
            if (!bi->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
            }
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    const bool tracked = detail::recording({&a, &b});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = a.values()[i] * b.values()[i];
    }
    if (tracked) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, bi, oi] {
            const auto& g = oi->grad;
            if (!ai->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->data[i];
            }
            if (!bi->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->data[i];
            }
        });
    }
    return out;
}

/// alpha * x + beta, elementwise.
inline Tensor affine(const Tensor& a, double alpha, double beta = 0.0) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = alpha * a.values()[i] + beta;
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, alpha] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += alpha * oi->grad[i];
        });
    }
    return out;
}

/// X[m x n] + b broadcast over rows; b is 1 x n.
inline Tensor add_row_broadcast(const Tensor& x, const Tensor& b) {
    if (b.rows() != 1 || b.cols() != x.cols()) {
        throw ShapeError("add_row_broadcast: bias " + b.shape_str() + " does not match " +
                         x.shape_str());
    }
    const std::size_t m = x.rows(), n = x.cols();
    const bool tracked = detail::recording({&x, &b});
    Tensor out = detail::make_output(m, n, tracked);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) + b.values()[j];
    }
    if (tracked) {
        auto xi = x.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(oi, [xi, bi, oi, m, n] {
            const auto& g = oi->grad;
            if (!xi->grad.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
            }
            if (!bi->grad.empty()) {
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i) acc += g[i * n + j];
                    bi->grad[j] += acc;
                }
            }
        });
    }
    return out;
}

inline Tensor relu(const Tensor& a) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                if (ai->data[i] > 0.0) ai->grad[i] += oi->grad[i];
            }
        });
    }
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double x = a.values()[i];
        out.mutable_values()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                           : std::exp(x) / (1.0 + std::exp(x));
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                const double y = oi->data[i];
                ai->grad[i] += oi->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

/// min(max(x, lo), hi); gradient passes only through the interior.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = std::min(std::max(a.values()[i], lo), hi);
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, lo, hi] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                const double x = ai->data[i];
                if (x > lo && x < hi) ai->grad[i] += oi->grad[i];
            }
        });
    }
    return out;
}

/// log(max(x, 1e-12)); gradient is 1/x above the floor, 0 below it.
inline Tensor log_clamped(const Tensor& a) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.mutable_values()[i] = std::log(std::max(a.values()[i], kLogFloor));
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                const double x = ai->data[i];
                if (x > kLogFloor) ai->grad[i] += oi->grad[i] / x;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions and reshaping
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(1, 1, tracked);
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.mutable_values()[0] = acc;
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi] {
            if (ai->grad.empty()) return;
            const double g = oi->grad[0];
            for (double& gv : ai->grad) gv += g;
        });
    }
    return out;
}

inline Tensor gather_row(const Tensor& a, std::size_t row) {
    if (row >= a.rows()) {
        throw IndexError("gather_row: row " + std::to_string(row) + " out of " +
                         a.shape_str());
    }
    const std::size_t n = a.cols();
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(1, n, tracked);
    for (std::size_t j = 0; j < n; ++j) out.mutable_values()[j] = a.at(row, j);
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, row, n] {
            if (ai->grad.empty()) return;
            for (std::size_t j = 0; j < n; ++j) ai->grad[row * n + j] += oi->grad[j];
        });
    }
    return out;
}

inline Tensor gather_elem(const Tensor& a, std::size_t row, std::size_t col) {
    if (row >= a.rows() || col >= a.cols()) {
        throw IndexError("gather_elem: (" + std::to_string(row) + "," + std::to_string(col) +
                         ") out of " + a.shape_str());
    }
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(1, 1, tracked);
    out.mutable_values()[0] = a.at(row, col);
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        const std::size_t flat = row * a.cols() + col;
        active_tape()->record(oi, [ai, oi, flat] {
            if (ai->grad.empty()) return;
            ai->grad[flat] += oi->grad[0];
        });
    }
    return out;
}

/// Embedding lookup: rows of table at ids. Gradient scatter-adds into the table.
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    const std::size_t n = ids.size(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
            throw IndexError("gather_rows: id " + std::to_string(id) + " out of vocabulary of " +
                             std::to_string(table.rows()));
        }
    }
    const bool tracked = detail::recording({&table});
    Tensor out = detail::make_output(n, d, tracked);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = table.values().data() + static_cast<std::size_t>(ids[i]) * d;
        std::copy(src, src + d, out.mutable_values().data() + i * d);
    }
    if (tracked) {
        auto ti = table.impl(), oi = out.impl();
        active_tape()->record(oi, [ti, oi, ids, n, d] {
            if (ti->grad.empty()) return;
            for (std::size_t i = 0; i < n; ++i) {
                double* dst = ti->grad.data() + static_cast<std::size_t>(ids[i]) * d;
                const double* g = oi->grad.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
            }
        });
    }
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t m = parts.front().rows();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.rows() != m) {
            throw ShapeError("concat_cols: row mismatch " + p.shape_str() + " vs " +
                             parts.front().shape_str());
        }
        total += p.cols();
    }
    bool tracked = false;
    if (active_tape() != nullptr) {
        for (const Tensor& p : parts) tracked = tracked || p.has_grad_buffer();
    }
    Tensor out = detail::make_output(m, total, tracked);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(p.values().data() + i * p.cols(), p.values().data() + (i + 1) * p.cols(),
                      out.mutable_values().data() + i * total + offset);
        }
        offset += p.cols();
    }
    if (tracked) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const Tensor& p : parts) impls.push_back(p.impl());
        auto oi = out.impl();
        active_tape()->record(oi, [impls, oi, m, total] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                const std::size_t w = pi->cols;
                if (!pi->grad.empty()) {
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < w; ++j) {
                            pi->grad[i * w + j] += oi->grad[i * total + off + j];
                        }
                    }
                }
                off += w;
            }
        });
    }
    return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t n = parts.front().cols();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.cols() != n) {
            throw ShapeError("concat_rows: column mismatch " + p.shape_str() + " vs " +
                             parts.front().shape_str());
        }
        total += p.rows();
    }
    bool tracked = false;
    if (active_tape() != nullptr) {
        for (const Tensor& p : parts) tracked = tracked || p.has_grad_buffer();
    }
    Tensor out = detail::make_output(total, n, tracked);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.values().begin(), p.values().end(),
                  out.mutable_values().begin() + static_cast<std::ptrdiff_t>(offset * n));
        offset += p.rows();
    }
    if (tracked) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const Tensor& p : parts) impls.push_back(p.impl());
        auto oi = out.impl();
        active_tape()->record(oi, [impls, oi, n] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                if (!pi->grad.empty()) {
                    for (std::size_t i = 0; i < pi->grad.size(); ++i) {
                        pi->grad[i] += oi->grad[off * n + i];
                    }
                }
                off += pi->rows;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// normalization and losses
// ---------------------------------------------------------------------------

/// Row-wise softmax with row-max stabilization. The denominator is
/// accumulated in ascending value order, which makes each row's output
/// invariant under a permutation of its entries (exact, not approximate).
inline Tensor softmax_rows(const Tensor& a) {
    if (!a.all_finite()) throw ContractError("softmax_rows: non-finite input");
    const std::size_t m = a.rows(), n = a.cols();
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(m, n, tracked);
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = a.values().data() + i * n;
        double* y = out.mutable_values().data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        for (std::size_t j = 0; j < n; ++j) y[j] = std::exp(row[j] - mx);
        std::copy(y, y + n, sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        double denom = 0.0;
        for (double v : sorted) denom += v;
        for (std::size_t j = 0; j < n; ++j) y[j] /= denom;
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, m, n] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = oi->data.data() + i * n;
                const double* g = oi->grad.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                for (std::size_t j = 0; j < n; ++j) {
                    ai->grad[i * n + j] += y[j] * (g[j] - dot);
                }
            }
        });
    }
    return out;
}

/// Row-wise layer normalization with learned gain and bias (both 1 x n).
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
        throw ShapeError("layer_norm: gain " + gain.shape_str() + " / bias " + bias.shape_str() +
                         " do not match input " + x.shape_str());
    }
    const bool tracked = detail::recording({&x, &gain, &bias});
    Tensor out = detail::make_output(m, n, tracked);
    // normalized rows are kept for the backward pass
    auto xhat = std::make_shared<std::vector<double>>(m * n);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.values().data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (row[j] - mean) * inv;
            (*xhat)[i * n + j] = h;
            out.at(i, j) = h * gain.values()[j] + bias.values()[j];
        }
    }
    if (tracked) {
        auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out.impl();
        active_tape()->record(oi, [xi, gi, bi, oi, xhat, inv_std, m, n] {
            for (std::size_t i = 0; i < m; ++i) {
                const double* g = oi->grad.data() + i * n;
                const double* h = xhat->data() + i * n;
                if (!bi->grad.empty()) {
                    for (std::size_t j = 0; j < n; ++j) bi->grad[j] += g[j];
                }
                if (!gi->grad.empty()) {
                    for (std::size_t j = 0; j < n; ++j) gi->grad[j] += g[j] * h[j];
                }
                if (!xi->grad.empty()) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = g[j] * gi->data[j];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= static_cast<double>(n);
                    mean_dh_h /= static_cast<double>(n);
                    const double inv = (*inv_std)[i];
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = g[j] * gi->data[j];
                        xi->grad[i * n + j] += inv * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

/// Mean over the batch of -log softmax(logits)[label]. Rows whose true-class
/// probability falls below the log floor contribute the capped loss with a
/// zero gradient, so the gradient is defined everywhere.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t batch = logits.rows(), classes = logits.cols();
    if (labels.size() != batch) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         logits.shape_str() + " logits");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw IndexError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
    }
    const bool tracked = detail::recording({&logits});
    Tensor out = detail::make_output(1, 1, tracked);
    auto probs = std::make_shared<std::vector<double>>(batch * classes);
    auto capped = std::make_shared<std::vector<char>>(batch, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double* z = logits.values().data() + i * classes;
        double mx = z[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, z[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < classes; ++j) denom += std::exp(z[j] - mx);
        for (std::size_t j = 0; j < classes; ++j) {
            (*probs)[i * classes + j] = std::exp(z[j] - mx) / denom;
        }
        const double p_true = (*probs)[i * classes + static_cast<std::size_t>(labels[i])];
        if (p_true < kLogFloor) {
            (*capped)[i] = 1;
            total += -std::log(kLogFloor);
        } else {
            total += -std::log(p_true);
        }
    }
    out.mutable_values()[0] = total / static_cast<double>(batch);
    if (tracked) {
        auto li = logits.impl(), oi = out.impl();
        active_tape()->record(oi, [li, oi, probs, capped, labels, batch, classes] {
            if (li->grad.empty()) return;
            const double g = oi->grad[0] / static_cast<double>(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                if ((*capped)[i]) continue;
                for (std::size_t j = 0; j < classes; ++j) {
                    double d = (*probs)[i * classes + j];
                    if (j == static_cast<std::size_t>(labels[i])) d -= 1.0;
                    li->grad[i * classes + j] += g * d;
                }
            }
        });
    }
    return out;
}

/// Inverted dropout; identity when rate == 0. Active only when the caller is
/// in training mode (callers pass rng == nullptr otherwise).
inline Tensor dropout(const Tensor& a, double rate, RngStream* rng) {
    if (rng == nullptr || rate <= 0.0) return a;
    if (rate >= 1.0) throw ContractError("dropout: rate must be below 1");
    const bool tracked = detail::recording({&a});
    Tensor out = detail::make_output(a.rows(), a.cols(), tracked);
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(a.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        (*mask)[i] = rng->uniform01() < rate ? 0.0 : keep_scale;
        out.mutable_values()[i] = a.values()[i] * (*mask)[i];
    }
    if (tracked) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(oi, [ai, oi, mask] {
            if (ai->grad.empty()) return;
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                ai->grad[i] += oi->grad[i] * (*mask)[i];
            }
        });
    }
    return out;
}

} // namespace afa::ops
