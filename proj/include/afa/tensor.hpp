#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "afa/errors.hpp"

namespace afa {

/// Dense fp64 matrix with an optional adjoint buffer. Scalars are 1x1,
/// vectors are 1xN. Copying a Tensor copies the handle, not the storage.
struct TensorImpl {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless this tensor participates in a recorded graph
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl>();
        impl->rows = rows;
        impl->cols = cols;
        impl->data.assign(rows * cols, 0.0);
        impl->requires_grad = requires_grad;
        if (requires_grad) impl->grad.assign(rows * cols, 0.0);
        return Tensor(std::move(impl));
    }

    static Tensor from(std::vector<double> values, std::size_t rows, std::size_t cols,
                       bool requires_grad = false) {
        if (values.size() != rows * cols) {
            throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                             " values for a " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " tensor");
        }
        auto impl = std::make_shared<TensorImpl>();
        impl->rows = rows;
        impl->cols = cols;
        impl->data = std::move(values);
        impl->requires_grad = requires_grad;
        if (requires_grad) impl->grad.assign(rows * cols, 0.0);
        return Tensor(std::move(impl));
    }

    static Tensor scalar_of(double v) { return from({v}, 1, 1); }

    bool defined() const { return impl_ != nullptr; }
    std::size_t rows() const { return impl_->rows; }
    std::size_t cols() const { return impl_->cols; }
    std::size_t numel() const { return impl_->data.size(); }
    bool requires_grad() const { return impl_->requires_grad; }
    bool has_grad_buffer() const { return defined() && !impl_->grad.empty(); }

    const std::vector<double>& values() const { return impl_->data; }
    std::vector<double>& mutable_values() { return impl_->data; }
    const std::vector<double>& grad() const { return impl_->grad; }
    std::vector<double>& mutable_grad() { return impl_->grad; }

    double at(std::size_t r, std::size_t c) const { return impl_->data[r * impl_->cols + c]; }
    double& at(std::size_t r, std::size_t c) { return impl_->data[r * impl_->cols + c]; }

    double scalar() const {
        if (numel() != 1) {
            throw ContractError("Tensor::scalar: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
        }
        return impl_->data[0];
    }

    double grad_at(std::size_t r, std::size_t c) const { return impl_->grad[r * impl_->cols + c]; }

    void ensure_grad_buffer() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    }

    void zero_grad() {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    bool all_finite() const {
        for (double v : impl_->data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    std::string shape_str() const {
        return std::to_string(rows()) + "x" + std::to_string(cols());
    }

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
};

/// Record of executed primitive operations. backward() replays the adjoints
/// in exact reverse execution order; steps whose output adjoint is all zero
/// are skipped, which both saves time and keeps unused subgraphs from
/// perturbing shared gradient accumulators.
class Tape {
public:
    struct Step {
        std::shared_ptr<TensorImpl> out;
        std::function<void()> pull;
    };

    void record(std::shared_ptr<TensorImpl> out, std::function<void()> pull) {
        steps_.push_back(Step{std::move(out), std::move(pull)});
    }

    void backward(const Tensor& loss) {
        if (!loss.defined() || loss.numel() != 1) {
            throw ContractError("Tape::backward: loss must be a defined scalar tensor");
        }
        if (!loss.has_grad_buffer()) {
            throw ContractError("Tape::backward: loss is not connected to this tape");
        }
        loss.impl()->grad[0] += 1.0;
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            const auto& g = it->out->grad;
            if (g.empty()) continue;
            bool all_zero = true;
            for (double v : g) {
                if (v != 0.0) {
                    all_zero = false;
                    break;
                }
            }
            if (all_zero) continue;
            it->pull();
        }
    }

    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    std::vector<Step> steps_;
};

inline Tape*& active_tape() {
    thread_local Tape* current = nullptr;
    return current;
}

/// RAII scope that makes `tape` the recording target for ops on this thread.
struct TapeScope {
    explicit TapeScope(Tape& tape) : previous(active_tape()) { active_tape() = &tape; }
    ~TapeScope() { active_tape() = previous; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
    Tape* previous;
};

} // namespace afa
