// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace augal {

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until populated
    bool requires_grad = false;

    // Tape edges. Cleared when the tape is consumed by backward().
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    const char* op_name = nullptr;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

/// Disables tape recording for its lifetime (thread-local). Used for frozen
/// model inference during scoring and evaluation.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool grad_enabled();
};

/// Dense row-major f64 tensor. Value-semantic handle to a shared node so the
/// same buffer can appear as a leaf in many tapes (model parameters).
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    const std::vector<double>& grad() const { return node_->grad; }
    void clear_grad() { node_->grad.clear(); }

    /// Value of a single-element tensor.
    double item() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::TensorNode> node_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Forward ops. Each records itself on the tape when grad is enabled and any
// input requires grad.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride, std::size_t padding);
Tensor relu(const Tensor& x);
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor softmax(const Tensor& x);      // rows of (M,C), or a single (C,) vector
Tensor log_softmax(const Tensor& x);  // numerically stable fused form
Tensor log(const Tensor& x);
Tensor sum(const Tensor& x);  // scalar
Tensor add_row_bias(const Tensor& x, const Tensor& bias);  // (M,C) + (C,)

/// Reverse pass from a scalar loss on an active tape. Populates grads of all
/// reachable tensors that require grad, then consumes the tape.
void backward(const Tensor& loss);

}  // namespace augal
