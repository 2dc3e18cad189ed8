// SPDX-License-Identifier: Apache-2.0
#include "augal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "augal/errors.hpp"

namespace augal {

namespace {

thread_local int g_no_grad_depth = 0;

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

NodePtr make_node(std::vector<std::size_t> shape) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data.assign(shape_product(n->shape), 0.0);
    return n;
}

bool tape_active(std::initializer_list<const Tensor*> inputs) {
    if (!NoGradGuard::grad_enabled()) return false;
    for (const Tensor* t : inputs)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

void record(const NodePtr& out, const char* op_name,
            std::vector<NodePtr> parents, std::function<void(TensorNode&)> fn) {
    out->requires_grad = true;
    out->op_name = op_name;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

// Rows/cols interpretation for softmax-family ops: (M,C) or a single (C,).
std::pair<std::size_t, std::size_t> row_view(const Tensor& x, const char* op) {
    if (x.rank() == 2) return {x.shape()[0], x.shape()[1]};
    if (x.rank() == 1) return {1, x.shape()[0]};
    throw ConfigError(std::string(op) + ": expected rank 1 or 2, got shape " +
                      shape_str(x.shape()));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ConfigError(std::string(op) + ": shape mismatch " +
                          shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool NoGradGuard::grad_enabled() { return g_no_grad_depth == 0; }

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = make_node(std::move(shape));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    auto n = make_node(std::move(shape));
    std::fill(n->data.begin(), n->data.end(), value);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    if (shape_product(shape) != data.size())
        throw ConfigError("from_data: shape " + shape_str(shape) + " needs " +
                          std::to_string(shape_product(shape)) + " values, got " +
                          std::to_string(data.size()));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (!node_ || node_->data.size() != 1)
        throw UsageError("item: tensor is not a scalar");
    return node_->data[0];
}

// ---------------------------------------------------------------------------
// elementwise and structural ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] + bv[i];
    if (tape_active({&a, &b})) {
        auto an = a.node(), bn = b.node();
        record(out, "add", {an, bn}, [an, bn](TensorNode& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bn->grad[i] += self.grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = make_node(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] - bv[i];
    if (tape_active({&a, &b})) {
        auto an = a.node(), bn = b.node();
        record(out, "sub", {an, bn}, [an, bn](TensorNode& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bn->grad[i] -= self.grad[i];
            }
        });
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = make_node(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] * bv[i];
    if (tape_active({&a, &b})) {
        auto an = a.node(), bn = b.node();
        record(out, "mul", {an, bn}, [an, bn](TensorNode& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    an->grad[i] += self.grad[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bn->grad[i] += self.grad[i] * an->data[i];
            }
        });
    }
    return Tensor(out);
}

Tensor scale(const Tensor& x, double c) {
    auto out = make_node(x.shape());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < xv.size(); ++i) out->data[i] = c * xv[i];
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "scale", {xn}, [xn, c](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                xn->grad[i] += c * self.grad[i];
        });
    }
    return Tensor(out);
}

Tensor relu(const Tensor& x) {
    auto out = make_node(x.shape());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < xv.size(); ++i)
        out->data[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "relu", {xn}, [xn](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (xn->data[i] > 0.0) xn->grad[i] += self.grad[i];
        });
    }
    return Tensor(out);
}

Tensor log(const Tensor& x) {
    auto out = make_node(x.shape());
    const auto& xv = x.data();
    for (std::size_t i = 0; i < xv.size(); ++i) out->data[i] = std::log(xv[i]);
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "log", {xn}, [xn](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                xn->grad[i] += self.grad[i] / xn->data[i];
        });
    }
    return Tensor(out);
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_product(shape) != x.size())
        throw ConfigError("reshape: cannot view " + shape_str(x.shape()) +
                          " as " + shape_str(shape));
    auto out = std::make_shared<TensorNode>();
    out->shape = std::move(shape);
    out->data = x.data();
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "reshape", {xn}, [xn](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                xn->grad[i] += self.grad[i];
        });
    }
    return Tensor(out);
}

Tensor sum(const Tensor& x) {
    auto out = make_node({1});
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out->data[0] = acc;
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "sum", {xn}, [xn](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const double g = self.grad[0];
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
        });
    }
    return Tensor(out);
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    const auto [rows, cols] = row_view(x, "add_row_bias");
    if (bias.rank() != 1 || bias.shape()[0] != cols)
        throw ConfigError("add_row_bias: shape mismatch " + shape_str(x.shape()) +
                          " vs " + shape_str(bias.shape()));
    auto out = make_node(x.shape());
    const auto& xv = x.data();
    const auto& bv = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out->data[r * cols + c] = xv[r * cols + c] + bv[c];
    if (tape_active({&x, &bias})) {
        auto xn = x.node(), bn = bias.node();
        record(out, "add_row_bias", {xn, bn},
               [xn, bn, rows = rows, cols = cols](TensorNode& self) {
                   if (xn->requires_grad) {
                       xn->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                           xn->grad[i] += self.grad[i];
                   }
                   if (bn->requires_grad) {
                       bn->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c)
                               bn->grad[c] += self.grad[r * cols + c];
                   }
               });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw ConfigError("matmul: shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    auto out = make_node({m, n});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* op = out->data.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = ap[i * k + kk];
            const double* brow = bp + kk * n;
            double* orow = op + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    if (tape_active({&a, &b})) {
        auto an = a.node(), bn = b.node();
        record(out, "matmul", {an, bn}, [an, bn, m, k, n](TensorNode& self) {
            const double* g = self.grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                double* da = an->grad.data();
                const double* bp2 = bn->data.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* grow = g + i * n;
                        const double* brow = bp2 + kk * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        da[i * k + kk] += acc;
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                double* db = bn->grad.data();
                const double* ap2 = an->data.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double av = ap2[i * k + kk];
                        const double* grow = g + i * n;
                        double* dbrow = db + kk * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
    std::size_t m, cin, h, w, cout, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, const Tensor& bias,
                   std::size_t stride, std::size_t pad) {
    if (x.rank() != 4 || wt.rank() != 4 || x.shape()[1] != wt.shape()[1])
        throw ConfigError("conv2d: shape mismatch " + shape_str(x.shape()) +
                          " vs kernel " + shape_str(wt.shape()));
    if (stride == 0) throw ConfigError("conv2d: stride must be positive");
    ConvDims d{};
    d.m = x.shape()[0];
    d.cin = x.shape()[1];
    d.h = x.shape()[2];
    d.w = x.shape()[3];
    d.cout = wt.shape()[0];
    d.kh = wt.shape()[2];
    d.kw = wt.shape()[3];
    d.stride = stride;
    d.pad = pad;
    if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
        throw ConfigError("conv2d: kernel " + shape_str(wt.shape()) +
                          " larger than padded input " + shape_str(x.shape()));
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != d.cout))
        throw ConfigError("conv2d: bias shape " + shape_str(bias.shape()) +
                          " vs kernel " + shape_str(wt.shape()));
    return d;
}

// Valid output-column range for a given kernel column: ow such that
// 0 <= ow*stride - pad + kc < W.
inline void ow_range(std::size_t kc, const ConvDims& d, std::size_t& lo,
                     std::size_t& hi_excl) {
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(d.pad);
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(d.stride);
    std::ptrdiff_t lo_s = p - static_cast<std::ptrdiff_t>(kc);
    lo = lo_s <= 0 ? 0 : static_cast<std::size_t>((lo_s + s - 1) / s);
    std::ptrdiff_t hi_s =
        (static_cast<std::ptrdiff_t>(d.w) - 1 + p - static_cast<std::ptrdiff_t>(kc)) / s;
    hi_excl = hi_s < 0 ? 0 : std::min<std::size_t>(static_cast<std::size_t>(hi_s) + 1, d.ow);
    if (lo > hi_excl) lo = hi_excl;
}

void conv_forward(const ConvDims& d, const double* x, const double* w,
                  const double* bias, double* out) {
    const std::size_t in_img = d.cin * d.h * d.w;
    const std::size_t out_img = d.cout * d.oh * d.ow;
    for (std::size_t m = 0; m < d.m; ++m) {
        const double* xm = x + m * in_img;
        double* om = out + m * out_img;
        for (std::size_t co = 0; co < d.cout; ++co) {
            double* oc = om + co * d.oh * d.ow;
            if (bias) {
                const double b = bias[co];
                for (std::size_t i = 0; i < d.oh * d.ow; ++i) oc[i] = b;
            }
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const double* xc = xm + ci * d.h * d.w;
                const double* wc = w + (co * d.cin + ci) * d.kh * d.kw;
                for (std::size_t kr = 0; kr < d.kh; ++kr)
                    for (std::size_t kc = 0; kc < d.kw; ++kc) {
                        const double wv = wc[kr * d.kw + kc];
                        std::size_t lo, hi;
                        ow_range(kc, d, lo, hi);
                        const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kc) -
                                                    static_cast<std::ptrdiff_t>(d.pad);
                        for (std::size_t oh = 0; oh < d.oh; ++oh) {
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * d.stride + kr) -
                                static_cast<std::ptrdiff_t>(d.pad);
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                            const double* xrow = xc + ih * static_cast<std::ptrdiff_t>(d.w);
                            double* orow = oc + oh * d.ow;
                            if (d.stride == 1) {
                                for (std::size_t ow = lo; ow < hi; ++ow)
                                    orow[ow] += wv * xrow[static_cast<std::ptrdiff_t>(ow) + coff];
                            } else {
                                for (std::size_t ow = lo; ow < hi; ++ow)
                                    orow[ow] += wv * xrow[static_cast<std::ptrdiff_t>(ow * d.stride) + coff];
                            }
                        }
                    }
            }
        }
    }
}

void conv_backward(const ConvDims& d, const TensorNode& self, TensorNode* xn,
                   TensorNode* wn, TensorNode* bn, const double* x,
                   const double* w) {
    const double* g = self.grad.data();
    const std::size_t in_img = d.cin * d.h * d.w;
    const std::size_t out_img = d.cout * d.oh * d.ow;
    if (bn) {
        double* db = bn->grad.data();
        for (std::size_t m = 0; m < d.m; ++m)
            for (std::size_t co = 0; co < d.cout; ++co) {
                const double* gc = g + m * out_img + co * d.oh * d.ow;
                double acc = 0.0;
                for (std::size_t i = 0; i < d.oh * d.ow; ++i) acc += gc[i];
                db[co] += acc;
            }
    }
    for (std::size_t m = 0; m < d.m; ++m) {
        const double* xm = x + m * in_img;
        double* dxm = xn ? xn->grad.data() + m * in_img : nullptr;
        for (std::size_t co = 0; co < d.cout; ++co) {
            const double* gc = g + m * out_img + co * d.oh * d.ow;
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const double* xc = xm + ci * d.h * d.w;
                double* dxc = dxm ? dxm + ci * d.h * d.w : nullptr;
                const std::size_t wbase = (co * d.cin + ci) * d.kh * d.kw;
                for (std::size_t kr = 0; kr < d.kh; ++kr)
                    for (std::size_t kc = 0; kc < d.kw; ++kc) {
                        std::size_t lo, hi;
                        ow_range(kc, d, lo, hi);
                        const double wv = w[wbase + kr * d.kw + kc];
                        const std::ptrdiff_t coff = static_cast<std::ptrdiff_t>(kc) -
                                                    static_cast<std::ptrdiff_t>(d.pad);
                        double wacc = 0.0;
                        for (std::size_t oh = 0; oh < d.oh; ++oh) {
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * d.stride + kr) -
                                static_cast<std::ptrdiff_t>(d.pad);
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                            const double* grow = gc + oh * d.ow;
                            const double* xrow = xc + ih * static_cast<std::ptrdiff_t>(d.w);
                            double* dxrow =
                                dxc ? dxc + ih * static_cast<std::ptrdiff_t>(d.w) : nullptr;
                            if (d.stride == 1) {
                                for (std::size_t ow = lo; ow < hi; ++ow)
                                    wacc += grow[ow] * xrow[static_cast<std::ptrdiff_t>(ow) + coff];
                                if (dxrow) {
                                    for (std::size_t ow = lo; ow < hi; ++ow)
                                        dxrow[static_cast<std::ptrdiff_t>(ow) + coff] += wv * grow[ow];
                                }
                            } else {
                                for (std::size_t ow = lo; ow < hi; ++ow)
                                    wacc += grow[ow] *
                                            xrow[static_cast<std::ptrdiff_t>(ow * d.stride) + coff];
                                if (dxrow) {
                                    for (std::size_t ow = lo; ow < hi; ++ow)
                                        dxrow[static_cast<std::ptrdiff_t>(ow * d.stride) + coff] +=
                                            wv * grow[ow];
                                }
                            }
                        }
                        if (wn) wn->grad[wbase + kr * d.kw + kc] += wacc;
                    }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
    const ConvDims d = conv_dims(x, w, bias, stride, padding);
    auto out = make_node({d.m, d.cout, d.oh, d.ow});
    conv_forward(d, x.data().data(), w.data().data(),
                 bias.defined() ? bias.data().data() : nullptr, out->data.data());
    const bool active = bias.defined() ? tape_active({&x, &w, &bias})
                                       : tape_active({&x, &w});
    if (active) {
        auto xn = x.node(), wn = w.node();
        auto bn = bias.defined() ? bias.node() : nullptr;
        std::vector<NodePtr> parents{xn, wn};
        if (bn) parents.push_back(bn);
        record(out, "conv2d", std::move(parents), [xn, wn, bn, d](TensorNode& self) {
            TensorNode* xg = nullptr;
            TensorNode* wg = nullptr;
            TensorNode* bg = nullptr;
            if (xn->requires_grad) { xn->ensure_grad(); xg = xn.get(); }
            if (wn->requires_grad) { wn->ensure_grad(); wg = wn.get(); }
            if (bn && bn->requires_grad) { bn->ensure_grad(); bg = bn.get(); }
            conv_backward(d, self, xg, wg, bg, xn->data.data(), wn->data.data());
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// max_pool2d
// ---------------------------------------------------------------------------

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
    if (x.rank() != 4)
        throw ConfigError("max_pool2d: expected (M,C,H,W), got " + shape_str(x.shape()));
    if (kernel == 0 || stride == 0)
        throw ConfigError("max_pool2d: kernel and stride must be positive");
    const std::size_t m = x.shape()[0], c = x.shape()[1], h = x.shape()[2],
                      w = x.shape()[3];
    if (kernel > h || kernel > w)
        throw ConfigError("max_pool2d: kernel " + std::to_string(kernel) +
                          " larger than input " + shape_str(x.shape()));
    const std::size_t oh = (h - kernel) / stride + 1;
    const std::size_t ow = (w - kernel) / stride + 1;
    auto out = make_node({m, c, oh, ow});
    // argmax memo for the backward route; ties take the first scanned element
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(out->data.size());
    const double* xp = x.data().data();
    double* op = out->data.data();
    std::size_t oi = 0;
    for (std::size_t mc = 0; mc < m * c; ++mc) {
        const double* plane = xp + mc * h * w;
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t col = 0; col < ow; ++col, ++oi) {
                double best = plane[r * stride * w + col * stride];
                std::uint32_t best_idx =
                    static_cast<std::uint32_t>(r * stride * w + col * stride);
                for (std::size_t kr = 0; kr < kernel; ++kr)
                    for (std::size_t kc = 0; kc < kernel; ++kc) {
                        const std::size_t idx = (r * stride + kr) * w + col * stride + kc;
                        if (plane[idx] > best) {
                            best = plane[idx];
                            best_idx = static_cast<std::uint32_t>(idx);
                        }
                    }
                op[oi] = best;
                (*argmax)[oi] = best_idx;
            }
    }
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "max_pool2d", {xn}, [xn, argmax, m, c, h, w](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const std::size_t per_plane = self.grad.size() / (m * c);
            for (std::size_t mc = 0; mc < m * c; ++mc) {
                double* dplane = xn->grad.data() + mc * h * w;
                const double* gp = self.grad.data() + mc * per_plane;
                const std::uint32_t* am = argmax->data() + mc * per_plane;
                for (std::size_t i = 0; i < per_plane; ++i) dplane[am[i]] += gp[i];
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x) {
    const auto [rows, cols] = row_view(x, "softmax");
    auto out = make_node(x.shape());
    const double* xp = x.data().data();
    double* op = out->data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xp + r * cols;
        double* orow = op + r * cols;
        double mx = xr[0];
        for (std::size_t cc = 1; cc < cols; ++cc) mx = std::max(mx, xr[cc]);
        double z = 0.0;
        for (std::size_t cc = 0; cc < cols; ++cc) {
            orow[cc] = std::exp(xr[cc] - mx);
            z += orow[cc];
        }
        for (std::size_t cc = 0; cc < cols; ++cc) orow[cc] /= z;
    }
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "softmax", {xn}, [xn, rows = rows, cols = cols](TensorNode& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* p = self.data.data() + r * cols;
                const double* g = self.grad.data() + r * cols;
                double dot = 0.0;
                for (std::size_t cc = 0; cc < cols; ++cc) dot += g[cc] * p[cc];
                double* dx = xn->grad.data() + r * cols;
                for (std::size_t cc = 0; cc < cols; ++cc)
                    dx[cc] += p[cc] * (g[cc] - dot);
            }
        });
    }
    return Tensor(out);
}

Tensor log_softmax(const Tensor& x) {
    const auto [rows, cols] = row_view(x, "log_softmax");
    auto out = make_node(x.shape());
    const double* xp = x.data().data();
    double* op = out->data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xp + r * cols;
        double* orow = op + r * cols;
        double mx = xr[0];
        for (std::size_t cc = 1; cc < cols; ++cc) mx = std::max(mx, xr[cc]);
        double z = 0.0;
        for (std::size_t cc = 0; cc < cols; ++cc) z += std::exp(xr[cc] - mx);
        const double lz = std::log(z) + mx;
        for (std::size_t cc = 0; cc < cols; ++cc) orow[cc] = xr[cc] - lz;
    }
    if (tape_active({&x})) {
        auto xn = x.node();
        record(out, "log_softmax", {xn},
               [xn, rows = rows, cols = cols](TensorNode& self) {
                   if (!xn->requires_grad) return;
                   xn->ensure_grad();
                   for (std::size_t r = 0; r < rows; ++r) {
                       const double* lsm = self.data.data() + r * cols;
                       const double* g = self.grad.data() + r * cols;
                       double gsum = 0.0;
                       for (std::size_t cc = 0; cc < cols; ++cc) gsum += g[cc];
                       double* dx = xn->grad.data() + r * cols;
                       for (std::size_t cc = 0; cc < cols; ++cc)
                           dx[cc] += g[cc] - std::exp(lsm[cc]) * gsum;
                   }
               });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward: loss must be a scalar tensor");
    auto root = loss.node();
    if (!root->backward_fn && root->parents.empty())
        throw UsageError("backward: loss is not on an active tape");

    // Iterative post-order DFS for a topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            TensorNode* p = node->parents[next_child++].get();
            if (p->backward_fn && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (!node->backward_fn) continue;
        node->backward_fn(*node);
        for (const auto& parent : node->parents) {
            for (double gv : parent->grad)
                if (!std::isfinite(gv))
                    throw NumericError(std::string("backward: non-finite gradient "
                                                   "produced by op ") +
                                       (node->op_name ? node->op_name : "?"));
        }
    }

    // Consume the tape: break the graph so buffers free and a second backward
    // on the same loss reports a usage error.
    for (TensorNode* node : order) {
        node->parents.clear();
        node->backward_fn = nullptr;
    }
}

}  // namespace augal
