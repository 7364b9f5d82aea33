#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fuselite/nn_ops.hpp"
#include "fuselite/tensor.hpp"

namespace fuselite::ad {

// Tape-based reverse-mode autodiff over TensorT values. Nodes are created
// in forward order, which is already a topological order, so backward is a
// single reverse sweep. Channel vectors ride along as (c,1,1) tensors and
// matrices as (1,rows,cols), matching the forward kernels' packing.

template <typename T>
struct NodeT {
    TensorT<T> value;
    TensorT<T> grad;  // same shape as value, zero until backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void(NodeT&)> backprop;  // scatters this->grad into parents
    const void* tape = nullptr;
};

template <typename T>
using NodePtrT = std::shared_ptr<NodeT<T>>;

template <typename T>
class TapeT {
public:
    using Node = NodeT<T>;
    using NodePtr = NodePtrT<T>;

    /// Records a value with no parents. Trainable parameters are leaves
    /// with requires_grad = true.
    NodePtr leaf(TensorT<T> v, bool requires_grad = false) {
        return make(std::move(v), {}, nullptr, requires_grad);
    }

    /// Escape hatch for fused ops (losses): caller supplies the forward
    /// value and the backward scatter.
    NodePtr custom(TensorT<T> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backprop) {
        return make(std::move(value), std::move(parents), std::move(backprop), false);
    }

    NodePtr conv2d(const NodePtr& x, const NodePtr& kernel, const NodePtr& bias, int c_out,
                   int c_in, int k, int padding) {
        check(x); check(kernel); check(bias);
        TensorT<T> value = detail::conv2d_direct(x->value, kernel->value, bias->value.data(),
                                                 c_out, c_in, k, padding);
        auto fn = [x, kernel, bias, c_out, c_in, k, padding](Node& n) {
            const TensorT<T>& g = n.grad;
            const int oh = g.height(), ow = g.width();
            if (bias->requires_grad) {
                for (int o = 0; o < c_out; ++o) {
                    T acc{};
                    const T* gp = g.channel(o);
                    for (int i = 0; i < oh * ow; ++i) acc += gp[i];
                    bias->grad.at(o, 0, 0) += acc;
                }
            }
            const TensorT<T> padded = pad2d(x->value, padding);
            if (kernel->requires_grad) {
                for (int o = 0; o < c_out; ++o)
                    for (int c = 0; c < c_in; ++c)
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) {
                                T acc{};
                                for (int y = 0; y < oh; ++y) {
                                    const T* row = &padded.at(c, y + i, j);
                                    const T* gp = &g.at(o, y, 0);
                                    for (int xx = 0; xx < ow; ++xx) acc += gp[xx] * row[xx];
                                }
                                kernel->grad.at(o * c_in + c, i, j) += acc;
                            }
            }
            if (x->requires_grad) {
                TensorT<T> dpad(padded.channels(), padded.height(), padded.width(), T{});
                for (int o = 0; o < c_out; ++o)
                    for (int c = 0; c < c_in; ++c)
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) {
                                const T w = kernel->value.at(o * c_in + c, i, j);
                                for (int y = 0; y < oh; ++y) {
                                    const T* gp = &g.at(o, y, 0);
                                    T* dp = &dpad.at(c, y + i, j);
                                    for (int xx = 0; xx < ow; ++xx) dp[xx] += w * gp[xx];
                                }
                            }
                for (int c = 0; c < x->value.channels(); ++c)
                    for (int y = 0; y < x->value.height(); ++y)
                        for (int xx = 0; xx < x->value.width(); ++xx)
                            x->grad.at(c, y, xx) += dpad.at(c, y + padding, xx + padding);
            }
        };
        return make(std::move(value), {x, kernel, bias}, std::move(fn), false);
    }

    NodePtr depthwise(const NodePtr& x, const NodePtr& kernel, int padding) {
        check(x); check(kernel);
        TensorT<T> value = depthwise_conv2d(x->value, kernel->value, padding);
        const int k = kernel->value.height();
        auto fn = [x, kernel, k, padding](Node& n) {
            const TensorT<T>& g = n.grad;
            const int oh = g.height(), ow = g.width();
            const TensorT<T> padded = pad2d(x->value, padding);
            if (kernel->requires_grad) {
                for (int c = 0; c < x->value.channels(); ++c)
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j) {
                            T acc{};
                            for (int y = 0; y < oh; ++y) {
                                const T* row = &padded.at(c, y + i, j);
                                const T* gp = &g.at(c, y, 0);
                                for (int xx = 0; xx < ow; ++xx) acc += gp[xx] * row[xx];
                            }
                            kernel->grad.at(c, i, j) += acc;
                        }
            }
            if (x->requires_grad) {
                TensorT<T> dpad(padded.channels(), padded.height(), padded.width(), T{});
                for (int c = 0; c < x->value.channels(); ++c)
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j) {
                            const T w = kernel->value.at(c, i, j);
                            for (int y = 0; y < oh; ++y) {
                                const T* gp = &g.at(c, y, 0);
                                T* dp = &dpad.at(c, y + i, j);
                                for (int xx = 0; xx < ow; ++xx) dp[xx] += w * gp[xx];
                            }
                        }
                for (int c = 0; c < x->value.channels(); ++c)
                    for (int y = 0; y < x->value.height(); ++y)
                        for (int xx = 0; xx < x->value.width(); ++xx)
                            x->grad.at(c, y, xx) += dpad.at(c, y + padding, xx + padding);
            }
        };
        return make(std::move(value), {x, kernel}, std::move(fn), false);
    }

    NodePtr pointwise(const NodePtr& x, const NodePtr& weight, const NodePtr& bias) {
        check(x); check(weight); check(bias);
        TensorT<T> value = pointwise_conv(x->value, weight->value, bias->value);
        auto fn = [x, weight, bias](Node& n) {
            const TensorT<T>& g = n.grad;
            const int c_out = weight->value.height();
            const int c_in = weight->value.width();
            const std::size_t plane =
                static_cast<std::size_t>(x->value.height()) * x->value.width();
            if (bias->requires_grad) {
                for (int o = 0; o < c_out; ++o) {
                    T acc{};
                    const T* gp = g.channel(o);
                    for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
                    bias->grad.at(o, 0, 0) += acc;
                }
            }
            if (weight->requires_grad) {
                for (int o = 0; o < c_out; ++o)
                    for (int c = 0; c < c_in; ++c) {
                        T acc{};
                        const T* gp = g.channel(o);
                        const T* xp = x->value.channel(c);
                        for (std::size_t i = 0; i < plane; ++i) acc += gp[i] * xp[i];
                        weight->grad.at(0, o, c) += acc;
                    }
            }
            if (x->requires_grad) {
                for (int c = 0; c < c_in; ++c) {
                    T* dp = x->grad.channel(c);
                    for (int o = 0; o < c_out; ++o) {
                        const T w = weight->value.at(0, o, c);
                        const T* gp = g.channel(o);
                        for (std::size_t i = 0; i < plane; ++i) dp[i] += w * gp[i];
                    }
                }
            }
        };
        return make(std::move(value), {x, weight, bias}, std::move(fn), false);
    }

    NodePtr activate(const NodePtr& x, Activation kind) {
        check(x);
        TensorT<T> value = activation(x->value, kind);
        auto fn = [x, kind](Node& n) {
            if (!x->requires_grad) return;
            const T* v = n.value.data();
            const T* xv = x->value.data();
            const T* g = n.grad.data();
            T* dx = x->grad.data();
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                T d{};
                switch (kind) {
                    case Activation::Sigmoid: d = v[i] * (T(1) - v[i]); break;
                    case Activation::Tanh: d = T(1) - v[i] * v[i]; break;
                    case Activation::Relu: d = xv[i] > T{} ? T(1) : T{}; break;
                    case Activation::LeakyRelu:
                        d = xv[i] > T{} ? T(1) : static_cast<T>(kLeakySlope);
                        break;
                }
                dx[i] += d * g[i];
            }
        };
        return make(std::move(value), {x}, std::move(fn), false);
    }

    NodePtr reduce_spatial_op(const NodePtr& x, Reduce mode) {
        check(x);
        const ChannelVectorT<T> r = reduce_spatial(x->value, mode);
        TensorT<T> value(x->value.channels(), 1, 1);
        for (int c = 0; c < x->value.channels(); ++c) value.at(c, 0, 0) = r[c];
        auto fn = [x, mode](Node& n) {
            if (!x->requires_grad) return;
            const std::size_t plane =
                static_cast<std::size_t>(x->value.height()) * x->value.width();
            for (int c = 0; c < x->value.channels(); ++c) {
                const T g = n.grad.at(c, 0, 0);
                T* dx = x->grad.channel(c);
                if (mode == Reduce::Mean) {
                    const T share = g / static_cast<T>(plane);
                    for (std::size_t i = 0; i < plane; ++i) dx[i] += share;
                } else {
                    const T* xv = x->value.channel(c);
                    std::size_t best = 0;  // first max in scan order
                    for (std::size_t i = 1; i < plane; ++i)
                        if (xv[i] > xv[best]) best = i;
                    dx[best] += g;
                }
            }
        };
        return make(std::move(value), {x}, std::move(fn), false);
    }

    NodePtr reduce_channels_op(const NodePtr& x, Reduce mode) {
        check(x);
        TensorT<T> value = reduce_channels(x->value, mode);
        auto fn = [x, mode](Node& n) {
            if (!x->requires_grad) return;
            const std::size_t plane =
                static_cast<std::size_t>(x->value.height()) * x->value.width();
            const T* g = n.grad.data();
            if (mode == Reduce::Mean) {
                const T inv = T(1) / static_cast<T>(x->value.channels());
                for (int c = 0; c < x->value.channels(); ++c) {
                    T* dx = x->grad.channel(c);
                    for (std::size_t i = 0; i < plane; ++i) dx[i] += inv * g[i];
                }
            } else {
                for (std::size_t i = 0; i < plane; ++i) {
                    int best = 0;  // first max across channels
                    for (int c = 1; c < x->value.channels(); ++c)
                        if (x->value.channel(c)[i] > x->value.channel(best)[i]) best = c;
                    x->grad.channel(best)[i] += g[i];
                }
            }
        };
        return make(std::move(value), {x}, std::move(fn), false);
    }

    NodePtr concat(const NodePtr& a, const NodePtr& b) {
        check(a); check(b);
        TensorT<T> value = concat_channels(a->value, b->value);
        auto fn = [a, b](Node& n) {
            const std::size_t na = a->value.size();
            if (a->requires_grad)
                for (std::size_t i = 0; i < na; ++i) a->grad.data()[i] += n.grad.data()[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < b->value.size(); ++i)
                    b->grad.data()[i] += n.grad.data()[na + i];
        };
        return make(std::move(value), {a, b}, std::move(fn), false);
    }

    /// Matrix (1,m,n) times vector (n,1,1) -> (m,1,1).
    NodePtr matvec(const NodePtr& m, const NodePtr& v) {
        check(m); check(v);
        const int rows = m->value.height(), cols = m->value.width();
        if (v->value.channels() != cols || v->value.height() != 1 || v->value.width() != 1)
            throw shape_error("matvec: vector length mismatch");
        TensorT<T> value(rows, 1, 1);
        for (int i = 0; i < rows; ++i) {
            double acc = 0.0;
            for (int j = 0; j < cols; ++j)
                acc += static_cast<double>(m->value.at(0, i, j)) * v->value.at(j, 0, 0);
            value.at(i, 0, 0) = static_cast<T>(acc);
        }
        auto fn = [m, v, rows, cols](Node& n) {
            if (m->requires_grad)
                for (int i = 0; i < rows; ++i) {
                    const T g = n.grad.at(i, 0, 0);
                    for (int j = 0; j < cols; ++j)
                        m->grad.at(0, i, j) += g * v->value.at(j, 0, 0);
                }
            if (v->requires_grad)
                for (int j = 0; j < cols; ++j) {
                    T acc{};
                    for (int i = 0; i < rows; ++i)
                        acc += m->value.at(0, i, j) * n.grad.at(i, 0, 0);
                    v->grad.at(j, 0, 0) += acc;
                }
        };
        return make(std::move(value), {m, v}, std::move(fn), false);
    }

    NodePtr add(const NodePtr& a, const NodePtr& b) {
        check(a); check(b);
        if (!a->value.same_shape(b->value)) throw shape_error("add: shape mismatch");
        TensorT<T> value = a->value;
        for (std::size_t i = 0; i < value.size(); ++i) value.data()[i] += b->value.data()[i];
        auto fn = [a, b](Node& n) {
            if (a->requires_grad)
                for (std::size_t i = 0; i < n.value.size(); ++i)
                    a->grad.data()[i] += n.grad.data()[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < n.value.size(); ++i)
                    b->grad.data()[i] += n.grad.data()[i];
        };
        return make(std::move(value), {a, b}, std::move(fn), false);
    }

    /// Elementwise a*x + b with scalar constants.
    NodePtr affine(const NodePtr& x, T a, T b) {
        check(x);
        TensorT<T> value = x->value;
        for (std::size_t i = 0; i < value.size(); ++i)
            value.data()[i] = a * value.data()[i] + b;
        auto fn = [x, a](Node& n) {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < n.value.size(); ++i)
                x->grad.data()[i] += a * n.grad.data()[i];
        };
        return make(std::move(value), {x}, std::move(fn), false);
    }

    /// Per-channel gains: s is (c,1,1).
    NodePtr scale_channels(const NodePtr& x, const NodePtr& s) {
        check(x); check(s);
        if (s->value.channels() != x->value.channels() || s->value.height() != 1 ||
            s->value.width() != 1)
            throw shape_error("scale_channels: gain must be (c,1,1)");
        const std::size_t plane = static_cast<std::size_t>(x->value.height()) * x->value.width();
        TensorT<T> value(x->value.channels(), x->value.height(), x->value.width());
        for (int c = 0; c < x->value.channels(); ++c) {
            const T g = s->value.at(c, 0, 0);
            const T* src = x->value.channel(c);
            T* dst = value.channel(c);
            for (std::size_t i = 0; i < plane; ++i) dst[i] = g * src[i];
        }
        auto fn = [x, s, plane](Node& n) {
            for (int c = 0; c < x->value.channels(); ++c) {
                const T* g = n.grad.channel(c);
                if (x->requires_grad) {
                    const T gain = s->value.at(c, 0, 0);
                    T* dx = x->grad.channel(c);
                    for (std::size_t i = 0; i < plane; ++i) dx[i] += gain * g[i];
                }
                if (s->requires_grad) {
                    T acc{};
                    const T* xv = x->value.channel(c);
                    for (std::size_t i = 0; i < plane; ++i) acc += xv[i] * g[i];
                    s->grad.at(c, 0, 0) += acc;
                }
            }
        };
        return make(std::move(value), {x, s}, std::move(fn), false);
    }

    /// Broadcast multiply by a single-channel map m (1,h,w).
    NodePtr scale_spatial(const NodePtr& x, const NodePtr& m) {
        check(x); check(m);
        if (m->value.channels() != 1 || m->value.height() != x->value.height() ||
            m->value.width() != x->value.width())
            throw shape_error("scale_spatial: map must be (1,h,w) matching x");
        const std::size_t plane = static_cast<std::size_t>(x->value.height()) * x->value.width();
        TensorT<T> value(x->value.channels(), x->value.height(), x->value.width());
        for (int c = 0; c < x->value.channels(); ++c) {
            const T* src = x->value.channel(c);
            const T* gm = m->value.data();
            T* dst = value.channel(c);
            for (std::size_t i = 0; i < plane; ++i) dst[i] = gm[i] * src[i];
        }
        auto fn = [x, m, plane](Node& n) {
            for (int c = 0; c < x->value.channels(); ++c) {
                const T* g = n.grad.channel(c);
                if (x->requires_grad) {
                    const T* gm = m->value.data();
                    T* dx = x->grad.channel(c);
                    for (std::size_t i = 0; i < plane; ++i) dx[i] += gm[i] * g[i];
                }
                if (m->requires_grad) {
                    const T* xv = x->value.channel(c);
                    T* dm = m->grad.data();
                    for (std::size_t i = 0; i < plane; ++i) dm[i] += xv[i] * g[i];
                }
            }
        };
        return make(std::move(value), {x, m}, std::move(fn), false);
    }

    /// Reverse sweep from a scalar (1,1,1) node recorded on this tape.
    void backward(const NodePtr& loss) {
        if (!loss || loss->tape != this) throw tape_error("backward: node not on this tape");
        if (loss->value.size() != 1) throw tape_error("backward: loss must be scalar");
        loss->grad.fill(T(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if ((*it)->backprop) (*it)->backprop(**it);
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    NodePtr make(TensorT<T> value, std::vector<NodePtr> parents,
                 std::function<void(Node&)> backprop, bool requires_grad) {
        auto node = std::make_shared<Node>();
        node->grad = TensorT<T>(value.channels(), value.height(), value.width(), T{});
        node->value = std::move(value);
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
        node->requires_grad = requires_grad;
        for (const auto& p : node->parents) node->requires_grad |= p->requires_grad;
        node->tape = this;
        nodes_.push_back(node);
        return node;
    }

    void check(const NodePtr& n) const {
        if (!n || n->tape != this) throw tape_error("op input was not recorded on this tape");
    }

    std::vector<NodePtr> nodes_;
};

using Tape = TapeT<float>;
using NodePtr = NodePtrT<float>;

}  // namespace fuselite::ad
