#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "fuselite/tensor.hpp"

namespace fuselite {

// Forward kernels. Stride is 1 everywhere; padding is zero-fill. Per output
// element the accumulation order is fixed: bias first, then input channels
// ascending with the kernel window row-major inside each channel. Sums are
// carried in double and stored back in T.

/// Standard convolution weights. The (c_out, c_in, k, k) kernel is packed
/// into a rank-3 tensor of shape (c_out*c_in, k, k); filter (o, c) lives in
/// channel o*c_in + c.
template <typename T>
struct ConvParamsT {
    TensorT<T> kernel;
    std::optional<TensorT<T>> bias;  // (c_out, 1, 1)
    int c_out = 0;
    int c_in = 0;
    int k = 0;
    int padding = 0;

    T kernel_at(int o, int c, int i, int j) const { return kernel.at(o * c_in + c, i, j); }
};

/// Depthwise + pointwise factorization. The depthwise pass has one k*k
/// filter per input channel and no bias; the 1x1 pointwise pass carries the
/// only bias.
template <typename T>
struct DsConvParamsT {
    TensorT<T> depthwise;       // (c_in, k, k)
    TensorT<T> pointwise;       // (1, c_out, c_in)
    TensorT<T> pointwise_bias;  // (c_out, 1, 1)
    int c_out = 0;
    int c_in = 0;
    int k = 0;
    int padding = 0;
};

using ConvParams = ConvParamsT<float>;
using DsConvParams = DsConvParamsT<float>;

enum class Activation { Sigmoid, Tanh, Relu, LeakyRelu };

inline constexpr double kLeakySlope = 0.2;

namespace detail {

// Core direct convolution: kernel packed (c_out*c_in, k, k), optional bias.
template <typename T>
TensorT<T> conv2d_direct(const TensorT<T>& input, const TensorT<T>& kernel, const T* bias,
                         int c_out, int c_in, int k, int padding) {
    if (input.channels() != c_in)
        throw shape_error("conv2d: input has " + std::to_string(input.channels()) +
                          " channels, kernel expects " + std::to_string(c_in));
    if (kernel.channels() != c_out * c_in || kernel.height() != k || kernel.width() != k)
        throw shape_error("conv2d: kernel tensor shape does not match meta");
    const TensorT<T> padded = pad2d(input, padding);
    const int oh = padded.height() - k + 1;
    const int ow = padded.width() - k + 1;
    if (oh < 1 || ow < 1) throw shape_error("conv2d: kernel larger than padded input");

    TensorT<T> out(c_out, oh, ow);
    std::vector<double> acc(static_cast<std::size_t>(oh) * ow);
    for (int o = 0; o < c_out; ++o) {
        std::fill(acc.begin(), acc.end(), bias ? static_cast<double>(bias[o]) : 0.0);
        for (int c = 0; c < c_in; ++c)
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const double wgt = kernel.at(o * c_in + c, i, j);
                    for (int y = 0; y < oh; ++y) {
                        const T* row = &padded.at(c, y + i, j);
                        double* a = &acc[static_cast<std::size_t>(y) * ow];
                        for (int x = 0; x < ow; ++x) a[x] += wgt * row[x];
                    }
                }
        T* dst = out.channel(o);
        for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i]);
    }
    return out;
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvParamsT<T>& p) {
    const T* bias = p.bias ? p.bias->data() : nullptr;
    return detail::conv2d_direct(input, p.kernel, bias, p.c_out, p.c_in, p.k, p.padding);
}

/// Per-channel convolution: output channel i depends only on input channel i.
template <typename T>
TensorT<T> depthwise_conv2d(const TensorT<T>& input, const TensorT<T>& kernel, int padding) {
    if (kernel.channels() != input.channels())
        throw shape_error("depthwise_conv2d: need one filter per input channel, got " +
                          std::to_string(kernel.channels()) + " filters for " +
                          std::to_string(input.channels()) + " channels");
    if (kernel.height() != kernel.width())
        throw shape_error("depthwise_conv2d: kernel must be square");
    const int k = kernel.height();
    const TensorT<T> padded = pad2d(input, padding);
    const int oh = padded.height() - k + 1;
    const int ow = padded.width() - k + 1;
    if (oh < 1 || ow < 1) throw shape_error("depthwise_conv2d: kernel larger than padded input");

    TensorT<T> out(input.channels(), oh, ow);
    std::vector<double> acc(static_cast<std::size_t>(oh) * ow);
    for (int c = 0; c < input.channels(); ++c) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double wgt = kernel.at(c, i, j);
                for (int y = 0; y < oh; ++y) {
                    const T* row = &padded.at(c, y + i, j);
                    double* a = &acc[static_cast<std::size_t>(y) * ow];
                    for (int x = 0; x < ow; ++x) a[x] += wgt * row[x];
                }
            }
        T* dst = out.channel(c);
        for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i]);
    }
    return out;
}

/// 1x1 convolution as a matrix (1, c_out, c_in) acting across channels.
template <typename T>
TensorT<T> pointwise_conv(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias) {
    const int c_out = weight.height();
    const int c_in = weight.width();
    if (weight.channels() != 1) throw shape_error("pointwise_conv: weight must be (1, c_out, c_in)");
    if (input.channels() != c_in)
        throw shape_error("pointwise_conv: input channel count mismatch");
    if (bias.channels() != c_out || bias.height() != 1 || bias.width() != 1)
        throw shape_error("pointwise_conv: bias must be (c_out, 1, 1)");

    TensorT<T> out(c_out, input.height(), input.width());
    const std::size_t plane = static_cast<std::size_t>(input.height()) * input.width();
    std::vector<double> acc(plane);
    for (int o = 0; o < c_out; ++o) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias.at(o, 0, 0)));
        for (int c = 0; c < c_in; ++c) {
            const double wgt = weight.at(0, o, c);
            const T* p = input.channel(c);
            for (std::size_t i = 0; i < plane; ++i) acc[i] += wgt * p[i];
        }
        T* dst = out.channel(o);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(acc[i]);
    }
    return out;
}

/// Depthwise separable convolution, defined as the exact composition
/// pointwise(depthwise(x)).
template <typename T>
TensorT<T> dsconv2d(const TensorT<T>& input, const DsConvParamsT<T>& p) {
    return pointwise_conv(depthwise_conv2d(input, p.depthwise, p.padding), p.pointwise,
                          p.pointwise_bias);
}

namespace detail {

template <typename T>
T apply_activation(T x, Activation kind) {
    switch (kind) {
        case Activation::Sigmoid:
            return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
        case Activation::Tanh:
            return static_cast<T>(std::tanh(static_cast<double>(x)));
        case Activation::Relu:
            return x > T{} ? x : T{};
        case Activation::LeakyRelu:
            return x > T{} ? x : static_cast<T>(kLeakySlope * static_cast<double>(x));
    }
    return x;
}

}  // namespace detail

template <typename T>
TensorT<T> activation(const TensorT<T>& t, Activation kind) {
    TensorT<T> out = t;
    T* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) p[i] = detail::apply_activation(p[i], kind);
    return out;
}

/// Shared two-layer bottleneck: w1 * relu(w0 * v), no biases. w0 is
/// (1, hidden, c), w1 is (1, c, hidden).
template <typename T>
ChannelVectorT<T> mlp_bottleneck(const ChannelVectorT<T>& v, const TensorT<T>& w0,
                                 const TensorT<T>& w1) {
    const int c = v.size();
    const int hidden = w0.height();
    if (w0.channels() != 1 || w1.channels() != 1)
        throw shape_error("mlp_bottleneck: weights must be (1, rows, cols)");
    if (w0.width() != c)
        throw shape_error("mlp_bottleneck: w0 expects " + std::to_string(w0.width()) +
                          " inputs, vector has " + std::to_string(c));
    if (w1.width() != hidden || w1.height() != c)
        throw shape_error("mlp_bottleneck: w1 must be (c, hidden)");

    std::vector<double> h(static_cast<std::size_t>(hidden));
    for (int i = 0; i < hidden; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j) acc += static_cast<double>(w0.at(0, i, j)) * v[j];
        h[static_cast<std::size_t>(i)] = acc > 0.0 ? acc : 0.0;
    }
    ChannelVectorT<T> out(c);
    for (int i = 0; i < c; ++i) {
        double acc = 0.0;
        for (int j = 0; j < hidden; ++j)
            acc += static_cast<double>(w1.at(0, i, j)) * h[static_cast<std::size_t>(j)];
        out[i] = static_cast<T>(acc);
    }
    return out;
}

/// The 7x7 spatial-attention convolution: 2 input channels to 1, padding 3.
template <typename T>
TensorT<T> conv7x7_2to1(const TensorT<T>& stack, const TensorT<T>& kernel, T bias) {
    if (stack.channels() != 2)
        throw shape_error("conv7x7_2to1: expected 2 input channels, got " +
                          std::to_string(stack.channels()));
    if (kernel.channels() != 2 || kernel.height() != 7 || kernel.width() != 7)
        throw shape_error("conv7x7_2to1: kernel must be (2, 7, 7)");
    return detail::conv2d_direct(stack, kernel, &bias, 1, 2, 7, 3);
}

}  // namespace fuselite
