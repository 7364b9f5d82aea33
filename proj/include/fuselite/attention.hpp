#pragma once

#include <cstdlib>
#include <utility>

#include "fuselite/nn_ops.hpp"
#include "fuselite/tensor.hpp"

namespace fuselite {

// CBAM: channel attention then spatial attention in series. Both gates are
// sigmoids, so the refined feature can only be attenuated.

inline int cbam_hidden_width(int channels) {
    return std::max(channels / 8, 4);
}

template <typename T>
struct CbamParamsT {
    TensorT<T> w0;              // (1, hidden, c)
    TensorT<T> w1;              // (1, c, hidden)
    TensorT<T> spatial_kernel;  // (2, 7, 7)
    T spatial_bias = T{};
    int channels = 0;
    int hidden = 0;

    /// Production shape: hidden = max(c/8, 4), everything zero-filled.
    static CbamParamsT zeros(int channels) { return with_hidden(channels, cbam_hidden_width(channels)); }

    /// Test-mode constructor: any hidden width (r=1 identity MLPs make the
    /// attention hand-checkable).
    static CbamParamsT with_hidden(int channels, int hidden) {
        CbamParamsT p;
        p.channels = channels;
        p.hidden = hidden;
        p.w0 = TensorT<T>(1, hidden, channels);
        p.w1 = TensorT<T>(1, channels, hidden);
        p.spatial_kernel = TensorT<T>(2, 7, 7);
        p.spatial_bias = T{};
        return p;
    }
};

using CbamParams = CbamParamsT<float>;

template <typename T>
struct CbamTraceT {
    ChannelVectorT<T> mc;          // channel gains, each in (0,1)
    TensorT<T> ms;                 // (1,h,w) spatial gains, each in (0,1)
    TensorT<T> f_prime;            // after channel attention
    TensorT<T> f_double_prime;     // after spatial attention
};

using CbamTrace = CbamTraceT<float>;

/// mc = sigmoid(mlp(avgpool(f)) + mlp(maxpool(f))); f' scales each channel
/// of f by its gain.
template <typename T>
std::pair<ChannelVectorT<T>, TensorT<T>> channel_attention(const TensorT<T>& f,
                                                           const CbamParamsT<T>& p) {
    if (f.channels() != p.channels)
        throw shape_error("channel_attention: feature has " + std::to_string(f.channels()) +
                          " channels, params expect " + std::to_string(p.channels));
    const ChannelVectorT<T> avg = mlp_bottleneck(reduce_spatial(f, Reduce::Mean), p.w0, p.w1);
    const ChannelVectorT<T> mx = mlp_bottleneck(reduce_spatial(f, Reduce::Max), p.w0, p.w1);
    ChannelVectorT<T> mc(f.channels());
    for (int c = 0; c < f.channels(); ++c)
        mc[c] = detail::apply_activation(static_cast<T>(avg[c] + mx[c]), Activation::Sigmoid);

    TensorT<T> f_prime(f.channels(), f.height(), f.width());
    const std::size_t plane = static_cast<std::size_t>(f.height()) * f.width();
    for (int c = 0; c < f.channels(); ++c) {
        const T g = mc[c];
        const T* src = f.channel(c);
        T* dst = f_prime.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = g * src[i];
    }
    return {std::move(mc), std::move(f_prime)};
}

/// ms = sigmoid(conv7x7([mean_c(f'); max_c(f')])); f'' scales every channel
/// of f' by the spatial gain map.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> spatial_attention(const TensorT<T>& f_prime,
                                                    const CbamParamsT<T>& p) {
    const TensorT<T> stack =
        concat_channels(reduce_channels(f_prime, Reduce::Mean), reduce_channels(f_prime, Reduce::Max));
    TensorT<T> ms = activation(conv7x7_2to1(stack, p.spatial_kernel, p.spatial_bias),
                               Activation::Sigmoid);

    TensorT<T> out(f_prime.channels(), f_prime.height(), f_prime.width());
    const std::size_t plane = static_cast<std::size_t>(f_prime.height()) * f_prime.width();
    const T* gain = ms.data();
    for (int c = 0; c < f_prime.channels(); ++c) {
        const T* src = f_prime.channel(c);
        T* dst = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = gain[i] * src[i];
    }
    return {std::move(ms), std::move(out)};
}

template <typename T>
CbamTraceT<T> cbam(const TensorT<T>& f, const CbamParamsT<T>& p) {
    CbamTraceT<T> trace;
    auto [mc, f_prime] = channel_attention(f, p);
    auto [ms, f_double_prime] = spatial_attention(f_prime, p);
    trace.mc = std::move(mc);
    trace.ms = std::move(ms);
    trace.f_prime = std::move(f_prime);
    trace.f_double_prime = std::move(f_double_prime);
    return trace;
}

}  // namespace fuselite
