#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "fuselite/errors.hpp"

namespace fuselite {

/// Dense rank-3 array in channel-major (c, h, w) layout. Immutable shape,
/// mutable cells. Matrices are stored as (1, rows, cols); per-channel
/// vectors use ChannelVectorT below.
template <typename T>
class TensorT {
public:
    TensorT() = default;  // empty, shape (0,0,0)

    TensorT(int c, int h, int w, T fill = T{}) : c_(c), h_(h), w_(w) {
        if (c < 1 || h < 1 || w < 1)
            throw shape_error("tensor dimensions must be >= 1, got (" + std::to_string(c) +
                              "," + std::to_string(h) + "," + std::to_string(w) + ")");
        data_.assign(static_cast<std::size_t>(c) * h * w, fill);
    }

    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    T& at(int c, int y, int x) { return data_[idx(c, y, x)]; }
    const T& at(int c, int y, int x) const { return data_[idx(c, y, x)]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }
    const T* channel(int c) const { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }

    bool same_shape(const TensorT& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const TensorT& a, const TensorT& b) {
        return a.c_ == b.c_ && a.h_ == b.h_ && a.w_ == b.w_ && a.data_ == b.data_;
    }

private:
    std::size_t idx(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
    }

    int c_ = 0, h_ = 0, w_ = 0;
    std::vector<T> data_;
};

/// One value per channel (pooled features, attention gains).
template <typename T>
struct ChannelVectorT {
    ChannelVectorT() = default;

    explicit ChannelVectorT(int n, T fill = T{}) {
        if (n < 1) throw shape_error("channel vector length must be >= 1");
        data.assign(static_cast<std::size_t>(n), fill);
    }

    int size() const { return static_cast<int>(data.size()); }
    T& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
    T operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

    std::vector<T> data;
};

using Tensor = TensorT<float>;
using ChannelVector = ChannelVectorT<float>;

enum class Reduce { Mean, Max };

/// Zero-pads the spatial borders by `pad` on every side.
template <typename T>
TensorT<T> pad2d(const TensorT<T>& t, int pad) {
    if (pad < 0) throw argument_error("pad2d: negative padding");
    if (pad == 0) return t;
    TensorT<T> out(t.channels(), t.height() + 2 * pad, t.width() + 2 * pad, T{});
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < t.height(); ++y) {
            const T* src = &t.at(c, y, 0);
            T* dst = &out.at(c, y + pad, pad);
            std::copy(src, src + t.width(), dst);
        }
    return out;
}

/// Stacks b's channels after a's. Spatial sizes must agree.
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw shape_error("concat_channels: spatial sizes differ");
    TensorT<T> out(a.channels() + b.channels(), a.height(), a.width());
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

/// Copies `count` channels starting at `first`.
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& t, int first, int count) {
    if (first < 0 || count < 1 || first + count > t.channels())
        throw shape_error("slice_channels: range out of bounds");
    TensorT<T> out(count, t.height(), t.width());
    std::copy(t.channel(first), t.channel(first) + out.size(), out.data());
    return out;
}

/// Collapses each channel's h*w values to one number (mean accumulates in
/// double, row-major order).
template <typename T>
ChannelVectorT<T> reduce_spatial(const TensorT<T>& t, Reduce mode) {
    ChannelVectorT<T> out(t.channels());
    const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
    for (int c = 0; c < t.channels(); ++c) {
        const T* p = t.channel(c);
        if (mode == Reduce::Mean) {
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            out[c] = static_cast<T>(acc / static_cast<double>(plane));
        } else {
            T best = p[0];
            for (std::size_t i = 1; i < plane; ++i) best = std::max(best, p[i]);
            out[c] = best;
        }
    }
    return out;
}

/// Collapses the channel axis to a single-channel map.
template <typename T>
TensorT<T> reduce_channels(const TensorT<T>& t, Reduce mode) {
    TensorT<T> out(1, t.height(), t.width());
    const std::size_t plane = static_cast<std::size_t>(t.height()) * t.width();
    if (mode == Reduce::Mean) {
        std::vector<double> acc(plane, 0.0);
        for (int c = 0; c < t.channels(); ++c) {
            const T* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i) acc[i] += p[i];
        }
        for (std::size_t i = 0; i < plane; ++i)
            out.data()[i] = static_cast<T>(acc[i] / t.channels());
    } else {
        std::copy(t.channel(0), t.channel(0) + plane, out.data());
        for (int c = 1; c < t.channels(); ++c) {
            const T* p = t.channel(c);
            for (std::size_t i = 0; i < plane; ++i)
                out.data()[i] = std::max(out.data()[i], p[i]);
        }
    }
    return out;
}

}  // namespace fuselite
