#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fuselite/autodiff.hpp"
#include "fuselite/generator.hpp"

namespace fuselite::ad {

// Differentiable compositions of the tape primitives, mirroring the plain
// forward path layer for layer. Templated so the gradient checker can run
// the identical wiring in double.

template <typename T>
NodePtrT<T> tape_mlp(TapeT<T>& tape, const NodePtrT<T>& v, const NodePtrT<T>& w0,
                     const NodePtrT<T>& w1) {
    return tape.matvec(w1, tape.activate(tape.matvec(w0, v), Activation::Relu));
}

template <typename T>
struct TapeChannelAttention {
    NodePtrT<T> mc;
    NodePtrT<T> f_prime;
};

template <typename T>
TapeChannelAttention<T> tape_channel_attention(TapeT<T>& tape, const NodePtrT<T>& f,
                                               const NodePtrT<T>& w0, const NodePtrT<T>& w1) {
    auto avg = tape_mlp(tape, tape.reduce_spatial_op(f, Reduce::Mean), w0, w1);
    auto mx = tape_mlp(tape, tape.reduce_spatial_op(f, Reduce::Max), w0, w1);
    auto mc = tape.activate(tape.add(avg, mx), Activation::Sigmoid);
    return {mc, tape.scale_channels(f, mc)};
}

template <typename T>
struct TapeSpatialAttention {
    NodePtrT<T> ms;
    NodePtrT<T> f_double_prime;
};

template <typename T>
TapeSpatialAttention<T> tape_spatial_attention(TapeT<T>& tape, const NodePtrT<T>& f_prime,
                                               const NodePtrT<T>& kernel,
                                               const NodePtrT<T>& bias) {
    auto stack = tape.concat(tape.reduce_channels_op(f_prime, Reduce::Mean),
                             tape.reduce_channels_op(f_prime, Reduce::Max));
    auto ms = tape.activate(tape.conv2d(stack, kernel, bias, 1, 2, 7, 3), Activation::Sigmoid);
    return {ms, tape.scale_spatial(f_prime, ms)};
}

template <typename T>
NodePtrT<T> tape_cbam(TapeT<T>& tape, const NodePtrT<T>& f, const NodePtrT<T>& w0,
                      const NodePtrT<T>& w1, const NodePtrT<T>& kernel, const NodePtrT<T>& bias) {
    auto ca = tape_channel_attention(tape, f, w0, w1);
    return tape_spatial_attention(tape, ca.f_prime, kernel, bias).f_double_prime;
}

template <typename T>
NodePtrT<T> tape_dsconv(TapeT<T>& tape, const NodePtrT<T>& x, const NodePtrT<T>& dw,
                        const NodePtrT<T>& pw, const NodePtrT<T>& pw_bias, int padding) {
    return tape.pointwise(tape.depthwise(x, dw, padding), pw, pw_bias);
}

// --- fusion loss ---------------------------------------------------------

namespace lossdetail {

// forward-difference gradient magnitude, zero at the right/bottom border
template <typename T>
std::vector<double> grad_magnitude(const TensorT<T>& t) {
    const int c = t.channels(), h = t.height(), w = t.width();
    std::vector<double> g(t.size());
    std::size_t i = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x, ++i) {
                const double dx =
                    x + 1 < w ? static_cast<double>(t.at(ch, y, x + 1)) - t.at(ch, y, x) : 0.0;
                const double dy =
                    y + 1 < h ? static_cast<double>(t.at(ch, y + 1, x)) - t.at(ch, y, x) : 0.0;
                g[i] = std::sqrt(dx * dx + dy * dy);
            }
    return g;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

}  // namespace lossdetail

inline constexpr double kGradLossWeight = 10.0;

/// Intensity + gradient-magnitude L1 loss against the pixelwise-max target:
/// mean|fused - max(ir,vi)| + 10 * mean| |grad fused| - max(|grad ir|, |grad vi|) |.
template <typename T>
double fusion_loss(const TensorT<T>& fused, const TensorT<T>& ir, const TensorT<T>& vi) {
    if (!fused.same_shape(ir) || !fused.same_shape(vi))
        throw shape_error("fusion_loss: shape mismatch");
    const std::size_t n = fused.size();
    double intensity = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target =
            std::max(static_cast<double>(ir.data()[i]), static_cast<double>(vi.data()[i]));
        intensity += std::abs(static_cast<double>(fused.data()[i]) - target);
    }
    const std::vector<double> gf = lossdetail::grad_magnitude(fused);
    const std::vector<double> gi = lossdetail::grad_magnitude(ir);
    const std::vector<double> gv = lossdetail::grad_magnitude(vi);
    double texture = 0.0;
    for (std::size_t i = 0; i < n; ++i) texture += std::abs(gf[i] - std::max(gi[i], gv[i]));
    return intensity / static_cast<double>(n) +
           kGradLossWeight * texture / static_cast<double>(n);
}

/// Records fusion_loss as a scalar tape node; ir and vi are constants.
template <typename T>
NodePtrT<T> fusion_loss_node(TapeT<T>& tape, const NodePtrT<T>& fused, TensorT<T> ir,
                             TensorT<T> vi) {
    const double loss = fusion_loss(fused->value, ir, vi);
    TensorT<T> value(1, 1, 1, static_cast<T>(loss));
    auto fn = [fused, ir = std::move(ir), vi = std::move(vi)](NodeT<T>& n) {
        if (!fused->requires_grad) return;
        const TensorT<T>& f = fused->value;
        const int c = f.channels(), h = f.height(), w = f.width();
        const double n_inv = 1.0 / static_cast<double>(f.size());
        const double g = static_cast<double>(n.grad.at(0, 0, 0));

        for (std::size_t i = 0; i < f.size(); ++i) {
            const double target =
                std::max(static_cast<double>(ir.data()[i]), static_cast<double>(vi.data()[i]));
            fused->grad.data()[i] += static_cast<T>(
                g * n_inv * lossdetail::sign(static_cast<double>(f.data()[i]) - target));
        }

        const std::vector<double> gf = lossdetail::grad_magnitude(f);
        const std::vector<double> gi = lossdetail::grad_magnitude(ir);
        const std::vector<double> gv = lossdetail::grad_magnitude(vi);
        std::size_t i = 0;
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x, ++i) {
                    if (gf[i] == 0.0) continue;  // subgradient 0 at the kink
                    const double s = g * kGradLossWeight * n_inv *
                                     lossdetail::sign(gf[i] - std::max(gi[i], gv[i])) / gf[i];
                    if (x + 1 < w) {
                        const double dx = static_cast<double>(f.at(ch, y, x + 1)) - f.at(ch, y, x);
                        fused->grad.at(ch, y, x + 1) += static_cast<T>(s * dx);
                        fused->grad.at(ch, y, x) -= static_cast<T>(s * dx);
                    }
                    if (y + 1 < h) {
                        const double dy = static_cast<double>(f.at(ch, y + 1, x)) - f.at(ch, y, x);
                        fused->grad.at(ch, y + 1, x) += static_cast<T>(s * dy);
                        fused->grad.at(ch, y, x) -= static_cast<T>(s * dy);
                    }
                }
    };
    return tape.custom(std::move(value), {fused}, std::move(fn));
}

// --- differentiable generator forward ------------------------------------

struct TapeNet {
    std::vector<std::pair<std::string, NodePtr>> params;  // "layer.tensor" -> leaf
    NodePtr output;
};

/// Rebuilds the generator forward pass on a tape. Leaves for every weight
/// tensor are created in traversal order and marked trainable when
/// `with_grad` is set.
inline TapeNet tape_forward(Tape& tape, const GeneratorWeights& w, const Tensor& ir,
                            const Tensor& vi, bool with_grad) {
    if (ir.channels() != 1 || vi.channels() != 1 || !ir.same_shape(vi))
        throw shape_error("tape_forward: inputs must be matching single-channel tensors");
    TapeNet net;
    const auto leaf_for = [&](const Layer& layer, const std::string& tname) {
        NodePtr node = tape.leaf(layer.tensor(tname), with_grad);
        net.params.emplace_back(layer.name + "." + tname, node);
        return node;
    };
    const auto apply = [&](const Layer& layer, const NodePtr& x) -> NodePtr {
        const int pad = (layer.k - 1) / 2;
        if (layer.kind == LayerKind::Conv) {
            auto kernel = leaf_for(layer, "kernel");
            auto bias = leaf_for(layer, "bias");
            return tape.activate(
                tape.conv2d(x, kernel, bias, layer.c_out, layer.c_in, layer.k, pad), layer.act);
        }
        if (layer.kind == LayerKind::DsConv) {
            auto dw = leaf_for(layer, "depthwise");
            auto pw = leaf_for(layer, "pointwise");
            auto pb = leaf_for(layer, "pointwise_bias");
            return tape.activate(tape_dsconv(tape, x, dw, pw, pb, pad), layer.act);
        }
        auto w0 = leaf_for(layer, "mlp_w0");
        auto w1 = leaf_for(layer, "mlp_w1");
        auto sk = leaf_for(layer, "spatial_kernel");
        auto sb = leaf_for(layer, "spatial_bias");
        return tape_cbam(tape, x, w0, w1, sk, sb);
    };

    std::size_t li = 0;
    NodePtr cat = apply(w.layers[li++], tape.concat(tape.leaf(ir), tape.leaf(vi)));
    for (int i = 0; i < w.config.dense_layers; ++i) {
        NodePtr out = apply(w.layers[li++], cat);
        cat = tape.concat(cat, out);
    }
    if (variant_has_cbam(w.config.variant)) cat = apply(w.layers[li++], cat);
    for (std::size_t i = 0; i < w.config.decoder_widths.size(); ++i)
        cat = apply(w.layers[li++], cat);
    net.output = tape.affine(cat, 0.5f, 0.5f);  // tanh -> [0,1]
    return net;
}

}  // namespace fuselite::ad
