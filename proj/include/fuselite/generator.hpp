#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fuselite/attention.hpp"
#include "fuselite/nn_ops.hpp"
#include "fuselite/tensor.hpp"

namespace fuselite {

// Fusion generator: 2-channel input (IR stacked on VI), a standard-conv
// stem, a dense block with channel concatenation, an optional CBAM gate on
// the block output, and a conv decoder down to one channel. The variant
// picks standard vs depthwise-separable layers and toggles CBAM; the stem
// and the CBAM 7x7 conv stay standard in every variant.

enum class Variant { Baseline, Lightweight, BaselineCbam, LightweightNoCbam };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::Lightweight: return "lightweight";
        case Variant::BaselineCbam: return "baseline+cbam";
        case Variant::LightweightNoCbam: return "lightweight-cbam";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "baseline") return Variant::Baseline;
    if (s == "lightweight") return Variant::Lightweight;
    if (s == "baseline+cbam") return Variant::BaselineCbam;
    if (s == "lightweight-cbam") return Variant::LightweightNoCbam;
    throw argument_error("unknown variant '" + s + "'");
}

inline bool variant_uses_dsconv(Variant v) {
    return v == Variant::Lightweight || v == Variant::LightweightNoCbam;
}

inline bool variant_has_cbam(Variant v) {
    return v == Variant::Lightweight || v == Variant::BaselineCbam;
}

struct GeneratorConfig {
    Variant variant = Variant::Lightweight;
    int base_width = 32;
    int dense_layers = 3;
    std::vector<int> decoder_widths = {64, 32, 1};
};

inline void validate_config(const GeneratorConfig& cfg) {
    if (cfg.base_width < 4) throw argument_error("config: base_width must be >= 4");
    if (cfg.dense_layers < 1) throw argument_error("config: dense_layers must be >= 1");
    if (cfg.decoder_widths.empty() || cfg.decoder_widths.back() != 1)
        throw argument_error("config: decoder must end in width 1");
    for (int w : cfg.decoder_widths)
        if (w < 1) throw argument_error("config: decoder widths must be >= 1");
}

/// Channel count entering the decoder (stem + all dense outputs).
inline int block_width(const GeneratorConfig& cfg) {
    return cfg.base_width * (cfg.dense_layers + 1);
}

enum class LayerKind { Conv, DsConv, Cbam };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::DsConv: return "dsconv";
        case LayerKind::Cbam: return "cbam";
    }
    return "?";
}

/// One generator layer: meta plus its named parameter tensors in a fixed
/// order (conv: kernel, bias; dsconv: depthwise, pointwise, pointwise_bias;
/// cbam: mlp_w0, mlp_w1, spatial_kernel, spatial_bias).
struct Layer {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    int c_in = 0;
    int c_out = 0;
    int k = 0;
    Activation act = Activation::LeakyRelu;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor& tensor(const std::string& tname) {
        for (auto& [n, t] : tensors)
            if (n == tname) return t;
        throw argument_error("layer " + name + " has no tensor '" + tname + "'");
    }
    const Tensor& tensor(const std::string& tname) const {
        for (const auto& [n, t] : tensors)
            if (n == tname) return t;
        throw argument_error("layer " + name + " has no tensor '" + tname + "'");
    }
};

struct GeneratorWeights {
    GeneratorConfig config;
    std::vector<Layer> layers;
};

/// Visits every parameter tensor in serialization order.
template <typename Fn>
void for_each_tensor(GeneratorWeights& w, Fn&& fn) {
    for (auto& layer : w.layers)
        for (auto& [tname, t] : layer.tensors) fn(layer, tname, t);
}

template <typename Fn>
void for_each_tensor(const GeneratorWeights& w, Fn&& fn) {
    for (const auto& layer : w.layers)
        for (const auto& [tname, t] : layer.tensors) fn(layer, tname, t);
}

// --- parameter / MAC formulas ------------------------------------------

inline std::int64_t params_conv(int k, int c_in, int c_out, bool with_bias) {
    if (k < 1) throw argument_error("params_conv: k must be >= 1");
    return static_cast<std::int64_t>(k) * k * c_in * c_out + (with_bias ? c_out : 0);
}

inline std::int64_t params_dsconv(int k, int c_in, int c_out) {
    if (k < 1) throw argument_error("params_dsconv: k must be >= 1");
    return static_cast<std::int64_t>(k) * k * c_in +
           static_cast<std::int64_t>(c_in) * c_out + c_out;
}

inline std::int64_t params_cbam(int channels, int hidden) {
    // two shared-MLP matrices, the 2-channel 7x7 kernel, one spatial bias
    return 2LL * channels * hidden + 2LL * 7 * 7 + 1;
}

inline std::int64_t macs_conv(int k, int c_in, int c_out, int h, int w) {
    return static_cast<std::int64_t>(k) * k * c_in * c_out * h * w;
}

inline std::int64_t macs_dsconv(int k, int c_in, int c_out, int h, int w) {
    return (static_cast<std::int64_t>(k) * k * c_in +
            static_cast<std::int64_t>(c_in) * c_out) *
           h * w;
}

/// CBAM cost: both spatial pools, the two MLP passes, the channel scale,
/// both channel-axis reductions, the 7x7 conv, and the spatial scale.
inline std::int64_t macs_cbam(int channels, int hidden, int h, int w) {
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    return 6 * channels * hw + 4LL * channels * hidden + 2LL * 7 * 7 * hw;
}

struct LayerCost {
    std::string name;
    std::string kind;
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

struct CostReport {
    std::int64_t params = 0;
    std::int64_t macs = 0;
    std::vector<LayerCost> per_layer;
};

// --- construction --------------------------------------------------------

namespace detail {

// 24-bit mantissa draw from a seeded mt19937; avoids stdlib distribution
// differences so identical seeds give identical weights everywhere.
inline float uniform_symmetric(std::mt19937& rng, double bound) {
    const double u = static_cast<double>(rng() >> 8) * (1.0 / 16777216.0);
    return static_cast<float>((2.0 * u - 1.0) * bound);
}

inline void he_fill(Tensor& t, int fan_in, std::mt19937& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    float* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = uniform_symmetric(rng, bound);
}

inline Layer make_conv_layer(const std::string& name, int c_in, int c_out, int k,
                             Activation act, std::mt19937& rng) {
    Layer layer;
    layer.name = name;
    layer.kind = LayerKind::Conv;
    layer.c_in = c_in;
    layer.c_out = c_out;
    layer.k = k;
    layer.act = act;
    Tensor kernel(c_out * c_in, k, k);
    he_fill(kernel, c_in * k * k, rng);
    layer.tensors.emplace_back("kernel", std::move(kernel));
    layer.tensors.emplace_back("bias", Tensor(c_out, 1, 1, 0.0f));
    return layer;
}

inline Layer make_dsconv_layer(const std::string& name, int c_in, int c_out, int k,
                               Activation act, std::mt19937& rng) {
    Layer layer;
    layer.name = name;
    layer.kind = LayerKind::DsConv;
    layer.c_in = c_in;
    layer.c_out = c_out;
    layer.k = k;
    layer.act = act;
    Tensor dw(c_in, k, k);
    he_fill(dw, k * k, rng);
    Tensor pw(1, c_out, c_in);
    he_fill(pw, c_in, rng);
    layer.tensors.emplace_back("depthwise", std::move(dw));
    layer.tensors.emplace_back("pointwise", std::move(pw));
    layer.tensors.emplace_back("pointwise_bias", Tensor(c_out, 1, 1, 0.0f));
    return layer;
}

inline Layer make_cbam_layer(const std::string& name, int channels, std::mt19937& rng) {
    Layer layer;
    layer.name = name;
    layer.kind = LayerKind::Cbam;
    layer.c_in = channels;
    layer.c_out = channels;
    layer.k = 7;
    layer.act = Activation::Relu;  // unused; CBAM has its own sigmoids
    const int hidden = cbam_hidden_width(channels);
    Tensor w0(1, hidden, channels);
    he_fill(w0, channels, rng);
    Tensor w1(1, channels, hidden);
    he_fill(w1, hidden, rng);
    Tensor sk(2, 7, 7);
    he_fill(sk, 2 * 7 * 7, rng);
    layer.tensors.emplace_back("mlp_w0", std::move(w0));
    layer.tensors.emplace_back("mlp_w1", std::move(w1));
    layer.tensors.emplace_back("spatial_kernel", std::move(sk));
    layer.tensors.emplace_back("spatial_bias", Tensor(1, 1, 1, 0.0f));
    return layer;
}

}  // namespace detail

inline GeneratorWeights build_generator(const GeneratorConfig& cfg, std::uint32_t seed) {
    validate_config(cfg);
    const bool ds = variant_uses_dsconv(cfg.variant);
    std::mt19937 rng(seed);
    GeneratorWeights w;
    w.config = cfg;

    w.layers.push_back(detail::make_conv_layer("stem", 2, cfg.base_width, 3,
                                               Activation::LeakyRelu, rng));
    for (int i = 1; i <= cfg.dense_layers; ++i) {
        const int c_in = cfg.base_width * i;
        const std::string name = "dense" + std::to_string(i);
        w.layers.push_back(ds ? detail::make_dsconv_layer(name, c_in, cfg.base_width, 3,
                                                          Activation::LeakyRelu, rng)
                              : detail::make_conv_layer(name, c_in, cfg.base_width, 3,
                                                        Activation::LeakyRelu, rng));
    }
    if (variant_has_cbam(cfg.variant))
        w.layers.push_back(detail::make_cbam_layer("cbam", block_width(cfg), rng));

    int c_in = block_width(cfg);
    for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i) {
        const int c_out = cfg.decoder_widths[i];
        const bool last = i + 1 == cfg.decoder_widths.size();
        const Activation act = last ? Activation::Tanh : Activation::LeakyRelu;
        const std::string name = "dec" + std::to_string(i + 1);
        w.layers.push_back(ds ? detail::make_dsconv_layer(name, c_in, c_out, 3, act, rng)
                              : detail::make_conv_layer(name, c_in, c_out, 3, act, rng));
        c_in = c_out;
    }
    return w;
}

namespace detail {

inline Tensor apply_layer(const Layer& layer, const Tensor& x) {
    Tensor y;
    if (layer.kind == LayerKind::Conv) {
        ConvParams p;
        p.kernel = layer.tensor("kernel");
        p.bias = layer.tensor("bias");
        p.c_out = layer.c_out;
        p.c_in = layer.c_in;
        p.k = layer.k;
        p.padding = (layer.k - 1) / 2;
        y = conv2d(x, p);
    } else if (layer.kind == LayerKind::DsConv) {
        DsConvParams p;
        p.depthwise = layer.tensor("depthwise");
        p.pointwise = layer.tensor("pointwise");
        p.pointwise_bias = layer.tensor("pointwise_bias");
        p.c_out = layer.c_out;
        p.c_in = layer.c_in;
        p.k = layer.k;
        p.padding = (layer.k - 1) / 2;
        y = dsconv2d(x, p);
    } else {
        CbamParams p;
        p.channels = layer.c_in;
        p.hidden = cbam_hidden_width(layer.c_in);
        p.w0 = layer.tensor("mlp_w0");
        p.w1 = layer.tensor("mlp_w1");
        p.spatial_kernel = layer.tensor("spatial_kernel");
        p.spatial_bias = layer.tensor("spatial_bias").at(0, 0, 0);
        return cbam(x, p).f_double_prime;  // no extra activation
    }
    return activation(y, layer.act);
}

}  // namespace detail

/// Runs the generator on one registered pair; tanh output is remapped to
/// [0,1]. Both inputs must be single-channel and the same size.
inline Tensor forward_fuse(const GeneratorWeights& w, const Tensor& ir, const Tensor& vi) {
    if (ir.channels() != 1 || vi.channels() != 1)
        throw shape_error("forward_fuse: inputs must be single-channel");
    if (!ir.same_shape(vi)) throw shape_error("forward_fuse: ir/vi sizes differ");

    std::size_t li = 0;
    Tensor cat = detail::apply_layer(w.layers[li++], concat_channels(ir, vi));  // stem
    for (int i = 0; i < w.config.dense_layers; ++i) {
        Tensor out = detail::apply_layer(w.layers[li++], cat);
        cat = concat_channels(cat, out);
    }
    if (variant_has_cbam(w.config.variant)) cat = detail::apply_layer(w.layers[li++], cat);
    for (std::size_t i = 0; i < w.config.decoder_widths.size(); ++i)
        cat = detail::apply_layer(w.layers[li++], cat);

    Tensor out(1, cat.height(), cat.width());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = (cat.data()[i] + 1.0f) * 0.5f;
    return out;
}

/// Exact parameter and multiply-accumulate accounting for the generator at
/// a given input size. Spatial size never changes inside the network, so
/// every layer sees (h, w).
inline CostReport cost_report(const GeneratorWeights& w, int h, int width) {
    CostReport report;
    for (const auto& layer : w.layers) {
        LayerCost cost;
        cost.name = layer.name;
        cost.kind = layer_kind_name(layer.kind);
        if (layer.kind == LayerKind::Conv) {
            cost.params = params_conv(layer.k, layer.c_in, layer.c_out, true);
            cost.macs = macs_conv(layer.k, layer.c_in, layer.c_out, h, width);
        } else if (layer.kind == LayerKind::DsConv) {
            cost.params = params_dsconv(layer.k, layer.c_in, layer.c_out);
            cost.macs = macs_dsconv(layer.k, layer.c_in, layer.c_out, h, width);
        } else {
            const int hidden = cbam_hidden_width(layer.c_in);
            cost.params = params_cbam(layer.c_in, hidden);
            cost.macs = macs_cbam(layer.c_in, hidden, h, width);
        }
        report.params += cost.params;
        report.macs += cost.macs;
        report.per_layer.push_back(std::move(cost));
    }
    return report;
}

/// Number of scalars actually held in the weight tensors (independent of
/// the formula-based count above).
inline std::int64_t count_scalars(const GeneratorWeights& w) {
    std::int64_t n = 0;
    for_each_tensor(w, [&](const Layer&, const std::string&, const Tensor& t) {
        n += static_cast<std::int64_t>(t.size());
    });
    return n;
}

}  // namespace fuselite
