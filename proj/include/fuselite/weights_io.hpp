#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fuselite/errors.hpp"
#include "fuselite/generator.hpp"

namespace fuselite {

// FLW1 weight container. Layout:
//   magic "FLW1"
//   header: a flat sequence of length-prefixed UTF-8 text fields
//     (uint32 LE byte count, then the bytes):
//       variant, base_width, dense_layers, decoder_widths (comma list),
//       layer_count, then per layer: name, role, tensor_count, then per
//       tensor: tensor name, shape "c,h,w"
//   payload: every tensor's scalars as little-endian float32, header order
// The header fully determines the payload length, so corruption is
// detected byte-exactly.

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_field(std::string& out, const std::string& s) {
    put_u32le(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

inline void put_f32le(std::string& out, float f) {
    const std::uint32_t v = std::bit_cast<std::uint32_t>(f);
    put_u32le(out, v);
}

struct Reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    std::uint32_t u32le() {
        if (pos + 4 > bytes.size()) throw format_error("FLW1 header truncated");
        const std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) |
                                (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
        pos += 4;
        return v;
    }

    std::string field() {
        const std::uint32_t len = u32le();
        if (pos + len > bytes.size()) throw format_error("FLW1 header truncated");
        std::string s(reinterpret_cast<const char*>(&bytes[pos]), len);
        pos += len;
        return s;
    }
};

inline std::string join_widths(const std::vector<int>& widths) {
    std::string s;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(widths[i]);
    }
    return s;
}

inline std::vector<int> split_widths(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

inline int parse_int(const std::string& s, const char* what) {
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        throw format_error(std::string("FLW1: bad ") + what + " field '" + s + "'");
    }
}

inline LayerKind parse_kind(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "dsconv") return LayerKind::DsConv;
    if (s == "cbam") return LayerKind::Cbam;
    throw format_error("FLW1: unknown layer role '" + s + "'");
}

}  // namespace detail

inline void save_weights(const GeneratorWeights& w, const std::filesystem::path& path) {
    std::string blob = "FLW1";
    detail::put_field(blob, variant_name(w.config.variant));
    detail::put_field(blob, std::to_string(w.config.base_width));
    detail::put_field(blob, std::to_string(w.config.dense_layers));
    detail::put_field(blob, detail::join_widths(w.config.decoder_widths));
    detail::put_field(blob, std::to_string(w.layers.size()));
    for (const auto& layer : w.layers) {
        detail::put_field(blob, layer.name);
        detail::put_field(blob, layer_kind_name(layer.kind));
        detail::put_field(blob, std::to_string(layer.tensors.size()));
        for (const auto& [tname, t] : layer.tensors) {
            detail::put_field(blob, tname);
            detail::put_field(blob, std::to_string(t.channels()) + "," +
                                        std::to_string(t.height()) + "," +
                                        std::to_string(t.width()));
        }
    }
    for_each_tensor(w, [&](const Layer&, const std::string&, const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) detail::put_f32le(blob, t.data()[i]);
    });

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw io_error("short write to " + path.string());
}

inline GeneratorWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "FLW1", 4) != 0)
        throw format_error(path.string() + ": bad magic (not an FLW1 file)");

    detail::Reader r{bytes, 4};
    GeneratorWeights w;
    w.config.variant = parse_variant(r.field());
    w.config.base_width = detail::parse_int(r.field(), "base_width");
    w.config.dense_layers = detail::parse_int(r.field(), "dense_layers");
    w.config.decoder_widths = detail::split_widths(r.field());
    validate_config(w.config);

    const int layer_count = detail::parse_int(r.field(), "layer_count");
    std::size_t total_scalars = 0;
    for (int li = 0; li < layer_count; ++li) {
        Layer layer;
        layer.name = r.field();
        layer.kind = detail::parse_kind(r.field());
        const int tensor_count = detail::parse_int(r.field(), "tensor_count");
        for (int ti = 0; ti < tensor_count; ++ti) {
            const std::string tname = r.field();
            const std::vector<int> shape = detail::split_widths(r.field());
            if (shape.size() != 3) throw format_error("FLW1: bad tensor shape");
            layer.tensors.emplace_back(tname, Tensor(shape[0], shape[1], shape[2]));
            total_scalars += layer.tensors.back().second.size();
        }
        w.layers.push_back(std::move(layer));
    }

    const std::size_t expected = r.pos + 4 * total_scalars;
    if (bytes.size() != expected)
        throw format_error(path.string() + ": payload corrupt (expected " +
                           std::to_string(expected) + " bytes, got " +
                           std::to_string(bytes.size()) + ")");
    for_each_tensor(w, [&](const Layer&, const std::string&, Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const std::uint32_t v = r.u32le();
            t.data()[i] = std::bit_cast<float>(v);
        }
    });

    // rebuild meta (c_in/c_out/k/activation) from the config-derived
    // topology and cross-check the stored manifest against it
    GeneratorWeights expected_topo = build_generator(w.config, 0);
    if (expected_topo.layers.size() != w.layers.size())
        throw format_error(path.string() + ": layer manifest does not match config");
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        Layer& got = w.layers[i];
        const Layer& want = expected_topo.layers[i];
        if (got.name != want.name || got.kind != want.kind ||
            got.tensors.size() != want.tensors.size())
            throw format_error(path.string() + ": layer manifest does not match config");
        for (std::size_t ti = 0; ti < got.tensors.size(); ++ti)
            if (got.tensors[ti].first != want.tensors[ti].first ||
                !got.tensors[ti].second.same_shape(want.tensors[ti].second))
                throw format_error(path.string() + ": tensor shapes do not match config");
        got.c_in = want.c_in;
        got.c_out = want.c_out;
        got.k = want.k;
        got.act = want.act;
    }
    return w;
}

}  // namespace fuselite
