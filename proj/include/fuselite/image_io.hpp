#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "fuselite/errors.hpp"
#include "fuselite/metrics.hpp"

namespace fuselite {

// Image I/O. Binary PGM (P5, maxval 255) is the canonical format and
// round-trips 8-bit content exactly. 8-bit non-interlaced PNG (gray, RGB,
// and their alpha variants; alpha ignored) is read-only; color collapses to
// luma Y = 0.299 R + 0.587 G + 0.114 B.

struct ImagePair {
    std::string name;
    GrayImage ir;
    GrayImage vi;
};

struct PairList {
    std::vector<ImagePair> pairs;        // sorted by name
    std::vector<std::string> unmatched;  // stems present on only one side
};

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

// --- PGM ---------------------------------------------------------------

inline std::size_t pnm_token(const std::vector<unsigned char>& b, std::size_t pos,
                             std::string& out) {
    // skip whitespace and '#' comment lines
    while (pos < b.size()) {
        if (std::isspace(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    out.clear();
    while (pos < b.size() && !std::isspace(b[pos])) out.push_back(static_cast<char>(b[pos++]));
    if (out.empty()) throw format_error("truncated PGM header");
    return pos;
}

inline GrayImage read_pgm(const std::vector<unsigned char>& bytes, const std::string& name) {
    std::string tok;
    std::size_t pos = pnm_token(bytes, 0, tok);
    if (tok != "P5") throw format_error(name + ": not a binary PGM (P5)");
    pos = pnm_token(bytes, pos, tok);
    const int w = std::stoi(tok);
    pos = pnm_token(bytes, pos, tok);
    const int h = std::stoi(tok);
    pos = pnm_token(bytes, pos, tok);
    const int maxval = std::stoi(tok);
    if (maxval != 255) throw format_error(name + ": unsupported PGM maxval " + tok);
    ++pos;  // single whitespace byte after maxval
    if (w < 1 || h < 1) throw format_error(name + ": bad PGM dimensions");
    const std::size_t need = static_cast<std::size_t>(w) * h;
    if (bytes.size() < pos + need)
        throw format_error(name + ": PGM payload truncated (expected " + std::to_string(need) +
                           " bytes, got " + std::to_string(bytes.size() - pos) + ")");
    GrayImage img(h, w);
    for (std::size_t i = 0; i < need; ++i)
        img.pix[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
    return img;
}

// --- PNG ---------------------------------------------------------------

inline std::uint32_t be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

inline bool is_png(const std::vector<unsigned char>& b) {
    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

inline GrayImage read_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    std::size_t pos = 8;
    int w = 0, h = 0, bit_depth = 0, color_type = 0;
    bool seen_ihdr = false;
    std::vector<unsigned char> idat;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw format_error(name + ": truncated PNG chunk");
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const unsigned char* data = &bytes[pos + 8];
        if (type == "IHDR") {
            if (len != 13) throw format_error(name + ": bad IHDR");
            w = static_cast<int>(be32(data));
            h = static_cast<int>(be32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[10] != 0 || data[11] != 0) throw format_error(name + ": bad PNG compression");
            if (data[12] != 0) throw format_error(name + ": interlaced PNG unsupported");
            if (bit_depth != 8) throw format_error(name + ": only 8-bit PNG supported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                throw format_error(name + ": unsupported PNG color type " +
                                   std::to_string(color_type));
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || idat.empty()) throw format_error(name + ": missing PNG data");
    if (w < 1 || h < 1) throw format_error(name + ": bad PNG dimensions");

    const int bpp = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const std::size_t stride = static_cast<std::size_t>(w) * bpp;
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw format_error(name + ": PNG inflate failed");

    // defilter in place, scanline by scanline
    std::vector<unsigned char> img(static_cast<std::size_t>(h) * stride);
    for (int y = 0; y < h; ++y) {
        const unsigned char filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
        const unsigned char* src = &raw[static_cast<std::size_t>(y) * (stride + 1) + 1];
        unsigned char* dst = &img[static_cast<std::size_t>(y) * stride];
        const unsigned char* up = y > 0 ? dst - stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw format_error(name + ": unknown PNG filter");
            }
            dst[i] = static_cast<unsigned char>(v & 0xff);
        }
    }

    GrayImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const unsigned char* px = &img[(static_cast<std::size_t>(y) * w + x) * bpp];
            double v;
            if (bpp <= 2)
                v = px[0] / 255.0;
            else
                v = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
            out.at(y, x) = static_cast<float>(v);
        }
    return out;
}

}  // namespace detail

/// Reads a grayscale image from PGM or PNG; values land in [0,1].
inline GrayImage read_gray(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = detail::read_file_bytes(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
        return detail::read_pgm(bytes, path.string());
    if (detail::is_png(bytes)) return detail::read_png(bytes, path.string());
    throw format_error(path.string() + ": unknown image format");
}

/// Writes binary PGM, rounding half away from zero onto the 8-bit grid.
inline void write_gray(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << "P5\n" << img.w << ' ' << img.h << "\n255\n";
    std::vector<unsigned char> bytes(img.pix.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const float v = std::min(1.0f, std::max(0.0f, img.pix[i]));
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write to " + path.string());
}

/// Bilinear resample to (out_h, out_w) using half-pixel centers.
inline GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw argument_error("resize: target dimensions must be >= 1");
    if (out_h == img.h && out_w == img.w) return img;
    GrayImage out(out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0),
                                   static_cast<double>(img.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0),
                                       static_cast<double>(img.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
            const double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

/// Scans root/ir and root/vi for .pgm/.png files and pairs them by filename
/// stem. Pairs come back sorted; one-sided stems are reported in
/// `unmatched`, not loaded.
inline PairList load_pairs(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const fs::path ir_dir = root / "ir";
    const fs::path vi_dir = root / "vi";
    if (!fs::is_directory(ir_dir)) throw dataset_error("missing subdirectory " + ir_dir.string());
    if (!fs::is_directory(vi_dir)) throw dataset_error("missing subdirectory " + vi_dir.string());

    const auto scan = [](const fs::path& dir) {
        std::map<std::string, fs::path> files;  // stem -> path, sorted
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".pgm" || ext == ".png") files[entry.path().stem().string()] = entry.path();
        }
        return files;
    };

    const auto ir_files = scan(ir_dir);
    const auto vi_files = scan(vi_dir);

    PairList out;
    for (const auto& [stem, ir_path] : ir_files) {
        const auto it = vi_files.find(stem);
        if (it == vi_files.end()) {
            out.unmatched.push_back(stem);
            continue;
        }
        ImagePair pair;
        pair.name = stem;
        pair.ir = read_gray(ir_path);
        pair.vi = read_gray(it->second);
        if (pair.ir.h != pair.vi.h || pair.ir.w != pair.vi.w)
            throw dataset_error("pair '" + stem + "' has mismatched dimensions (" +
                                ir_path.string() + " vs " + it->second.string() + ")");
        out.pairs.push_back(std::move(pair));
    }
    for (const auto& [stem, path] : vi_files)
        if (!ir_files.count(stem)) out.unmatched.push_back(stem);
    std::sort(out.unmatched.begin(), out.unmatched.end());
    return out;
}

}  // namespace fuselite
