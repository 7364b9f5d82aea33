#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fuselite/errors.hpp"
#include "fuselite/tensor.hpp"

namespace fuselite {

// Fusion-quality metrics. Every metric first snaps pixel values onto the
// 8-bit grid (round half away from zero to 0..255) and then works in double
// on that grid: EN/MI from 256-bin histograms, SF/AG/PSNR/SSIM directly on
// the 0..255 values. The shared quantization keeps all six mutually
// consistent and makes the closed-form spot values exact.

struct GrayImage {
    GrayImage() = default;
    GrayImage(int h_, int w_, float fill = 0.0f) : h(h_), w(w_) {
        if (h_ < 1 || w_ < 1) throw shape_error("image dimensions must be >= 1");
        pix.assign(static_cast<std::size_t>(h_) * w_, fill);
    }

    float& at(int y, int x) { return pix[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return pix[static_cast<std::size_t>(y) * w + x]; }

    int h = 0;
    int w = 0;
    std::vector<float> pix;  // values in [0,1]
};

struct MetricReport {
    double en = 0.0;
    double mi = 0.0;
    double sf = 0.0;
    double ag = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

inline GrayImage gray_from_tensor(const Tensor& t) {
    if (t.channels() != 1) throw shape_error("gray_from_tensor: expected single channel");
    GrayImage img(t.height(), t.width());
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        img.pix[i] = std::min(1.0f, std::max(0.0f, t.data()[i]));
    return img;
}

inline Tensor tensor_from_gray(const GrayImage& img) {
    Tensor t(1, img.h, img.w);
    std::copy(img.pix.begin(), img.pix.end(), t.data());
    return t;
}

namespace detail {

inline int quantize255(float v) {
    const long q = std::lround(static_cast<double>(v) * 255.0);
    return static_cast<int>(std::min(255L, std::max(0L, q)));
}

inline std::vector<int> quantized(const GrayImage& img) {
    std::vector<int> q(img.pix.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = quantize255(img.pix[i]);
    return q;
}

inline void require_same_size(const GrayImage& a, const GrayImage& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw shape_error(std::string(op) + ": image sizes differ");
}

}  // namespace detail

/// Shannon entropy of the 256-bin histogram, in bits.
inline double entropy(const GrayImage& img) {
    std::array<std::int64_t, 256> hist{};
    for (float v : img.pix) ++hist[static_cast<std::size_t>(detail::quantize255(v))];
    const double n = static_cast<double>(img.pix.size());
    double en = 0.0;
    for (std::int64_t c : hist)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            en -= p * std::log2(p);
        }
    return en;
}

/// Mutual information from the 256x256 joint histogram, in bits.
inline double mutual_information(const GrayImage& a, const GrayImage& b) {
    detail::require_same_size(a, b, "mutual_information");
    std::vector<std::int64_t> joint(256 * 256, 0);
    const std::vector<int> qa = detail::quantized(a);
    const std::vector<int> qb = detail::quantized(b);
    for (std::size_t i = 0; i < qa.size(); ++i)
        ++joint[static_cast<std::size_t>(qa[i]) * 256 + qb[i]];

    std::array<std::int64_t, 256> ma{}, mb{};
    for (int x = 0; x < 256; ++x)
        for (int y = 0; y < 256; ++y) {
            const std::int64_t c = joint[static_cast<std::size_t>(x) * 256 + y];
            ma[static_cast<std::size_t>(x)] += c;
            mb[static_cast<std::size_t>(y)] += c;
        }

    const double n = static_cast<double>(qa.size());
    double mi = 0.0;
    for (int x = 0; x < 256; ++x)
        for (int y = 0; y < 256; ++y) {
            const std::int64_t c = joint[static_cast<std::size_t>(x) * 256 + y];
            if (c > 0) {
                const double pxy = static_cast<double>(c) / n;
                const double px = static_cast<double>(ma[static_cast<std::size_t>(x)]) / n;
                const double py = static_cast<double>(mb[static_cast<std::size_t>(y)]) / n;
                mi += pxy * std::log2(pxy / (px * py));
            }
        }
    return mi;
}

/// Fusion MI: summed over both sources.
inline double mi_fusion(const GrayImage& f, const GrayImage& ir, const GrayImage& vi) {
    return mutual_information(f, ir) + mutual_information(f, vi);
}

/// Row/column RMS of neighbor differences on the 0..255 scale, combined in
/// quadrature.
inline double spatial_frequency(const GrayImage& img) {
    if (img.h < 2 || img.w < 2) throw argument_error("spatial_frequency: image must be >= 2x2");
    const std::vector<int> q = detail::quantized(img);
    const auto at = [&](int y, int x) {
        return static_cast<double>(q[static_cast<std::size_t>(y) * img.w + x]);
    };
    double rf = 0.0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 1; x < img.w; ++x) {
            const double d = at(y, x) - at(y, x - 1);
            rf += d * d;
        }
    rf /= static_cast<double>(img.h) * (img.w - 1);
    double cf = 0.0;
    for (int y = 1; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const double d = at(y, x) - at(y - 1, x);
            cf += d * d;
        }
    cf /= static_cast<double>(img.h - 1) * img.w;
    return std::sqrt(rf + cf);
}

/// Mean of sqrt((dx^2 + dy^2) / 2) over the (h-1)x(w-1) forward-difference
/// grid, 0..255 scale.
inline double average_gradient(const GrayImage& img) {
    if (img.h < 2 || img.w < 2) throw argument_error("average_gradient: image must be >= 2x2");
    const std::vector<int> q = detail::quantized(img);
    const auto at = [&](int y, int x) {
        return static_cast<double>(q[static_cast<std::size_t>(y) * img.w + x]);
    };
    double acc = 0.0;
    for (int y = 0; y + 1 < img.h; ++y)
        for (int x = 0; x + 1 < img.w; ++x) {
            const double dx = at(y, x + 1) - at(y, x);
            const double dy = at(y + 1, x) - at(y, x);
            acc += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    return acc / (static_cast<double>(img.h - 1) * (img.w - 1));
}

namespace detail {

inline double mse255(const GrayImage& a, const GrayImage& b) {
    const std::vector<int> qa = quantized(a);
    const std::vector<int> qb = quantized(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < qa.size(); ++i) {
        const double d = static_cast<double>(qa[i] - qb[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(qa.size());
}

}  // namespace detail

inline constexpr double kPsnrCap = 100.0;

/// PSNR against both sources via the averaged MSE; capped at 100 dB when
/// the error underflows (identical images).
inline double psnr_fusion(const GrayImage& f, const GrayImage& ir, const GrayImage& vi) {
    detail::require_same_size(f, ir, "psnr_fusion");
    detail::require_same_size(f, vi, "psnr_fusion");
    const double mse = 0.5 * (detail::mse255(f, ir) + detail::mse255(f, vi));
    const double peak2 = 255.0 * 255.0;
    if (mse < peak2 * 1e-10) return kPsnrCap;
    return 10.0 * std::log10(peak2 / mse);
}

/// Classical single-scale SSIM: 11x11 Gaussian window (sigma 1.5),
/// C1=(0.01*255)^2, C2=(0.03*255)^2, averaged over valid window positions.
inline double ssim(const GrayImage& a, const GrayImage& b) {
    detail::require_same_size(a, b, "ssim");
    constexpr int kWin = 11;
    if (a.h < kWin || a.w < kWin) throw argument_error("ssim: image smaller than 11x11 window");

    static const std::array<double, kWin * kWin> window = [] {
        std::array<double, kWin * kWin> win{};
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                const double di = i - kWin / 2, dj = j - kWin / 2;
                win[static_cast<std::size_t>(i) * kWin + j] =
                    std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
                sum += win[static_cast<std::size_t>(i) * kWin + j];
            }
        for (double& v : win) v /= sum;
        return win;
    }();

    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    const std::vector<int> qa = detail::quantized(a);
    const std::vector<int> qb = detail::quantized(b);

    double total = 0.0;
    int count = 0;
    for (int y = 0; y + kWin <= a.h; ++y)
        for (int x = 0; x + kWin <= a.w; ++x) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double wgt = window[static_cast<std::size_t>(i) * kWin + j];
                    const double va = qa[static_cast<std::size_t>(y + i) * a.w + (x + j)];
                    const double vb = qb[static_cast<std::size_t>(y + i) * a.w + (x + j)];
                    mx += wgt * va;
                    my += wgt * vb;
                    sxx += wgt * va * va;
                    syy += wgt * vb * vb;
                    sxy += wgt * va * vb;
                }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cov = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

/// Fusion SSIM: mean of the two pairwise scores.
inline double ssim_fusion(const GrayImage& f, const GrayImage& ir, const GrayImage& vi) {
    return 0.5 * (ssim(f, ir) + ssim(f, vi));
}

inline MetricReport evaluate_all(const GrayImage& f, const GrayImage& ir, const GrayImage& vi) {
    MetricReport r;
    r.en = entropy(f);
    r.mi = mi_fusion(f, ir, vi);
    r.sf = spatial_frequency(f);
    r.ag = average_gradient(f);
    r.psnr = psnr_fusion(f, ir, vi);
    r.ssim = ssim_fusion(f, ir, vi);
    return r;
}

}  // namespace fuselite
