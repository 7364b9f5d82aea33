#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fuselite/metrics.hpp"
#include "metric_oracles.hpp"

using namespace fuselite;

namespace {

GrayImage random_image(std::mt19937& rng, int h, int w) {
    GrayImage img(h, w);
    for (float& v : img.pix) v = static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
    return img;
}

GrayImage coarse_random_image(std::mt19937& rng, int h, int w, int levels) {
    GrayImage img(h, w);
    for (float& v : img.pix)
        v = static_cast<float>(rng() % levels) / static_cast<float>(levels - 1);
    return img;
}

GrayImage horizontal_ramp(int h, int w) {
    GrayImage img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x) = static_cast<float>(x) / 255.0f;
    return img;
}

}  // namespace

TEST_CASE("entropy closed forms") {
    REQUIRE(entropy(GrayImage(8, 8, 0.4f)) == 0.0);

    GrayImage half(2, 8, 0.0f);
    for (int x = 0; x < 8; ++x) half.at(1, x) = 1.0f;
    REQUIRE(entropy(half) == Catch::Approx(1.0).margin(1e-12));

    GrayImage uniform(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) uniform.at(y, x) = static_cast<float>(y) / 255.0f;
    REQUIRE(entropy(uniform) == Catch::Approx(8.0).margin(1e-9));
    REQUIRE(entropy(uniform) <= 8.0 + 1e-12);
}

TEST_CASE("entropy is permutation invariant and bounded by 8") {
    std::mt19937 rng(71);
    GrayImage img = random_image(rng, 16, 16);
    const double before = entropy(img);
    REQUIRE(before <= 8.0);
    std::shuffle(img.pix.begin(), img.pix.end(), rng);
    REQUIRE(entropy(img) == Catch::Approx(before).margin(1e-12));
}

TEST_CASE("mutual information identities") {
    std::mt19937 rng(72);
    const GrayImage x = random_image(rng, 16, 16);
    REQUIRE(mutual_information(x, x) == Catch::Approx(entropy(x)).margin(1e-9));

    const GrayImage constant(16, 16, 0.3f);
    REQUIRE(mutual_information(constant, x) == Catch::Approx(0.0).margin(1e-12));

    GrayImage inverted(16, 16);
    for (std::size_t i = 0; i < x.pix.size(); ++i) inverted.pix[i] = 1.0f - x.pix[i];
    REQUIRE(mutual_information(x, inverted) == Catch::Approx(entropy(x)).margin(1e-9));

    const GrayImage y = random_image(rng, 16, 16);
    REQUIRE(mutual_information(x, y) == Catch::Approx(mutual_information(y, x)).margin(1e-12));
    REQUIRE(mutual_information(x, y) <= std::min(entropy(x), entropy(y)) + 1e-9);

    REQUIRE_THROWS_AS(mutual_information(x, GrayImage(8, 8)), shape_error);
}

TEST_CASE("mi_fusion composition") {
    std::mt19937 rng(73);
    const GrayImage f = random_image(rng, 16, 16);
    REQUIRE(mi_fusion(f, f, f) == Catch::Approx(2.0 * entropy(f)).margin(1e-9));

    const GrayImage constant(16, 16, 0.5f);
    const GrayImage a = random_image(rng, 16, 16);
    const GrayImage b = random_image(rng, 16, 16);
    REQUIRE(mi_fusion(constant, a, b) == Catch::Approx(0.0).margin(1e-12));

    // with few gray levels the finite-sample cross term is tiny, so
    // mi_fusion(ir, ir, vi) ~ entropy(ir)
    const GrayImage ir = coarse_random_image(rng, 32, 32, 3);
    const GrayImage vi = coarse_random_image(rng, 32, 32, 3);
    REQUIRE(mi_fusion(ir, ir, vi) == Catch::Approx(entropy(ir)).margin(0.05));
}

TEST_CASE("spatial frequency closed forms") {
    REQUIRE(spatial_frequency(GrayImage(8, 8, 0.7f)) == 0.0);
    REQUIRE(spatial_frequency(horizontal_ramp(8, 32)) == Catch::Approx(1.0).margin(1e-6));

    GrayImage checker(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) checker.at(y, x) = ((x + y) % 2) ? 1.0f : 0.0f;
    REQUIRE(spatial_frequency(checker) == Catch::Approx(255.0 * std::sqrt(2.0)).margin(1e-9));

    REQUIRE_THROWS_AS(spatial_frequency(GrayImage(1, 8)), argument_error);
}

TEST_CASE("average gradient closed forms") {
    REQUIRE(average_gradient(GrayImage(8, 8, 0.2f)) == 0.0);
    REQUIRE(average_gradient(horizontal_ramp(8, 32)) ==
            Catch::Approx(std::sqrt(0.5)).margin(1e-6));

    GrayImage diagonal(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) diagonal.at(y, x) = static_cast<float>(x + y) / 255.0f;
    REQUIRE(average_gradient(diagonal) == Catch::Approx(1.0).margin(1e-6));

    REQUIRE_THROWS_AS(average_gradient(GrayImage(8, 1)), argument_error);
}

TEST_CASE("SF and AG are invariant under on-grid intensity shifts") {
    std::mt19937 rng(74);
    GrayImage img = random_image(rng, 12, 12);
    for (float& v : img.pix) v = 0.2f + 0.5f * v;  // keep room for the shift
    const double sf0 = spatial_frequency(img);
    const double ag0 = average_gradient(img);
    GrayImage shifted = img;
    for (float& v : shifted.pix) v += 16.0f / 255.0f;
    REQUIRE(spatial_frequency(shifted) == Catch::Approx(sf0).margin(1e-9));
    REQUIRE(average_gradient(shifted) == Catch::Approx(ag0).margin(1e-9));
}

TEST_CASE("psnr closed forms and cap") {
    std::mt19937 rng(75);
    const GrayImage x = random_image(rng, 16, 16);
    REQUIRE(psnr_fusion(x, x, x) == 100.0);

    GrayImage lo(8, 8), hi(8, 8), mid(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x2 = 0; x2 < 8; ++x2) {
            const int base = 40 + 8 * y + x2;
            lo.at(y, x2) = static_cast<float>(base) / 255.0f;
            hi.at(y, x2) = static_cast<float>(base + 32) / 255.0f;
            mid.at(y, x2) = static_cast<float>(base + 16) / 255.0f;
        }
    // |mid-lo| = |mid-hi| = 16 gray levels everywhere -> MSE 256
    REQUIRE(psnr_fusion(mid, lo, hi) ==
            Catch::Approx(10.0 * std::log10(65025.0 / 256.0)).margin(1e-12));
    REQUIRE(psnr_fusion(mid, lo, hi) == Catch::Approx(24.048).margin(1e-3));
    // f equals one source, 16 levels from the other -> MSE 128
    REQUIRE(psnr_fusion(mid, lo, mid) ==
            Catch::Approx(10.0 * std::log10(65025.0 / 128.0)).margin(1e-12));
    REQUIRE(psnr_fusion(mid, lo, mid) == Catch::Approx(27.058).margin(1e-3));
}

TEST_CASE("psnr decreases as noise amplitude grows") {
    std::mt19937 rng(76);
    const GrayImage base = random_image(rng, 16, 16);
    double prev = 1e9;
    for (const float amp : {0.05f, 0.1f, 0.2f}) {
        GrayImage noisy = base;
        std::mt19937 noise_rng(99);  // same noise shape, scaled
        for (float& v : noisy.pix) {
            const float u = static_cast<float>(noise_rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;
            v = std::min(1.0f, std::max(0.0f, v + amp * u));
        }
        const double p = psnr_fusion(noisy, base, base);
        REQUIRE(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim identities and closed forms") {
    std::mt19937 rng(77);
    const GrayImage x = random_image(rng, 16, 16);
    REQUIRE(ssim(x, x) == Catch::Approx(1.0).margin(1e-12));

    const GrayImage zeros(12, 12, 0.0f);
    const GrayImage ones(12, 12, 1.0f);
    const double c1 = 2.55 * 2.55;
    REQUIRE(ssim(zeros, ones) == Catch::Approx(c1 / (65025.0 + c1)).margin(1e-9));

    GrayImage inverted(16, 16);
    for (std::size_t i = 0; i < x.pix.size(); ++i) inverted.pix[i] = 1.0f - x.pix[i];
    REQUIRE(ssim(x, inverted) < 0.0);

    REQUIRE_THROWS_AS(ssim(GrayImage(10, 10), GrayImage(10, 10)), argument_error);
}

TEST_CASE("ssim_fusion composition and symmetry") {
    std::mt19937 rng(78);
    const GrayImage ir = random_image(rng, 16, 16);
    const GrayImage vi = random_image(rng, 16, 16);
    REQUIRE(ssim_fusion(ir, ir, ir) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(ssim_fusion(ir, ir, vi) ==
            Catch::Approx(0.5 * (1.0 + ssim(ir, vi))).margin(1e-12));
    REQUIRE(ssim_fusion(ir, ir, vi) == Catch::Approx(ssim_fusion(ir, vi, ir)).margin(1e-12));
}

TEST_CASE("evaluate_all on a degenerate triple") {
    std::mt19937 rng(79);
    const GrayImage f = random_image(rng, 32, 32);
    const MetricReport r = evaluate_all(f, f, f);
    REQUIRE(r.en == entropy(f));
    REQUIRE(r.mi == Catch::Approx(2.0 * r.en).margin(1e-9));
    REQUIRE(r.sf > 0.0);
    REQUIRE(r.ag > 0.0);
    REQUIRE(r.psnr == 100.0);
    REQUIRE(r.ssim == Catch::Approx(1.0).margin(1e-12));

    // fields match the individually-called ops bit-exactly
    REQUIRE(r.mi == mi_fusion(f, f, f));
    REQUIRE(r.sf == spatial_frequency(f));
    REQUIRE(r.ag == average_gradient(f));
    REQUIRE(r.psnr == psnr_fusion(f, f, f));
    REQUIRE(r.ssim == ssim_fusion(f, f, f));
}

TEST_CASE("all six metrics agree with the brute-force oracles") {
    std::mt19937 rng(80);
    for (int trial = 0; trial < 10; ++trial) {
        const GrayImage f = random_image(rng, 16, 16);
        const GrayImage ir = random_image(rng, 16, 16);
        const GrayImage vi = random_image(rng, 16, 16);
        REQUIRE(entropy(f) == Catch::Approx(oracle::entropy(f)).margin(1e-6));
        REQUIRE(mi_fusion(f, ir, vi) == Catch::Approx(oracle::mi_fusion(f, ir, vi)).margin(1e-6));
        REQUIRE(spatial_frequency(f) ==
                Catch::Approx(oracle::spatial_frequency(f)).margin(1e-6));
        REQUIRE(average_gradient(f) == Catch::Approx(oracle::average_gradient(f)).margin(1e-6));
        REQUIRE(psnr_fusion(f, ir, vi) ==
                Catch::Approx(oracle::psnr_fusion(f, ir, vi)).margin(1e-6));
        REQUIRE(ssim_fusion(f, ir, vi) ==
                Catch::Approx(oracle::ssim_fusion(f, ir, vi)).margin(1e-6));
    }
}
