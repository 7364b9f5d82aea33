#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fuselite/tensor.hpp"

using namespace fuselite;

namespace {

Tensor random_tensor(std::mt19937& rng, int c, int h, int w, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(c, h, w);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float u = static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
        t.data()[i] = lo + (hi - lo) * u;
    }
    return t;
}

}  // namespace

TEST_CASE("tensor construction and fill") {
    Tensor zeros(1, 2, 2, 0.0f);
    REQUIRE(zeros.size() == 4);
    for (std::size_t i = 0; i < zeros.size(); ++i) REQUIRE(zeros.data()[i] == 0.0f);

    Tensor ones(3, 1, 1, 1.0f);
    REQUIRE(ones.size() == 3);
    for (std::size_t i = 0; i < ones.size(); ++i) REQUIRE(ones.data()[i] == 1.0f);

    Tensor halves(2, 2, 2, 0.5f);
    double sum = 0.0;
    for (std::size_t i = 0; i < halves.size(); ++i) sum += halves.data()[i];
    REQUIRE(sum == Catch::Approx(4.0));

    REQUIRE_THROWS_AS(Tensor(0, 2, 2), shape_error);
    REQUIRE_THROWS_AS(Tensor(1, 0, 2), shape_error);
    REQUIRE_THROWS_AS(Tensor(1, 2, 0), shape_error);
}

TEST_CASE("pad2d") {
    Tensor t(1, 1, 1, 7.0f);
    const Tensor padded = pad2d(t, 1);
    REQUIRE(padded.channels() == 1);
    REQUIRE(padded.height() == 3);
    REQUIRE(padded.width() == 3);
    REQUIRE(padded.at(0, 1, 1) == 7.0f);
    int zeros = 0;
    for (std::size_t i = 0; i < padded.size(); ++i)
        if (padded.data()[i] == 0.0f) ++zeros;
    REQUIRE(zeros == 8);

    Tensor ones(1, 2, 2, 1.0f);
    REQUIRE(pad2d(ones, 0) == ones);

    const Tensor p = pad2d(ones, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += p.data()[i];
    REQUIRE(sum == Catch::Approx(4.0));
}

TEST_CASE("concat_channels shapes and ordering") {
    REQUIRE(concat_channels(Tensor(1, 2, 2), Tensor(1, 2, 2)).channels() == 2);
    REQUIRE(concat_channels(Tensor(3, 4, 4), Tensor(5, 4, 4)).channels() == 8);
    REQUIRE_THROWS_AS(concat_channels(Tensor(1, 2, 2), Tensor(1, 3, 2)), shape_error);

    Tensor a(2, 3, 3, 1.0f);
    Tensor b(1, 3, 3, 0.0f);
    const Tensor cat = concat_channels(a, b);
    const ChannelVector means = reduce_spatial(cat, Reduce::Mean);
    REQUIRE(means[0] == 1.0f);
    REQUIRE(means[2] == 0.0f);
}

TEST_CASE("concat then slice recovers both inputs exactly") {
    std::mt19937 rng(7);
    const Tensor a = random_tensor(rng, 3, 4, 5);
    const Tensor b = random_tensor(rng, 2, 4, 5);
    const Tensor cat = concat_channels(a, b);
    REQUIRE(slice_channels(cat, 0, 3) == a);
    REQUIRE(slice_channels(cat, 3, 2) == b);
}

TEST_CASE("reduce_spatial") {
    Tensor c(3, 2, 2, 0.25f);
    const ChannelVector mean = reduce_spatial(c, Reduce::Mean);
    const ChannelVector mx = reduce_spatial(c, Reduce::Max);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(mean[i] == 0.25f);
        REQUIRE(mx[i] == 0.25f);
    }

    Tensor t(1, 2, 2);
    t.at(0, 0, 0) = 0.0f;
    t.at(0, 0, 1) = 1.0f;
    t.at(0, 1, 0) = 2.0f;
    t.at(0, 1, 1) = 3.0f;
    REQUIRE(reduce_spatial(t, Reduce::Mean)[0] == Catch::Approx(1.5));
    REQUIRE(reduce_spatial(t, Reduce::Max)[0] == 3.0f);

    // mean times h*w equals the channel sum
    std::mt19937 rng(11);
    const Tensor r = random_tensor(rng, 2, 3, 4);
    const ChannelVector m = reduce_spatial(r, Reduce::Mean);
    for (int ch = 0; ch < 2; ++ch) {
        double sum = 0.0;
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x) sum += r.at(ch, y, x);
        REQUIRE(static_cast<double>(m[ch]) * 12 == Catch::Approx(sum).margin(1e-5));
    }
}

TEST_CASE("reduce_channels") {
    std::mt19937 rng(3);
    const Tensor single = random_tensor(rng, 1, 3, 3);
    REQUIRE(reduce_channels(single, Reduce::Mean) == single);
    REQUIRE(reduce_channels(single, Reduce::Max) == single);

    Tensor two(2, 1, 1);
    two.at(0, 0, 0) = 2.0f;
    two.at(1, 0, 0) = 4.0f;
    REQUIRE(reduce_channels(two, Reduce::Mean).at(0, 0, 0) == 3.0f);
    REQUIRE(reduce_channels(two, Reduce::Max).at(0, 0, 0) == 4.0f);

    Tensor c(4, 2, 3, 0.75f);
    const Tensor mean = reduce_channels(c, Reduce::Mean);
    const Tensor mx = reduce_channels(c, Reduce::Max);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        REQUIRE(mean.data()[i] == 0.75f);
        REQUIRE(mx.data()[i] == 0.75f);
    }
}

TEST_CASE("padding only dilutes the spatial mean for nonnegative tensors") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int c = 1 + static_cast<int>(rng() % 3);
        const int h = 2 + static_cast<int>(rng() % 5);
        const int w = 2 + static_cast<int>(rng() % 5);
        const int pad = 1 + static_cast<int>(rng() % 3);
        const Tensor t = random_tensor(rng, c, h, w, 0.0f, 1.0f);
        const ChannelVector before = reduce_spatial(t, Reduce::Mean);
        const ChannelVector after = reduce_spatial(pad2d(t, pad), Reduce::Mean);
        const double scale = static_cast<double>(h) * w / ((h + 2.0 * pad) * (w + 2.0 * pad));
        for (int ch = 0; ch < c; ++ch)
            REQUIRE(after[ch] == Catch::Approx(before[ch] * scale).margin(1e-6));
    }
}

TEST_CASE("operations are deterministic") {
    std::mt19937 rng(5);
    const Tensor t = random_tensor(rng, 3, 5, 4);
    REQUIRE(pad2d(t, 2) == pad2d(t, 2));
    REQUIRE(reduce_channels(t, Reduce::Mean) == reduce_channels(t, Reduce::Mean));
    const ChannelVector a = reduce_spatial(t, Reduce::Mean);
    const ChannelVector b = reduce_spatial(t, Reduce::Mean);
    REQUIRE(a.data == b.data);
}
