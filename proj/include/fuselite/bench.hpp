#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fuselite/generator.hpp"

namespace fuselite {

// Inference benchmarking: one discarded warmup run, then `runs` timed
// forward passes on a deterministic synthetic pair. Wall-clock numbers are
// hardware-dependent and reported, never asserted against absolutes.

struct BenchResult {
    Variant variant = Variant::Lightweight;
    int h = 0;
    int w = 0;
    std::vector<double> samples;  // seconds, one per timed run
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::int64_t macs = 0;
};

/// Smooth synthetic pair for benchmarking (values in [0,1]).
inline std::pair<Tensor, Tensor> synthetic_pair(int h, int w) {
    Tensor ir(1, h, w), vi(1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            ir.at(0, y, x) = static_cast<float>(0.5 + 0.5 * std::sin(0.13 * x) * std::cos(0.07 * y));
            vi.at(0, y, x) = static_cast<float>(0.5 + 0.5 * std::sin(0.05 * x + 0.11 * y));
        }
    return {ir, vi};
}

inline BenchResult run_benchmark(const GeneratorWeights& weights, int h, int w, int runs) {
    if (runs < 5) throw argument_error("runs must be >= 5");
    const auto [ir, vi] = synthetic_pair(h, w);

    BenchResult result;
    result.variant = weights.config.variant;
    result.h = h;
    result.w = w;
    result.macs = cost_report(weights, h, w).macs;

    volatile float sink = 0.0f;  // keep the forward pass observable
    {
        const Tensor warm = forward_fuse(weights, ir, vi);
        sink = warm.at(0, 0, 0);
    }
    for (int i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor out = forward_fuse(weights, ir, vi);
        const auto t1 = std::chrono::steady_clock::now();
        sink = out.at(0, 0, 0);
        result.samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    (void)sink;

    result.mean = std::accumulate(result.samples.begin(), result.samples.end(), 0.0) /
                  static_cast<double>(result.samples.size());
    result.min = *std::min_element(result.samples.begin(), result.samples.end());
    result.max = *std::max_element(result.samples.begin(), result.samples.end());
    return result;
}

}  // namespace fuselite
