// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any hard criterion fails. Soft checks warn instead of failing.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "fuselite/fuselite.hpp"
#include "metric_oracles.hpp"

using namespace fuselite;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, bool pass, const std::string& what) {
    std::printf("[%d/9] %s %s\n", index, pass ? "PASS" : "FAIL", what.c_str());
    if (!pass) ++g_failures;
}

void warn(const std::string& what) { std::printf("      WARN %s\n", what.c_str()); }

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

GrayImage random_image(std::mt19937& rng, int h, int w) {
    GrayImage img(h, w);
    for (float& v : img.pix) v = static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
    return img;
}

// --- criteria -------------------------------------------------------------

void criterion_1_parameter_reduction() {
    GeneratorConfig light;
    GeneratorConfig base;
    base.variant = Variant::Baseline;
    const std::int64_t pl = cost_report(build_generator(light, 1), 320, 320).params;
    const std::int64_t pb = cost_report(build_generator(base, 1), 320, 320).params;
    const double ratio = static_cast<double>(pl) / static_cast<double>(pb);
    const bool pass = pl == 25156 && pb == 148545 && ratio >= 0.10 && ratio <= 0.20;
    report(1, pass,
           "parameter reduction: lightweight " + std::to_string(pl) + " / baseline " +
               std::to_string(pb) + ", ratio " + fmt(ratio) + " in [0.10, 0.20]");
}

void criterion_2_mac_and_latency() {
    GeneratorConfig light_cfg;
    GeneratorConfig base_cfg;
    base_cfg.variant = Variant::Baseline;
    const GeneratorWeights light = build_generator(light_cfg, 1);
    const GeneratorWeights base = build_generator(base_cfg, 1);
    const std::int64_t ml = cost_report(light, 320, 320).macs;
    const std::int64_t mb = cost_report(base, 320, 320).macs;
    const bool mac_ok = 4 * ml < mb;

    const BenchResult bl = run_benchmark(light, 320, 320, 5);
    const BenchResult bb = run_benchmark(base, 320, 320, 5);
    const bool time_ok = bl.mean <= bb.mean;
    report(2, mac_ok && time_ok,
           "MAC reduction: lightweight " + std::to_string(ml) + " vs baseline " +
               std::to_string(mb) + " (" + fmt(100.0 * ml / mb, 2) +
               "% < 25%); mean latency " + fmt(bl.mean) + "s <= " + fmt(bb.mean) + "s");
}

void criterion_3_gradients() {
    const std::vector<GradCheckResult> results = run_gradcheck(0);
    double worst = 0.0;
    std::string worst_op = "-";
    for (const auto& r : results)
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_op = r.op;
        }
    report(3, gradcheck_passed(results),
           "gradient check: " + std::to_string(results.size()) +
               " ops vs central differences, worst " + worst_op + " at " + fmt(worst, 10));
}

void criterion_4_metric_oracles() {
    std::mt19937 rng(2024);
    bool pass = true;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const GrayImage f = random_image(rng, 16, 16);
        const GrayImage ir = random_image(rng, 16, 16);
        const GrayImage vi = random_image(rng, 16, 16);
        const double diffs[6] = {
            std::abs(entropy(f) - oracle::entropy(f)),
            std::abs(mi_fusion(f, ir, vi) - oracle::mi_fusion(f, ir, vi)),
            std::abs(spatial_frequency(f) - oracle::spatial_frequency(f)),
            std::abs(average_gradient(f) - oracle::average_gradient(f)),
            std::abs(psnr_fusion(f, ir, vi) - oracle::psnr_fusion(f, ir, vi)),
            std::abs(ssim_fusion(f, ir, vi) - oracle::ssim_fusion(f, ir, vi)),
        };
        for (double d : diffs) {
            worst = std::max(worst, d);
            pass &= d < 1e-6;
        }
    }

    const GrayImage x = random_image(rng, 16, 16);
    pass &= std::abs(mutual_information(x, x) - entropy(x)) <= 1e-9;
    pass &= ssim(x, x) == 1.0;
    pass &= entropy(GrayImage(16, 16, 0.37f)) == 0.0;
    pass &= spatial_frequency(GrayImage(16, 16, 0.37f)) == 0.0;
    pass &= average_gradient(GrayImage(16, 16, 0.37f)) == 0.0;
    pass &= psnr_fusion(x, x, x) == 100.0;
    report(4, pass,
           "metric oracles: six metrics within 1e-6 of brute force on 10 triples (worst " +
               fmt(worst, 9) + "), identities exact");
}

void criterion_5_closed_forms() {
    GrayImage ramp(8, 32);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 32; ++x) ramp.at(y, x) = static_cast<float>(x) / 255.0f;
    const double ag = average_gradient(ramp);
    const double sf = spatial_frequency(ramp);

    GrayImage lo(8, 8), hi(8, 8), mid(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const int base = 40 + 8 * y + x;
            lo.at(y, x) = static_cast<float>(base) / 255.0f;
            hi.at(y, x) = static_cast<float>(base + 32) / 255.0f;
            mid.at(y, x) = static_cast<float>(base + 16) / 255.0f;
        }
    const double psnr = psnr_fusion(mid, lo, hi);

    GrayImage uniform(256, 256);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) uniform.at(y, x) = static_cast<float>(y) / 255.0f;
    const double en = entropy(uniform);

    const bool pass = std::abs(ag - std::sqrt(0.5)) < 1e-6 && std::abs(sf - 1.0) < 1e-6 &&
                      std::abs(psnr - 24.048) < 1e-3 && std::abs(en - 8.0) < 1e-9;
    report(5, pass,
           "closed-form spot values: ramp AG " + fmt(ag, 6) + ", ramp SF " + fmt(sf, 6) +
               ", 16-level PSNR " + fmt(psnr, 4) + " dB, uniform EN " + fmt(en, 10));
}

void criterion_6_cbam() {
    std::mt19937 rng(7);
    Tensor f(8, 12, 12);
    for (std::size_t i = 0; i < f.size(); ++i)
        f.data()[i] = static_cast<float>(rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;
    CbamParams p = CbamParams::zeros(8);
    for (std::size_t i = 0; i < p.w0.size(); ++i)
        p.w0.data()[i] = static_cast<float>(rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;
    for (std::size_t i = 0; i < p.w1.size(); ++i)
        p.w1.data()[i] = static_cast<float>(rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;
    for (std::size_t i = 0; i < p.spatial_kernel.size(); ++i)
        p.spatial_kernel.data()[i] = static_cast<float>(rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;

    const CbamTrace trace = cbam(f, p);
    bool pass = true;
    for (int c = 0; c < 8; ++c) pass &= trace.mc[c] > 0.0f && trace.mc[c] < 1.0f;
    for (std::size_t i = 0; i < trace.ms.size(); ++i)
        pass &= trace.ms.data()[i] > 0.0f && trace.ms.data()[i] < 1.0f;
    for (std::size_t i = 0; i < f.size(); ++i)
        pass &= std::abs(trace.f_double_prime.data()[i]) <= std::abs(f.data()[i]);

    const CbamTrace zero_trace = cbam(f, CbamParams::zeros(8));
    for (std::size_t i = 0; i < f.size(); ++i)
        pass &= zero_trace.f_double_prime.data()[i] == 0.25f * f.data()[i];

    // hand case: pools (1,0) and (2,0) through identity MLPs -> sigma(3)
    Tensor hand(2, 1, 2, 0.0f);
    hand.at(0, 0, 1) = 2.0f;
    CbamParams identity = CbamParams::with_hidden(2, 2);
    identity.w0.at(0, 0, 0) = 1.0f;
    identity.w0.at(0, 1, 1) = 1.0f;
    identity.w1.at(0, 0, 0) = 1.0f;
    identity.w1.at(0, 1, 1) = 1.0f;
    const auto [mc, f_prime] = channel_attention(hand, identity);
    pass &= std::abs(mc[0] - 0.95257f) < 1e-5f;
    pass &= mc[1] == 0.5f;

    report(6, pass,
           "CBAM invariants: gains in (0,1), |F''| <= |F|, zero-param cascade = 0.25 F, "
           "hand sigma(3) = " + fmt(mc[0], 5));
}

void criterion_7_toy_training() {
    std::vector<TrainPair> dataset;
    std::mt19937 rng(17);
    for (int i = 0; i < 8; ++i) {
        Tensor ir(1, 32, 32), vi(1, 32, 32);
        const float cy = 8.0f + static_cast<float>(rng() % 16);
        const float cx = 8.0f + static_cast<float>(rng() % 16);
        const float phase = static_cast<float>(rng() % 628) / 100.0f;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const float d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                ir.at(0, y, x) = 0.2f + 0.7f * std::exp(-d2 / 40.0f);  // thermal blob
                vi.at(0, y, x) =
                    0.5f + 0.3f * std::sin(0.5f * x + phase) * std::cos(0.4f * y - phase);
            }
        dataset.push_back({ir, vi});
    }

    // toy-scale generator: at the schedule's 0.1 plateau AdamW moves every
    // weight by ~lr per step, so the paper-width net only jitters; the
    // narrow net trains through it
    GeneratorConfig cfg;
    cfg.base_width = 8;
    cfg.dense_layers = 2;
    cfg.decoder_widths = {8, 1};
    const TrainResult adamw = train_toy(cfg, dataset, 200, OptimizerKind::AdamW, 1);
    const double initial = adamw.curve.front().second;
    const double final_loss = adamw.curve.back().second;
    bool finite = true;
    for (const auto& [step, loss] : adamw.curve) finite &= std::isfinite(loss);

    const TrainResult rerun = train_toy(cfg, dataset, 200, OptimizerKind::AdamW, 1);
    const bool deterministic = rerun.curve == adamw.curve;

    const bool pass = final_loss <= 0.5 * initial && finite && deterministic;
    report(7, pass,
           "toy training: 200 AdamW steps on 8 synthetic 32x32 pairs, loss " + fmt(initial, 4) +
               " -> " + fmt(final_loss, 4) + " (<= 50%), curve finite, deterministic");

    const TrainResult sgd = train_toy(cfg, dataset, 200, OptimizerKind::SgdMomentum, 1);
    if (final_loss > sgd.curve.back().second)
        warn("soft check: AdamW final loss " + fmt(final_loss, 4) + " > SGD final loss " +
             fmt(sgd.curve.back().second, 4));
}

void criterion_8_serialization() {
    const fs::path dir =
        fs::temp_directory_path() / ("fuselite_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    bool pass = true;

    GeneratorConfig cfg;
    const GeneratorWeights w = build_generator(cfg, 99);
    save_weights(w, dir / "w.flw");
    const GeneratorWeights r = load_weights(dir / "w.flw");
    for (std::size_t i = 0; i < w.layers.size(); ++i)
        for (std::size_t t = 0; t < w.layers[i].tensors.size(); ++t)
            pass &= r.layers[i].tensors[t].second == w.layers[i].tensors[t].second;

    std::mt19937 rng(5);
    const GrayImage img = random_image(rng, 24, 24);
    write_gray(img, dir / "img.pgm");
    const GrayImage back = read_gray(dir / "img.pgm");
    write_gray(back, dir / "img2.pgm");
    std::ifstream a(dir / "img.pgm", std::ios::binary), b(dir / "img2.pgm", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    pass &= sa == sb && !sa.empty();

    fs::create_directories(dir / "data" / "ir");
    fs::create_directories(dir / "data" / "vi");
    for (const char* name : {"zeta", "alpha", "midl"}) {
        write_gray(img, dir / "data" / "ir" / (std::string(name) + ".pgm"));
        write_gray(img, dir / "data" / "vi" / (std::string(name) + ".pgm"));
    }
    const PairList l1 = load_pairs(dir / "data");
    const PairList l2 = load_pairs(dir / "data");
    pass &= l1.pairs.size() == 3 && l1.pairs[0].name == "alpha" &&
            l1.pairs[1].name == "midl" && l1.pairs[2].name == "zeta";
    for (std::size_t i = 0; i < l1.pairs.size(); ++i)
        pass &= l1.pairs[i].name == l2.pairs[i].name;

    report(8, pass, "serialization: FLW1 bit-exact round trip, PGM byte-exact round trip, "
                    "pair loader sorted and deterministic");
    fs::remove_all(dir);
}

void criterion_9_end_to_end_smoke() {
    const fs::path dir =
        fs::temp_directory_path() / ("fuselite_smoke_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    GeneratorConfig cfg;
    cfg.base_width = 4;
    cfg.dense_layers = 1;
    cfg.decoder_widths = {4, 1};
    GeneratorWeights w = build_generator(cfg, 0);
    for_each_tensor(w, [](Layer&, const std::string&, Tensor& t) { t.fill(0.0f); });
    save_weights(w, dir / "zero.flw");

    // constant sources so every metric in the row has a closed form
    write_gray(GrayImage(32, 32, 0.25f), dir / "ir.pgm");
    write_gray(GrayImage(32, 32, 0.75f), dir / "vi.pgm");

    const auto run = [&](const std::string& args, std::string& out) {
        const fs::path out_file = dir / "out.txt";
        const std::string cmd =
            std::string(FUSELITE_CLI_PATH) + " " + args + " >" + out_file.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        std::ifstream f(out_file);
        out = {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };

    std::string out;
    bool pass = run("fuse " + (dir / "zero.flw").string() + " " + (dir / "ir.pgm").string() +
                        " " + (dir / "vi.pgm").string() + " " + (dir / "fused.pgm").string() +
                        " --resize 32x32",
                    out) == 0;
    pass &= run("metrics " + (dir / "fused.pgm").string() + " " + (dir / "ir.pgm").string() +
                    " " + (dir / "vi.pgm").string(),
                out) == 0;

    // parse the data row
    std::vector<double> vals;
    const auto nl = out.find('\n');
    if (pass && nl != std::string::npos) {
        std::string row = out.substr(nl + 1);
        row = row.substr(row.find(',') + 1);
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    }
    double ssim_expected = 0.0;
    if (vals.size() == 6) {
        // fused is the constant 128; sources are the constants 64 and 191
        const double c1 = 2.55 * 2.55;
        const auto ssim_const = [&](double mu1, double mu2) {
            return (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
        };
        ssim_expected = 0.5 * (ssim_const(128, 64) + ssim_const(128, 191));
        pass &= vals[0] == 0.0;                                // EN
        pass &= vals[2] == 0.0;                                // SF
        pass &= vals[3] == 0.0;                                // AG
        pass &= std::abs(vals[5] - ssim_expected) < 5e-7;      // SSIM (6 printed digits)
    } else {
        pass = false;
    }
    report(9, pass,
           "end-to-end smoke: zero-weight fuse + metrics give EN 0, SF 0, AG 0, SSIM " +
               fmt(ssim_expected, 6));
    fs::remove_all(dir);
}

}  // namespace

int main() {
    criterion_1_parameter_reduction();
    criterion_2_mac_and_latency();
    criterion_3_gradients();
    criterion_4_metric_oracles();
    criterion_5_closed_forms();
    criterion_6_cbam();
    criterion_7_toy_training();
    criterion_8_serialization();
    criterion_9_end_to_end_smoke();
    std::printf("ACCEPTANCE: %d/9 criteria passed\n", 9 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
