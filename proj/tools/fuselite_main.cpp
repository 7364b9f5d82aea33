// fuselite command-line tool: fuse image pairs, evaluate fusion metrics,
// account parameters/MACs, benchmark inference, verify gradients, and run
// toy training. Exit codes: 0 ok, 2 io/format, 3 shape, 4 arguments/config,
// 5 gradient check failure, 6 dataset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuselite/fuselite.hpp"

namespace fs = std::filesystem;
using namespace fuselite;

namespace {

struct Size2d {
    int w = 320;
    int h = 320;
};

Size2d parse_size(const std::string& s) {
    const auto pos = s.find('x');
    if (pos == std::string::npos || pos == 0 || pos + 1 == s.size())
        throw argument_error("bad size '" + s + "' (expected WxH, e.g. 320x320)");
    try {
        Size2d out;
        out.w = std::stoi(s.substr(0, pos));
        out.h = std::stoi(s.substr(pos + 1));
        if (out.w < 1 || out.h < 1) throw argument_error("size must be positive");
        return out;
    } catch (const argument_error&) {
        throw;
    } catch (const std::exception&) {
        throw argument_error("bad size '" + s + "' (expected WxH, e.g. 320x320)");
    }
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

GeneratorConfig config_from_flags(const std::string& variant, int base_width, int dense_layers,
                                  const std::string& decoder_widths) {
    GeneratorConfig cfg;
    cfg.variant = parse_variant(variant);
    cfg.base_width = base_width;
    cfg.dense_layers = dense_layers;
    if (!decoder_widths.empty()) {
        cfg.decoder_widths.clear();
        std::string item;
        std::stringstream ss(decoder_widths);
        while (std::getline(ss, item, ','))
            try {
                cfg.decoder_widths.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw argument_error("bad decoder widths '" + decoder_widths + "'");
            }
    }
    validate_config(cfg);
    return cfg;
}

int cmd_fuse(const std::string& weights_path, const std::string& ir_path,
             const std::string& vi_path, const std::string& out_path, const std::string& resize) {
    const Size2d size = parse_size(resize);
    const GeneratorWeights weights = load_weights(weights_path);
    GrayImage ir = resize_bilinear(read_gray(ir_path), size.h, size.w);
    GrayImage vi = resize_bilinear(read_gray(vi_path), size.h, size.w);

    const auto t0 = std::chrono::steady_clock::now();
    const Tensor fused = forward_fuse(weights, tensor_from_gray(ir), tensor_from_gray(vi));
    const auto t1 = std::chrono::steady_clock::now();
    write_gray(gray_from_tensor(fused), out_path);

    std::cout << "fused " << ir_path << " + " << vi_path << " -> " << out_path << " ("
              << size.w << "x" << size.h << ", " << variant_name(weights.config.variant)
              << ") in " << fmt6(std::chrono::duration<double>(t1 - t0).count()) << "s\n";
    return 0;
}

void print_metric_row(const std::string& name, const MetricReport& r) {
    std::cout << name << ',' << fmt6(r.en) << ',' << fmt6(r.mi) << ',' << fmt6(r.sf) << ','
              << fmt6(r.ag) << ',' << fmt6(r.psnr) << ',' << fmt6(r.ssim) << '\n';
}

int cmd_metrics_single(const std::string& fused, const std::string& ir, const std::string& vi) {
    const MetricReport r = evaluate_all(read_gray(fused), read_gray(ir), read_gray(vi));
    std::cout << "name,en,mi,sf,ag,psnr,ssim\n";
    print_metric_row(fs::path(fused).stem().string(), r);
    return 0;
}

int cmd_metrics_dataset(const std::string& root, const std::string& fused_dir) {
    const PairList list = load_pairs(root);
    for (const auto& stem : list.unmatched)
        std::cerr << "warning: unmatched image '" << stem << "'\n";
    std::cout << "name,en,mi,sf,ag,psnr,ssim\n";
    double sums[6] = {0, 0, 0, 0, 0, 0};
    for (const auto& pair : list.pairs) {
        fs::path fused = fs::path(fused_dir) / (pair.name + ".pgm");
        if (!fs::exists(fused)) fused = fs::path(fused_dir) / (pair.name + ".png");
        if (!fs::exists(fused))
            throw io_error("no fused image for pair '" + pair.name + "' in " + fused_dir);
        const MetricReport r = evaluate_all(read_gray(fused), pair.ir, pair.vi);
        print_metric_row(pair.name, r);
        sums[0] += r.en;
        sums[1] += r.mi;
        sums[2] += r.sf;
        sums[3] += r.ag;
        sums[4] += r.psnr;
        sums[5] += r.ssim;
    }
    if (!list.pairs.empty()) {
        const double n = static_cast<double>(list.pairs.size());
        MetricReport mean{sums[0] / n, sums[1] / n, sums[2] / n,
                          sums[3] / n, sums[4] / n, sums[5] / n};
        print_metric_row("mean", mean);
    }
    return 0;
}

int cmd_params(const GeneratorConfig& cfg, const Size2d& size, bool compare) {
    if (compare) {
        GeneratorConfig base = cfg;
        base.variant = Variant::Baseline;
        GeneratorConfig light = cfg;
        light.variant = Variant::Lightweight;
        const CostReport cb = cost_report(build_generator(base, 0), size.h, size.w);
        const CostReport cl = cost_report(build_generator(light, 0), size.h, size.w);
        std::cout << "variant,params,macs\n";
        std::cout << "baseline," << cb.params << ',' << cb.macs << '\n';
        std::cout << "lightweight," << cl.params << ',' << cl.macs << '\n';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f",
                      100.0 * (1.0 - static_cast<double>(cl.params) / cb.params),
                      100.0 * (1.0 - static_cast<double>(cl.macs) / cb.macs));
        std::cout << "reduction_percent," << buf << '\n';
        return 0;
    }
    const CostReport report = cost_report(build_generator(cfg, 0), size.h, size.w);
    std::cout << "layer,kind,params,macs\n";
    for (const auto& layer : report.per_layer)
        std::cout << layer.name << ',' << layer.kind << ',' << layer.params << ','
                  << layer.macs << '\n';
    std::cout << "total," << variant_name(cfg.variant) << ',' << report.params << ','
              << report.macs << '\n';
    return 0;
}

int cmd_bench(const std::string& weights_path, const std::string& size_str, int runs) {
    const Size2d size = parse_size(size_str);
    const GeneratorWeights weights = load_weights(weights_path);
    const BenchResult r = run_benchmark(weights, size.h, size.w, runs);
    std::cout << "sample,seconds\n";
    for (std::size_t i = 0; i < r.samples.size(); ++i)
        std::cout << i << ',' << fmt6(r.samples[i]) << '\n';
    std::cout << "variant,size,runs,mean_s,min_s,max_s,macs\n";
    std::cout << variant_name(r.variant) << ',' << r.w << 'x' << r.h << ','
              << r.samples.size() << ',' << fmt6(r.mean) << ',' << fmt6(r.min) << ','
              << fmt6(r.max) << ',' << r.macs << '\n';
    return 0;
}

int cmd_gradcheck(std::uint32_t seed, bool corrupt) {
    const std::vector<GradCheckResult> results = run_gradcheck(seed, corrupt);
    std::cout << "op,max_rel_err\n";
    char buf[64];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%.3e", r.max_rel_err);
        std::cout << r.op << ',' << buf << '\n';
    }
    if (!gradcheck_passed(results)) {
        std::cerr << "gradcheck FAILED (tolerance " << kGradCheckTol << "):";
        for (const auto& r : results)
            if (!(r.max_rel_err < kGradCheckTol)) std::cerr << ' ' << r.op;
        std::cerr << '\n';
        return 5;
    }
    std::cout << "gradcheck PASS\n";
    return 0;
}

int cmd_train_toy(const std::string& root, int steps, const std::string& opt,
                  std::uint32_t seed, const GeneratorConfig& cfg, const std::string& out_path,
                  const std::string& curve_path) {
    const PairList list = load_pairs(root);
    for (const auto& stem : list.unmatched)
        std::cerr << "warning: unmatched image '" << stem << "'\n";
    if (list.pairs.empty()) throw dataset_error("empty dataset at " + root);

    std::vector<TrainPair> dataset;
    for (const auto& pair : list.pairs)
        dataset.push_back({tensor_from_gray(pair.ir), tensor_from_gray(pair.vi)});

    const TrainResult result = train_toy(cfg, dataset, steps, parse_optimizer(opt), seed);
    if (!out_path.empty()) save_weights(result.weights, out_path);
    if (!curve_path.empty()) write_loss_curve(result.curve, curve_path);

    std::cout << "steps,pairs,initial_loss,final_loss\n";
    std::cout << steps << ',' << dataset.size() << ',' << fmt6(result.curve.front().second)
              << ',' << fmt6(result.curve.back().second) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fuselite: lightweight IR/VIS image fusion toolkit"};
    app.require_subcommand(1);

    // fuse
    auto* fuse = app.add_subcommand("fuse", "fuse an IR/VIS pair into one image");
    std::string fuse_weights, fuse_ir, fuse_vi, fuse_out, fuse_resize = "320x320";
    fuse->add_option("weights", fuse_weights, "FLW1 weight file")->required();
    fuse->add_option("ir", fuse_ir, "infrared image (PGM/PNG)")->required();
    fuse->add_option("vi", fuse_vi, "visible image (PGM/PNG)")->required();
    fuse->add_option("out", fuse_out, "output PGM path")->required();
    fuse->add_option("--resize", fuse_resize, "resize inputs to WxH before fusing")
        ->capture_default_str();

    // metrics
    auto* metrics = app.add_subcommand("metrics", "fusion quality metrics as CSV");
    std::vector<std::string> metric_files;
    std::string metrics_dataset, metrics_fused_dir;
    metrics->add_option("images", metric_files, "fused ir vi (single-triple mode)")
        ->expected(0, 3);
    metrics->add_option("--dataset", metrics_dataset, "dataset root with ir/ and vi/");
    metrics->add_option("--fused-dir", metrics_fused_dir, "directory of fused images");

    // params
    auto* params = app.add_subcommand("params", "parameter and MAC accounting");
    std::string params_variant = "lightweight", params_decoder, params_size = "320x320";
    int params_base = 32, params_dense = 3;
    bool params_compare = false;
    params->add_option("--variant", params_variant,
                       "baseline | lightweight | baseline+cbam | lightweight-cbam")
        ->capture_default_str();
    params->add_option("--base-width", params_base, "dense block width")->capture_default_str();
    params->add_option("--dense-layers", params_dense, "dense layer count")
        ->capture_default_str();
    params->add_option("--decoder-widths", params_decoder, "comma list, must end in 1");
    params->add_option("--size", params_size, "input size WxH for MAC accounting")
        ->capture_default_str();
    params->add_flag("--compare", params_compare, "baseline vs lightweight totals");

    // bench
    auto* bench = app.add_subcommand("bench", "inference latency benchmark");
    std::string bench_weights, bench_size = "320x320";
    int bench_runs = 5;
    bench->add_option("weights", bench_weights, "FLW1 weight file")->required();
    bench->add_option("--size", bench_size, "input size WxH")->capture_default_str();
    bench->add_option("--runs", bench_runs, "timed runs (>= 5)")->capture_default_str();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::uint32_t gc_seed = 0;
    bool gc_corrupt = false;
    gradcheck->add_option("--seed", gc_seed, "instance seed")->capture_default_str();
    gradcheck->add_flag("--corrupt", gc_corrupt, "test hook: falsify one gradient");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "toy training run on a small dataset");
    std::string tt_dataset, tt_opt = "adamw", tt_out, tt_curve;
    std::string tt_variant = "lightweight", tt_decoder;
    int tt_steps = 200, tt_base = 32, tt_dense = 3;
    std::uint32_t tt_seed = 1;
    train->add_option("--dataset", tt_dataset, "dataset root with ir/ and vi/")->required();
    train->add_option("--steps", tt_steps, "optimizer steps")->capture_default_str();
    train->add_option("--opt", tt_opt, "sgd | adamw")->capture_default_str();
    train->add_option("--seed", tt_seed, "init seed")->capture_default_str();
    train->add_option("--out", tt_out, "write final FLW1 weights here");
    train->add_option("--curve", tt_curve, "write step,loss CSV here");
    train->add_option("--variant", tt_variant, "generator variant")->capture_default_str();
    train->add_option("--base-width", tt_base, "dense block width")->capture_default_str();
    train->add_option("--dense-layers", tt_dense, "dense layer count")->capture_default_str();
    train->add_option("--decoder-widths", tt_decoder, "comma list, must end in 1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }

    try {
        if (*fuse) return cmd_fuse(fuse_weights, fuse_ir, fuse_vi, fuse_out, fuse_resize);
        if (*metrics) {
            if (!metrics_dataset.empty() || !metrics_fused_dir.empty()) {
                if (metrics_dataset.empty() || metrics_fused_dir.empty())
                    throw argument_error("dataset mode needs both --dataset and --fused-dir");
                return cmd_metrics_dataset(metrics_dataset, metrics_fused_dir);
            }
            if (metric_files.size() != 3)
                throw argument_error("metrics needs fused ir vi (or --dataset/--fused-dir)");
            return cmd_metrics_single(metric_files[0], metric_files[1], metric_files[2]);
        }
        if (*params)
            return cmd_params(
                config_from_flags(params_variant, params_base, params_dense, params_decoder),
                parse_size(params_size), params_compare);
        if (*bench) return cmd_bench(bench_weights, bench_size, bench_runs);
        if (*gradcheck) return cmd_gradcheck(gc_seed, gc_corrupt);
        if (*train)
            return cmd_train_toy(tt_dataset, tt_steps, tt_opt, tt_seed,
                                 config_from_flags(tt_variant, tt_base, tt_dense, tt_decoder),
                                 tt_out, tt_curve);
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const argument_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const dataset_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 6;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
