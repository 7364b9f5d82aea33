#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fuselite/autodiff_nn.hpp"

namespace fuselite {

// Finite-difference verification of every tape op. The suite instantiates
// the tape in double so the comparison measures the backward formulas, not
// float rounding. Instances stay small (<= 4x8x8) and kink-prone ops get
// separated inputs so the central difference never straddles a
// non-differentiable point.

/// Central differences (f(x+eps)-f(x-eps))/(2 eps), one entry per scalar.
template <typename F>
std::vector<double> finite_diff_grad(F&& loss_fn, std::vector<double> theta, double eps) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + eps;
        const double up = loss_fn(theta);
        theta[i] = keep - eps;
        const double down = loss_fn(theta);
        theta[i] = keep;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
};

inline constexpr double kGradCheckTol = 1e-3;

inline bool gradcheck_passed(const std::vector<GradCheckResult>& results,
                             double tol = kGradCheckTol) {
    for (const auto& r : results)
        if (!(r.max_rel_err < tol)) return false;
    return true;
}

namespace gcdetail {

using DTensor = TensorT<double>;
using DTape = ad::TapeT<double>;
using DNode = ad::NodePtrT<double>;

inline double draw(std::mt19937& rng) {
    return static_cast<double>(rng() >> 8) * (1.0 / 16777216.0) * 2.0 - 1.0;
}

inline DTensor random_tensor(std::mt19937& rng, int c, int h, int w) {
    DTensor t(c, h, w);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = draw(rng);
    return t;
}

// keeps every per-group value at least `gap` apart so max-pool argmaxes
// cannot flip under the finite-difference perturbation
inline void separate(double* vals, std::size_t n, double gap) {
    for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(vals[i] - vals[j]) < gap)
                    vals[i] += vals[i] >= vals[j] ? gap : -gap;
}

struct OpInstance {
    std::vector<DTensor> inputs;
    std::function<DNode(DTape&, std::vector<DNode>&)> build;
};

inline double run_instance(const OpInstance& inst, std::mt19937& rng, double eps,
                           bool corrupt) {
    // analytic pass
    DTape tape;
    std::vector<DNode> leaves;
    for (const auto& t : inst.inputs) leaves.push_back(tape.leaf(t, true));
    DNode out = inst.build(tape, leaves);

    DTensor proj = random_tensor(rng, out->value.channels(), out->value.height(),
                                 out->value.width());
    double loss_value = 0.0;
    for (std::size_t i = 0; i < out->value.size(); ++i)
        loss_value += proj.data()[i] * out->value.data()[i];
    DTensor scalar(1, 1, 1, loss_value);
    DNode loss = tape.custom(std::move(scalar), {out}, [out, proj](ad::NodeT<double>& n) {
        const double g = n.grad.at(0, 0, 0);
        for (std::size_t i = 0; i < out->value.size(); ++i)
            out->grad.data()[i] += g * proj.data()[i];
    });
    tape.backward(loss);

    std::vector<double> analytic;
    for (const auto& leaf : leaves)
        analytic.insert(analytic.end(), leaf->grad.data(), leaf->grad.data() + leaf->grad.size());
    if (corrupt && !analytic.empty()) analytic[0] += 0.5;

    // numeric pass over a flattened copy of all inputs
    std::vector<double> theta;
    for (const auto& t : inst.inputs)
        theta.insert(theta.end(), t.data(), t.data() + t.size());

    const auto eval = [&](const std::vector<double>& flat) {
        std::vector<DTensor> tensors = inst.inputs;
        std::size_t pos = 0;
        for (auto& t : tensors) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                      flat.begin() + static_cast<std::ptrdiff_t>(pos + t.size()), t.data());
            pos += t.size();
        }
        DTape fresh;
        std::vector<DNode> ls;
        for (const auto& t : tensors) ls.push_back(fresh.leaf(t, false));
        DNode o = inst.build(fresh, ls);
        double v = 0.0;
        for (std::size_t i = 0; i < o->value.size(); ++i)
            v += proj.data()[i] * o->value.data()[i];
        return v;
    };
    const std::vector<double> numeric = finite_diff_grad(eval, theta, eps);

    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric[i]), 1e-6);
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

}  // namespace gcdetail

/// Checks every op's reverse-mode gradient against central finite
/// differences on 5 random small instances each. `corrupt` is a test hook
/// that falsifies the conv2d gradient to exercise the failure path.
inline std::vector<GradCheckResult> run_gradcheck(std::uint32_t seed, bool corrupt = false) {
    using namespace gcdetail;
    std::mt19937 rng(seed);
    std::vector<GradCheckResult> results;
    constexpr int kInstances = 5;
    constexpr double kEps = 1e-4;

    const auto check = [&](const std::string& name,
                           const std::function<OpInstance(std::mt19937&)>& make) {
        double worst = 0.0;
        for (int r = 0; r < kInstances; ++r)
            worst = std::max(worst,
                             run_instance(make(rng), rng, kEps, corrupt && name == "conv2d"));
        results.push_back({name, worst});
    };

    check("conv2d", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 2, 5, 4), random_tensor(r, 6, 3, 3),
                       random_tensor(r, 3, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.conv2d(l[0], l[1], l[2], 3, 2, 3, 1);
        };
        return inst;
    });

    check("depthwise_conv2d", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 3, 5, 4), random_tensor(r, 3, 3, 3)};
        inst.build = [](DTape& t, std::vector<DNode>& l) { return t.depthwise(l[0], l[1], 1); };
        return inst;
    });

    check("dsconv2d", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 2, 4, 5), random_tensor(r, 2, 3, 3),
                       random_tensor(r, 1, 3, 2), random_tensor(r, 3, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return ad::tape_dsconv(t, l[0], l[1], l[2], l[3], 1);
        };
        return inst;
    });

    const auto act_check = [&](const std::string& name, Activation kind) {
        check(name, [kind](std::mt19937& r) {
            OpInstance inst;
            inst.inputs = {random_tensor(r, 2, 4, 4)};
            inst.build = [kind](DTape& t, std::vector<DNode>& l) {
                return t.activate(l[0], kind);
            };
            return inst;
        });
    };
    act_check("sigmoid", Activation::Sigmoid);
    act_check("tanh", Activation::Tanh);
    act_check("relu", Activation::Relu);
    act_check("leaky_relu", Activation::LeakyRelu);

    check("mlp_bottleneck", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 6, 1, 1), random_tensor(r, 1, 3, 6),
                       random_tensor(r, 1, 6, 3)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return ad::tape_mlp(t, l[0], l[1], l[2]);
        };
        return inst;
    });

    check("conv7x7", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 2, 8, 8), random_tensor(r, 2, 7, 7),
                       random_tensor(r, 1, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.conv2d(l[0], l[1], l[2], 1, 2, 7, 3);
        };
        return inst;
    });

    check("reduce_spatial_mean", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 3, 4, 4)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.reduce_spatial_op(l[0], Reduce::Mean);
        };
        return inst;
    });

    check("reduce_spatial_max", [](std::mt19937& r) {
        OpInstance inst;
        DTensor x = random_tensor(r, 3, 4, 4);
        for (int c = 0; c < x.channels(); ++c) separate(x.channel(c), 16, 1e-2);
        inst.inputs = {std::move(x)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.reduce_spatial_op(l[0], Reduce::Max);
        };
        return inst;
    });

    check("reduce_channels_mean", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 4, 3, 3)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.reduce_channels_op(l[0], Reduce::Mean);
        };
        return inst;
    });

    check("reduce_channels_max", [](std::mt19937& r) {
        OpInstance inst;
        DTensor x = random_tensor(r, 4, 3, 3);
        // separate across channels at each pixel
        for (int y = 0; y < 3; ++y)
            for (int xx = 0; xx < 3; ++xx) {
                double vals[4];
                for (int c = 0; c < 4; ++c) vals[c] = x.at(c, y, xx);
                separate(vals, 4, 1e-2);
                for (int c = 0; c < 4; ++c) x.at(c, y, xx) = vals[c];
            }
        inst.inputs = {std::move(x)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.reduce_channels_op(l[0], Reduce::Max);
        };
        return inst;
    });

    check("concat_channels", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 2, 3, 3), random_tensor(r, 3, 3, 3)};
        inst.build = [](DTape& t, std::vector<DNode>& l) { return t.concat(l[0], l[1]); };
        return inst;
    });

    check("scale_channels", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 3, 4, 4), random_tensor(r, 3, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.scale_channels(l[0], l[1]);
        };
        return inst;
    });

    check("scale_spatial", [](std::mt19937& r) {
        OpInstance inst;
        inst.inputs = {random_tensor(r, 3, 4, 4), random_tensor(r, 1, 4, 4)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return t.scale_spatial(l[0], l[1]);
        };
        return inst;
    });

    check("channel_attention", [](std::mt19937& r) {
        OpInstance inst;
        DTensor x = random_tensor(r, 4, 4, 4);
        for (int c = 0; c < x.channels(); ++c) separate(x.channel(c), 16, 1e-2);
        inst.inputs = {std::move(x), random_tensor(r, 1, 2, 4), random_tensor(r, 1, 4, 2)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return ad::tape_channel_attention(t, l[0], l[1], l[2]).f_prime;
        };
        return inst;
    });

    check("spatial_attention", [](std::mt19937& r) {
        OpInstance inst;
        DTensor x = random_tensor(r, 3, 6, 6);
        for (int y = 0; y < 6; ++y)
            for (int xx = 0; xx < 6; ++xx) {
                double vals[3];
                for (int c = 0; c < 3; ++c) vals[c] = x.at(c, y, xx);
                separate(vals, 3, 1e-2);
                for (int c = 0; c < 3; ++c) x.at(c, y, xx) = vals[c];
            }
        inst.inputs = {std::move(x), random_tensor(r, 2, 7, 7), random_tensor(r, 1, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return ad::tape_spatial_attention(t, l[0], l[1], l[2]).f_double_prime;
        };
        return inst;
    });

    check("cbam", [](std::mt19937& r) {
        OpInstance inst;
        DTensor x = random_tensor(r, 4, 6, 6);
        for (int c = 0; c < x.channels(); ++c) separate(x.channel(c), 36, 1e-2);
        for (int y = 0; y < 6; ++y)
            for (int xx = 0; xx < 6; ++xx) {
                double vals[4];
                for (int c = 0; c < 4; ++c) vals[c] = x.at(c, y, xx);
                separate(vals, 4, 1e-2);
                for (int c = 0; c < 4; ++c) x.at(c, y, xx) = vals[c];
            }
        inst.inputs = {std::move(x), random_tensor(r, 1, 2, 4), random_tensor(r, 1, 4, 2),
                       random_tensor(r, 2, 7, 7), random_tensor(r, 1, 1, 1)};
        inst.build = [](DTape& t, std::vector<DNode>& l) {
            return ad::tape_cbam(t, l[0], l[1], l[2], l[3], l[4]);
        };
        return inst;
    });

    check("fusion_loss", [](std::mt19937& r) {
        OpInstance inst;
        DTensor ir = random_tensor(r, 1, 6, 6);
        DTensor vi = random_tensor(r, 1, 6, 6);
        for (auto* t : {&ir, &vi})
            for (std::size_t i = 0; i < t->size(); ++i)
                t->data()[i] = 0.5 + 0.4 * t->data()[i];  // into (0.1, 0.9)
        DTensor fused = random_tensor(r, 1, 6, 6);
        // keep the intensity residual away from the |.| kink
        for (std::size_t i = 0; i < fused.size(); ++i) {
            const double target = std::max(ir.data()[i], vi.data()[i]);
            fused.data()[i] = target + (fused.data()[i] >= 0.0 ? 0.05 : -0.05) +
                              0.2 * fused.data()[i];
        }
        inst.inputs = {std::move(fused)};
        inst.build = [ir, vi](DTape& t, std::vector<DNode>& l) {
            return ad::fusion_loss_node(t, l[0], ir, vi);
        };
        return inst;
    });

    return results;
}

}  // namespace fuselite
