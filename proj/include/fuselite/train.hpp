#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fuselite/autodiff_nn.hpp"
#include "fuselite/generator.hpp"

namespace fuselite {

// Training-side machinery: the warmup learning-rate schedule, SGD with
// momentum and AdamW (decoupled weight decay), and a deterministic toy
// training loop over full-batch gradients.

/// Linear ramp 0.01 -> 0.1 over the first 10% of total_steps, then constant.
inline double lr_at(std::int64_t step, std::int64_t total_steps) {
    if (step < 0 || total_steps < 0 || step > total_steps)
        throw argument_error("lr_at: step " + std::to_string(step) + " outside [0, " +
                             std::to_string(total_steps) + "]");
    const double warmup = 0.1 * static_cast<double>(total_steps);
    if (static_cast<double>(step) >= warmup) return 0.1;
    return 0.01 + 0.09 * static_cast<double>(step) / warmup;
}

enum class OptimizerKind { SgdMomentum, AdamW };

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::SgdMomentum;
    if (s == "adamw") return OptimizerKind::AdamW;
    throw argument_error("unknown optimizer '" + s + "' (expected sgd or adamw)");
}

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::AdamW;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0005;
    std::int64_t t = 0;  // completed AdamW steps
    std::map<std::string, std::vector<double>> slot_m;  // AdamW first moment / SGD velocity
    std::map<std::string, std::vector<double>> slot_v;  // AdamW second moment
};

struct NamedTensor {
    std::string name;
    Tensor* tensor = nullptr;
};

inline std::vector<NamedTensor> named_params(GeneratorWeights& w) {
    std::vector<NamedTensor> out;
    for_each_tensor(w, [&](Layer& layer, const std::string& tname, Tensor& t) {
        out.push_back({layer.name + "." + tname, &t});
    });
    return out;
}

using GradMap = std::map<std::string, Tensor>;

namespace detail {

inline std::vector<double>& slot_for(std::map<std::string, std::vector<double>>& slots,
                                     const std::string& name, std::size_t size) {
    auto& s = slots[name];
    if (s.empty()) s.assign(size, 0.0);
    if (s.size() != size) throw shape_error("optimizer slot size mismatch for " + name);
    return s;
}

inline const Tensor& grad_for(const GradMap& grads, const NamedTensor& p) {
    const auto it = grads.find(p.name);
    if (it == grads.end()) throw argument_error("missing gradient for " + p.name);
    if (!it->second.same_shape(*p.tensor))
        throw shape_error("gradient shape mismatch for " + p.name);
    return it->second;
}

}  // namespace detail

/// v <- momentum*v + g; theta <- theta - lr*v.
inline void sgd_step(OptimizerState& state, std::vector<NamedTensor>& params,
                     const GradMap& grads, double lr) {
    for (auto& p : params) {
        const Tensor& g = detail::grad_for(grads, p);
        auto& v = detail::slot_for(state.slot_m, p.name, p.tensor->size());
        float* theta = p.tensor->data();
        const float* gp = g.data();
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = state.momentum * v[i] + static_cast<double>(gp[i]);
            theta[i] = static_cast<float>(theta[i] - lr * v[i]);
        }
    }
}

/// Decoupled weight decay: theta <- theta - lr*(m_hat/(sqrt(v_hat)+eps) + wd*theta).
inline void adamw_step(OptimizerState& state, std::vector<NamedTensor>& params,
                       const GradMap& grads, double lr) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (auto& p : params) {
        const Tensor& g = detail::grad_for(grads, p);
        auto& m = detail::slot_for(state.slot_m, p.name, p.tensor->size());
        auto& v = detail::slot_for(state.slot_v, p.name, p.tensor->size());
        float* theta = p.tensor->data();
        const float* gp = g.data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double gd = static_cast<double>(gp[i]);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gd;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gd * gd;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] = static_cast<float>(
                theta[i] - lr * (m_hat / (std::sqrt(v_hat) + state.epsilon) +
                                 state.weight_decay * theta[i]));
        }
    }
}

inline void optimizer_step(OptimizerState& state, std::vector<NamedTensor>& params,
                           const GradMap& grads, double lr) {
    if (state.kind == OptimizerKind::SgdMomentum)
        sgd_step(state, params, grads, lr);
    else
        adamw_step(state, params, grads, lr);
}

// --- toy training loop ----------------------------------------------------

struct TrainPair {
    Tensor ir;
    Tensor vi;
};

using LossCurve = std::vector<std::pair<std::int64_t, double>>;

struct TrainResult {
    GeneratorWeights weights;
    LossCurve curve;
};

namespace detail {

/// Mean fusion loss over the batch; gradients (if wanted) are averaged in
/// dataset order into `grads`.
inline double batch_pass(const GeneratorWeights& w, const std::vector<TrainPair>& dataset,
                         GradMap* grads) {
    double loss_sum = 0.0;
    for (const auto& pair : dataset) {
        ad::Tape tape;
        ad::TapeNet net = ad::tape_forward(tape, w, pair.ir, pair.vi, grads != nullptr);
        ad::NodePtr loss = ad::fusion_loss_node(tape, net.output, pair.ir, pair.vi);
        loss_sum += static_cast<double>(loss->value.at(0, 0, 0));
        if (grads) {
            tape.backward(loss);
            for (auto& [name, leaf] : net.params) {
                auto it = grads->find(name);
                if (it == grads->end())
                    grads->emplace(name, leaf->grad);
                else {
                    float* acc = it->second.data();
                    const float* g = leaf->grad.data();
                    for (std::size_t i = 0; i < it->second.size(); ++i) acc[i] += g[i];
                }
            }
        }
    }
    if (grads) {
        const float inv = 1.0f / static_cast<float>(dataset.size());
        for (auto& [name, g] : *grads)
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= inv;
    }
    return loss_sum / static_cast<double>(dataset.size());
}

}  // namespace detail

/// Full-batch training with the warmup schedule. The curve holds the batch
/// loss at every step's weights plus a final evaluation, so `steps = 0`
/// yields exactly one row.
inline TrainResult train_toy(const GeneratorConfig& cfg, const std::vector<TrainPair>& dataset,
                             int steps, OptimizerKind opt, std::uint32_t seed) {
    if (dataset.empty()) throw dataset_error("train_toy: empty dataset");
    if (steps < 0) throw argument_error("train_toy: steps must be >= 0");
    for (const auto& p : dataset)
        if (p.ir.channels() != 1 || !p.ir.same_shape(p.vi))
            throw shape_error("train_toy: dataset pairs must be matching single-channel tensors");

    TrainResult result;
    result.weights = build_generator(cfg, seed);
    std::vector<NamedTensor> params = named_params(result.weights);
    OptimizerState state;
    state.kind = opt;

    for (int k = 0; k < steps; ++k) {
        GradMap grads;
        const double loss = detail::batch_pass(result.weights, dataset, &grads);
        result.curve.emplace_back(k, loss);
        optimizer_step(state, params, grads, lr_at(k, steps));
    }
    result.curve.emplace_back(steps, detail::batch_pass(result.weights, dataset, nullptr));
    return result;
}

/// CSV export: header `step,loss`, one row per curve entry.
inline void write_loss_curve(const LossCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << "step,loss\n";
    char buf[64];
    for (const auto& [step, loss] : curve) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9f\n", static_cast<long long>(step), loss);
        out << buf;
    }
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace fuselite
