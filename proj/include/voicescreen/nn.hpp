#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voicescreen/tensor.hpp"

namespace voicescreen::nn {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Numerically shifted two-way softmax.
inline std::array<double, 2> softmax2(double z0, double z1) {
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    const double sum = e0 + e1;
    return {e0 / sum, e1 / sum};
}

inline constexpr double kProbClamp = 1e-12;

struct BceResult {
    double loss = 0.0;
    Tensor grad; // d loss / d probs, same shape as the input
};

// Mean negative log-likelihood over probabilities. Accepts shape {n}
// (probability of the positive class) or {n, 2} (per-class probabilities).
inline BceResult bce_loss(const Tensor& probs, const std::vector<int>& labels) {
    BceResult out;
    out.grad = Tensor::zeros(probs.shape);

    if (probs.shape.size() == 1) {
        const std::size_t n = probs.shape[0];
        if (labels.size() != n)
            throw ShapeMismatch("bce_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " probs");
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p =
                std::clamp(probs.data[i], kProbClamp, 1.0 - kProbClamp);
            if (labels[i] == 1) {
                loss -= std::log(p);
                out.grad.data[i] = -1.0 / (p * double(n));
            } else {
                loss -= std::log(1.0 - p);
                out.grad.data[i] = 1.0 / ((1.0 - p) * double(n));
            }
        }
        out.loss = loss / double(n);
        return out;
    }

    if (probs.shape.size() == 2 && probs.shape[1] == 2) {
        const std::size_t n = probs.shape[0];
        if (labels.size() != n)
            throw ShapeMismatch("bce_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t col = labels[i] == 1 ? 1 : 0;
            const double p = std::clamp(probs.data[2 * i + col], kProbClamp,
                                        1.0 - kProbClamp);
            loss -= std::log(p);
            out.grad.data[2 * i + col] = -1.0 / (p * double(n));
        }
        out.loss = loss / double(n);
        return out;
    }

    throw ShapeMismatch("bce_loss expects shape {n} or {n,2}");
}

// Softmax cross-entropy against an integer label; gradient w.r.t. logits.
inline double softmax_xent2(double z0, double z1, int label,
                            double* dz0, double* dz1) {
    const auto p = softmax2(z0, z1);
    const double py = label == 1 ? p[1] : p[0];
    if (dz0) *dz0 = p[0] - (label == 0 ? 1.0 : 0.0);
    if (dz1) *dz1 = p[1] - (label == 1 ? 1.0 : 0.0);
    return -std::log(std::max(py, kProbClamp));
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a flat parameter vector.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return step_; }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != grads.size())
            throw ShapeMismatch("adam: parameter/gradient size mismatch");
        if (m_.empty()) {
            m_.assign(params.size(), 0.0);
            v_.assign(params.size(), 0.0);
        } else if (m_.size() != params.size()) {
            throw ShapeMismatch("adam: parameter count changed mid-run");
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m_[i] / bc1;
            const double v_hat = v_[i] / bc2;
            params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }

private:
    AdamConfig cfg_;
    long step_ = 0;
    std::vector<double> m_, v_;
};

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_by_global_norm(std::span<double> grads, double max_norm) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (double& g : grads) g *= scale;
    }
    return norm;
}

// Per-epoch training log row, written out as CSV by the pipeline commands.
struct EpochStat {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

} // namespace voicescreen::nn
