#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "voicescreen/models/logreg.hpp"
#include "voicescreen/nn.hpp"

namespace voicescreen::models {

struct SvmConfig {
    double c = 1.0;
    double gamma = 0.0; // <= 0 means "auto": 1 / n_features
    double tol = 1e-3;  // stop when the max KKT violation falls below this
    long max_iter = 1'000'000;
};

struct SvmModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> sv_alpha;  // dual coefficient per support vector
    std::vector<int> sv_label;     // +1 / -1
    double bias = 0.0;
    double gamma = 0.0;
    double c = 1.0;
    bool converged = false;
    double dual_objective = 0.0;

    // logistic link fitted on training decision values
    double link_scale = 1.0;
    double link_offset = 0.0;

    double kernel(std::span<const double> a, std::span<const double> b) const {
        double dist = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            dist += d * d;
        }
        return std::exp(-gamma * dist);
    }

    double decision(std::span<const double> x) const {
        double f = bias;
        for (std::size_t s = 0; s < support_vectors.size(); ++s) {
            f += sv_alpha[s] * sv_label[s] * kernel(support_vectors[s], x);
        }
        return f;
    }

    double prob(std::span<const double> x) const {
        return nn::sigmoid(link_scale * decision(x) + link_offset);
    }
};

namespace detail_svm {

// Working-pair SMO on the dual
//   min 1/2 sum a_i a_j y_i y_j K_ij - sum a_i,  0 <= a <= C,  y^T a = 0
// with second-order pair selection. viol_t = y_t - u_t where u is the
// decision value without bias; the optimality gap is
// max_{I_up} viol - min_{I_low} viol.
struct SmoResult {
    std::vector<double> alpha;
    double bias = 0.0;
    bool converged = false;
    double objective = 0.0;
    std::vector<double> decision_values; // u_i + bias, for calibration
};

inline SmoResult solve(const std::vector<std::vector<double>>& x,
                       const std::vector<int>& y_signed, double c,
                       double gamma, double tol, long max_iter) {
    const std::size_t n = x.size();
    constexpr double tau = 1e-12;

    // full Gram matrix; training sets here are desk scale
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dist = 0.0;
            for (std::size_t d = 0; d < x[i].size(); ++d) {
                const double diff = x[i][d] - x[j][d];
                dist += diff * diff;
            }
            k[i][j] = k[j][i] = std::exp(-gamma * dist);
        }
    }

    std::vector<double> alpha(n, 0.0);
    std::vector<double> u(n, 0.0); // sum_t alpha_t y_t K_t.

    const auto in_up = [&](std::size_t t) {
        return (y_signed[t] > 0 && alpha[t] < c) ||
               (y_signed[t] < 0 && alpha[t] > 0.0);
    };
    const auto in_low = [&](std::size_t t) {
        return (y_signed[t] < 0 && alpha[t] < c) ||
               (y_signed[t] > 0 && alpha[t] > 0.0);
    };

    bool converged = false;
    for (long iter = 0; iter < max_iter; ++iter) {
        // most violating index in I_up
        std::size_t i = n;
        double viol_i = -1e300;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_up(t)) continue;
            const double viol = double(y_signed[t]) - u[t];
            if (viol > viol_i) {
                viol_i = viol;
                i = t;
            }
        }
        double viol_min = 1e300;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            viol_min = std::min(viol_min, double(y_signed[t]) - u[t]);
        }
        if (i == n || viol_i - viol_min < tol) {
            converged = true;
            break;
        }

        // second-order choice of the partner index
        std::size_t j = n;
        double best_gain = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            if (!in_low(t)) continue;
            const double viol_t = double(y_signed[t]) - u[t];
            const double b_it = viol_i - viol_t;
            if (b_it <= 0.0) continue;
            const double a_it = std::max(k[i][i] + k[t][t] - 2.0 * k[i][t], tau);
            const double gain = b_it * b_it / a_it;
            if (gain > best_gain) {
                best_gain = gain;
                j = t;
            }
        }
        if (j == n) {
            converged = true; // nothing movable against i
            break;
        }

        // two-variable solve with exact bound snapping: the clipped variable
        // is assigned 0 or C exactly and its partner recomputed from the
        // conserved pair quantity, so index-set membership never rots from
        // accumulated rounding
        const double g_i = double(y_signed[i]) * u[i] - 1.0;
        const double g_j = double(y_signed[j]) * u[j] - 1.0;
        const double eta = std::max(k[i][i] + k[j][j] - 2.0 * k[i][j], tau);
        const double old_i = alpha[i];
        const double old_j = alpha[j];

        if (y_signed[i] != y_signed[j]) {
            const double delta = (-g_i - g_j) / eta;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else {
                if (alpha[i] < 0.0) {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            const double delta = (g_i - g_j) / eta;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if (alpha[i] < 0.0) {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        const double delta_i = alpha[i] - old_i;
        const double delta_j = alpha[j] - old_j;
        if (delta_i == 0.0 && delta_j == 0.0) {
            break; // stalled pair; not convergence
        }
        for (std::size_t t = 0; t < n; ++t) {
            u[t] += delta_i * double(y_signed[i]) * k[i][t] +
                    delta_j * double(y_signed[j]) * k[j][t];
        }
    }

    SmoResult res;
    res.converged = converged;
    res.alpha = alpha;

    // bias from free support vectors, else the midpoint of the gap
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > tau && alpha[t] < c - tau) {
            free_sum += double(y_signed[t]) - u[t];
            ++free_count;
        }
    }
    if (free_count > 0) {
        res.bias = free_sum / double(free_count);
    } else {
        double up = -1e300, low = 1e300;
        for (std::size_t t = 0; t < n; ++t) {
            if (in_up(t)) up = std::max(up, double(y_signed[t]) - u[t]);
            if (in_low(t)) low = std::min(low, double(y_signed[t]) - u[t]);
        }
        res.bias = 0.5 * (up + low);
    }

    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        obj += 0.5 * alpha[t] * double(y_signed[t]) * u[t] - alpha[t];
    }
    res.objective = obj;

    res.decision_values.resize(n);
    for (std::size_t t = 0; t < n; ++t) res.decision_values[t] = u[t] + res.bias;
    return res;
}

// 1-D logistic link fitted by plain gradient descent on the training
// decision values; only used to expose probabilities on the uniform predict
// surface (ROC consumes raw decisions).
inline void fit_logistic_link(const std::vector<double>& decisions,
                              const std::vector<int>& y01, double& scale,
                              double& offset) {
    scale = 1.0;
    offset = 0.0;
    const std::size_t n = decisions.size();
    for (int epoch = 0; epoch < 500; ++epoch) {
        double gs = 0.0, go = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = nn::sigmoid(scale * decisions[i] + offset);
            const double err = p - double(y01[i]);
            gs += err * decisions[i];
            go += err;
        }
        scale -= 0.05 * gs / double(n);
        offset -= 0.05 * go / double(n);
    }
}

} // namespace detail_svm

inline SvmModel svm_train_smo(const std::vector<std::vector<double>>& x,
                              const std::vector<int>& y01,
                              const SvmConfig& cfg = {},
                              std::vector<std::string>* warnings = nullptr) {
    if (x.size() < 2 || x.size() != y01.size())
        throw nn::ShapeMismatch("svm_train_smo: bad training set shape");
    bool has_pos = false, has_neg = false;
    std::vector<int> y_signed(x.size());
    for (std::size_t i = 0; i < y01.size(); ++i) {
        y_signed[i] = y01[i] == 1 ? 1 : -1;
        (y01[i] == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw SingleClass("svm_train_smo: training labels are single-class");

    const double gamma =
        cfg.gamma > 0.0 ? cfg.gamma : 1.0 / double(x[0].size());

    const auto res = detail_svm::solve(x, y_signed, cfg.c, gamma, cfg.tol,
                                       cfg.max_iter);
    if (!res.converged) {
        const std::string msg =
            "svm_train_smo: no convergence within " +
            std::to_string(cfg.max_iter) + " iterations; returning best iterate";
        if (warnings) warnings->push_back(msg);
        else std::fprintf(stderr, "warning: %s\n", msg.c_str());
    }

    SvmModel model;
    model.gamma = gamma;
    model.c = cfg.c;
    model.bias = res.bias;
    model.converged = res.converged;
    model.dual_objective = res.objective;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (res.alpha[i] > 0.0) {
            model.support_vectors.push_back(x[i]);
            model.sv_alpha.push_back(res.alpha[i]);
            model.sv_label.push_back(y_signed[i]);
        }
    }
    detail_svm::fit_logistic_link(res.decision_values, y01, model.link_scale,
                                  model.link_offset);
    return model;
}

} // namespace voicescreen::models
