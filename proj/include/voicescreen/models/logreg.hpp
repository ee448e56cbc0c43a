#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "voicescreen/nn.hpp"

namespace voicescreen::models {

class SingleClass : public DataError {
public:
    using DataError::DataError;
};

struct LogRegModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2 = 0.0;

    double score(std::span<const double> x) const {
        double z = bias;
        for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
        return z;
    }

    double prob(std::span<const double> x) const {
        return nn::sigmoid(score(x));
    }
};

struct LogRegTrainConfig {
    int epochs = 500;
    double lr = 0.5;
    double l2 = 0.0;
};

namespace detail_logreg {

// Mean BCE over the set plus L2 penalty; gradient w.r.t. (weights, bias).
inline double loss_and_gradient(const std::vector<std::vector<double>>& x,
                                const std::vector<int>& y,
                                const LogRegModel& model,
                                std::vector<double>& grad_w, double& grad_b) {
    const std::size_t n = x.size();
    const std::size_t dim = model.weights.size();
    grad_w.assign(dim, 0.0);
    grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = model.prob(x[i]);
        const double pc = std::clamp(p, nn::kProbClamp, 1.0 - nn::kProbClamp);
        loss -= y[i] == 1 ? std::log(pc) : std::log(1.0 - pc);
        const double err = p - double(y[i]);
        for (std::size_t d = 0; d < dim; ++d) grad_w[d] += err * x[i][d];
        grad_b += err;
    }
    loss /= double(n);
    for (std::size_t d = 0; d < dim; ++d) {
        grad_w[d] = grad_w[d] / double(n) + model.l2 * model.weights[d];
        loss += 0.5 * model.l2 * model.weights[d] * model.weights[d];
    }
    grad_b /= double(n);
    return loss;
}

} // namespace detail_logreg

// Full-batch gradient descent on BCE from zero initialization; deterministic
// by construction.
inline LogRegModel logreg_train(const std::vector<std::vector<double>>& x,
                                const std::vector<int>& y,
                                const LogRegTrainConfig& cfg = {},
                                std::vector<nn::EpochStat>* history = nullptr) {
    if (x.empty() || x.size() != y.size())
        throw nn::ShapeMismatch("logreg_train: bad training set shape");
    bool has_pos = false, has_neg = false;
    for (int label : y) (label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw SingleClass("logreg_train: training labels are single-class");

    LogRegModel model;
    model.weights.assign(x[0].size(), 0.0);
    model.l2 = cfg.l2;

    std::vector<double> grad_w;
    double grad_b = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss =
            detail_logreg::loss_and_gradient(x, y, model, grad_w, grad_b);
        if (!std::isfinite(loss))
            throw nn::NanLoss("logreg_train: non-finite loss at epoch " +
                              std::to_string(epoch));
        for (std::size_t d = 0; d < model.weights.size(); ++d) {
            model.weights[d] -= cfg.lr * grad_w[d];
        }
        model.bias -= cfg.lr * grad_b;
        if (history) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                correct += (model.prob(x[i]) >= 0.5 ? 1 : 0) == y[i];
            }
            history->push_back(
                {epoch, loss, double(correct) / double(x.size())});
        }
    }
    return model;
}

} // namespace voicescreen::models
