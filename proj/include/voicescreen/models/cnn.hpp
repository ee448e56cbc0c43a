#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voicescreen/detail/rng.hpp"
#include "voicescreen/dsp.hpp"
#include "voicescreen/nn.hpp"
#include "voicescreen/tensor.hpp"

namespace voicescreen::models {

// conv(3x3, valid, stride 1) -> ReLU -> 2x2 max-pool, twice, then a dense
// softmax head. Single-channel input.
struct CnnConfig {
    int input_h = 64;
    int input_w = 64;
    int conv1_filters = 8;
    int conv2_filters = 16;
    std::uint64_t seed = 0;

    static constexpr int kKernel = 3;

    // 2x2/stride-2 pooling floors odd sizes; a 1-wide dim passes through
    static int pooled(int d) { return d >= 2 ? d / 2 : d; }

    int conv1_h() const { return input_h - kKernel + 1; }
    int conv1_w() const { return input_w - kKernel + 1; }
    int pool1_h() const { return pooled(conv1_h()); }
    int pool1_w() const { return pooled(conv1_w()); }
    int conv2_h() const { return pool1_h() - kKernel + 1; }
    int conv2_w() const { return pool1_w() - kKernel + 1; }
    int pool2_h() const { return pooled(conv2_h()); }
    int pool2_w() const { return pooled(conv2_w()); }
    int flat_dim() const { return conv2_filters * pool2_h() * pool2_w(); }

    void validate() const {
        if (conv2_h() < 1 || conv2_w() < 1)
            throw nn::ShapeMismatch("CNN input too small for two 3x3 convs");
        if (conv1_filters < 1 || conv2_filters < 1)
            throw nn::ShapeMismatch("CNN needs at least one filter per layer");
    }
};

// Center-crop / zero-pad a log-mel matrix (frames x mels) to h x w.
inline std::vector<double> make_patch(const dsp::FeatureMatrix& fm, int h,
                                      int w) {
    std::vector<double> patch(std::size_t(h) * std::size_t(w), 0.0);
    const long src_h = long(fm.rows), src_w = long(fm.cols);
    const long off_h = (src_h - h) / 2;
    const long off_w = (src_w - w) / 2;
    for (long y = 0; y < h; ++y) {
        const long sy = y + off_h;
        if (sy < 0 || sy >= src_h) continue;
        for (long x = 0; x < w; ++x) {
            const long sx = x + off_w;
            if (sx < 0 || sx >= src_w) continue;
            patch[std::size_t(y) * std::size_t(w) + std::size_t(x)] =
                fm.at(std::size_t(sy), std::size_t(sx));
        }
    }
    return patch;
}

struct PatchStats {
    double mean = 0.0;
    double std_dev = 1.0;
};

inline PatchStats fit_patch_stats(const std::vector<std::vector<double>>& patches) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : patches) {
        for (double v : p) sum += v;
        count += p.size();
    }
    PatchStats st;
    st.mean = count ? sum / double(count) : 0.0;
    double sq = 0.0;
    for (const auto& p : patches) {
        for (double v : p) sq += (v - st.mean) * (v - st.mean);
    }
    st.std_dev = count ? std::sqrt(sq / double(count)) : 1.0;
    if (st.std_dev < 1e-8) st.std_dev = 1.0;
    return st;
}

inline void standardize(std::vector<double>& patch, const PatchStats& st) {
    for (double& v : patch) v = (v - st.mean) / st.std_dev;
}

class CnnModel {
public:
    CnnConfig cfg;
    std::vector<double> params;
    PatchStats stats; // train-split standardization, applied at inference

    static CnnModel init(const CnnConfig& cfg) {
        cfg.validate();
        CnnModel m;
        m.cfg = cfg;
        m.params.assign(m.param_count_for(cfg), 0.0);
        detail::Rng rng(cfg.seed);
        const int k2 = CnnConfig::kKernel * CnnConfig::kKernel;
        const double s1 = 1.0 / std::sqrt(double(k2));
        const double s2 = 1.0 / std::sqrt(double(cfg.conv1_filters * k2));
        const double s3 = 1.0 / std::sqrt(double(cfg.flat_dim()));
        for (std::size_t i = 0; i < std::size_t(cfg.conv1_filters * k2); ++i)
            m.params[m.off_conv1_w() + i] = rng.uniform(-s1, s1);
        for (std::size_t i = 0;
             i < std::size_t(cfg.conv2_filters * cfg.conv1_filters * k2); ++i)
            m.params[m.off_conv2_w() + i] = rng.uniform(-s2, s2);
        for (std::size_t i = 0; i < std::size_t(2 * cfg.flat_dim()); ++i)
            m.params[m.off_dense_w() + i] = rng.uniform(-s3, s3);
        return m;
    }

    static std::size_t param_count_for(const CnnConfig& cfg) {
        const std::size_t k2 = CnnConfig::kKernel * CnnConfig::kKernel;
        return std::size_t(cfg.conv1_filters) * k2 +
               std::size_t(cfg.conv1_filters) +
               std::size_t(cfg.conv2_filters) * std::size_t(cfg.conv1_filters) *
                   k2 +
               std::size_t(cfg.conv2_filters) +
               std::size_t(2 * cfg.flat_dim()) + 2;
    }

    std::size_t param_count() const { return params.size(); }

    std::size_t off_conv1_w() const { return 0; }
    std::size_t off_conv1_b() const {
        return std::size_t(cfg.conv1_filters) * 9;
    }
    std::size_t off_conv2_w() const {
        return off_conv1_b() + std::size_t(cfg.conv1_filters);
    }
    std::size_t off_conv2_b() const {
        return off_conv2_w() +
               std::size_t(cfg.conv2_filters) * std::size_t(cfg.conv1_filters) * 9;
    }
    std::size_t off_dense_w() const {
        return off_conv2_b() + std::size_t(cfg.conv2_filters);
    }
    std::size_t off_dense_b() const {
        return off_dense_w() + std::size_t(2 * cfg.flat_dim());
    }

    std::vector<nn::TensorSpec> tensor_specs() const {
        return {
            {"conv1_w",
             {std::size_t(cfg.conv1_filters), 1, 3, 3},
             off_conv1_w()},
            {"conv1_b", {std::size_t(cfg.conv1_filters)}, off_conv1_b()},
            {"conv2_w",
             {std::size_t(cfg.conv2_filters), std::size_t(cfg.conv1_filters), 3,
              3},
             off_conv2_w()},
            {"conv2_b", {std::size_t(cfg.conv2_filters)}, off_conv2_b()},
            {"dense_w", {2, std::size_t(cfg.flat_dim())}, off_dense_w()},
            {"dense_b", {2}, off_dense_b()},
        };
    }

    std::array<double, 2> logits(std::span<const double> patch) const {
        Workspace ws;
        return forward(patch, ws);
    }

    std::array<double, 2> probabilities(std::span<const double> patch) const {
        const auto z = logits(patch);
        return nn::softmax2(z[0], z[1]);
    }

    // forward/backward workspace; reused across samples during training
    struct Workspace {
        std::vector<double> a1, r1, p1, a2, r2, p2;
        std::vector<std::size_t> arg1, arg2;
    };

    std::array<double, 2> forward(std::span<const double> patch,
                                  Workspace& ws) const {
        if (patch.size() != std::size_t(cfg.input_h) * std::size_t(cfg.input_w))
            throw nn::ShapeMismatch("CNN patch has wrong size");
        conv_forward(patch.data(), 1, cfg.input_h, cfg.input_w,
                     params.data() + off_conv1_w(),
                     params.data() + off_conv1_b(), cfg.conv1_filters, ws.a1);
        relu(ws.a1, ws.r1);
        pool_forward(ws.r1, cfg.conv1_filters, cfg.conv1_h(), cfg.conv1_w(),
                     ws.p1, ws.arg1);
        conv_forward(ws.p1.data(), cfg.conv1_filters, cfg.pool1_h(),
                     cfg.pool1_w(), params.data() + off_conv2_w(),
                     params.data() + off_conv2_b(), cfg.conv2_filters, ws.a2);
        relu(ws.a2, ws.r2);
        pool_forward(ws.r2, cfg.conv2_filters, cfg.conv2_h(), cfg.conv2_w(),
                     ws.p2, ws.arg2);

        const double* wo = params.data() + off_dense_w();
        const double* bo = params.data() + off_dense_b();
        const std::size_t flat = std::size_t(cfg.flat_dim());
        std::array<double, 2> z{bo[0], bo[1]};
        for (std::size_t i = 0; i < flat; ++i) {
            z[0] += wo[i] * ws.p2[i];
            z[1] += wo[flat + i] * ws.p2[i];
        }
        return z;
    }

    // gradient accumulation for one sample; caller owns zeroing/averaging
    void backward(std::span<const double> patch, const Workspace& ws,
                  double dz0, double dz1, std::span<double> grad) const {
        const std::size_t flat = std::size_t(cfg.flat_dim());
        const double* wo = params.data() + off_dense_w();
        double* dwo = grad.data() + off_dense_w();
        double* dbo = grad.data() + off_dense_b();
        std::vector<double> dp2(flat, 0.0);
        for (std::size_t i = 0; i < flat; ++i) {
            dwo[i] += dz0 * ws.p2[i];
            dwo[flat + i] += dz1 * ws.p2[i];
            dp2[i] = dz0 * wo[i] + dz1 * wo[flat + i];
        }
        dbo[0] += dz0;
        dbo[1] += dz1;

        std::vector<double> dr2(ws.r2.size(), 0.0);
        pool_backward(dp2, ws.arg2, dr2);
        relu_backward(ws.a2, dr2); // in place: masks where a2 <= 0

        std::vector<double> dp1(ws.p1.size(), 0.0);
        conv_backward(ws.p1.data(), cfg.conv1_filters, cfg.pool1_h(),
                      cfg.pool1_w(), params.data() + off_conv2_w(),
                      cfg.conv2_filters, dr2,
                      grad.data() + off_conv2_w(),
                      grad.data() + off_conv2_b(), dp1.data());

        std::vector<double> dr1(ws.r1.size(), 0.0);
        pool_backward(dp1, ws.arg1, dr1);
        relu_backward(ws.a1, dr1);

        conv_backward(patch.data(), 1, cfg.input_h, cfg.input_w,
                      params.data() + off_conv1_w(), cfg.conv1_filters, dr1,
                      grad.data() + off_conv1_w(),
                      grad.data() + off_conv1_b(), nullptr);
    }

private:
    static void relu(const std::vector<double>& in, std::vector<double>& out) {
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i)
            out[i] = in[i] > 0.0 ? in[i] : 0.0;
    }

    static void relu_backward(const std::vector<double>& pre_act,
                              std::vector<double>& grad) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (pre_act[i] <= 0.0) grad[i] = 0.0;
        }
    }

    static void conv_forward(const double* in, int in_ch, int in_h, int in_w,
                             const double* weights, const double* bias,
                             int out_ch, std::vector<double>& out) {
        constexpr int kk = CnnConfig::kKernel;
        const int out_h = in_h - kk + 1;
        const int out_w = in_w - kk + 1;
        out.assign(std::size_t(out_ch) * std::size_t(out_h) * std::size_t(out_w),
                   0.0);
        for (int o = 0; o < out_ch; ++o) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) {
                    double acc = bias[o];
                    for (int c = 0; c < in_ch; ++c) {
                        const double* w =
                            weights + ((o * in_ch + c) * kk * kk);
                        const double* src =
                            in + (std::size_t(c) * std::size_t(in_h) +
                                  std::size_t(y)) *
                                     std::size_t(in_w) +
                            std::size_t(x);
                        for (int ky = 0; ky < kk; ++ky) {
                            for (int kx = 0; kx < kk; ++kx) {
                                acc += w[ky * kk + kx] *
                                       src[std::size_t(ky) * std::size_t(in_w) +
                                           std::size_t(kx)];
                            }
                        }
                    }
                    out[(std::size_t(o) * std::size_t(out_h) + std::size_t(y)) *
                            std::size_t(out_w) +
                        std::size_t(x)] = acc;
                }
            }
        }
    }

    static void conv_backward(const double* in, int in_ch, int in_h, int in_w,
                              const double* weights, int out_ch,
                              const std::vector<double>& dout, double* dweights,
                              double* dbias, double* din) {
        constexpr int kk = CnnConfig::kKernel;
        const int out_h = in_h - kk + 1;
        const int out_w = in_w - kk + 1;
        for (int o = 0; o < out_ch; ++o) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) {
                    const double g =
                        dout[(std::size_t(o) * std::size_t(out_h) +
                              std::size_t(y)) *
                                 std::size_t(out_w) +
                             std::size_t(x)];
                    if (g == 0.0) continue;
                    dbias[o] += g;
                    for (int c = 0; c < in_ch; ++c) {
                        const std::size_t w_base =
                            std::size_t((o * in_ch + c) * kk * kk);
                        const std::size_t in_base =
                            (std::size_t(c) * std::size_t(in_h) +
                             std::size_t(y)) *
                                std::size_t(in_w) +
                            std::size_t(x);
                        for (int ky = 0; ky < kk; ++ky) {
                            for (int kx = 0; kx < kk; ++kx) {
                                const std::size_t in_idx =
                                    in_base +
                                    std::size_t(ky) * std::size_t(in_w) +
                                    std::size_t(kx);
                                dweights[w_base + std::size_t(ky * kk + kx)] +=
                                    g * in[in_idx];
                                if (din)
                                    din[in_idx] +=
                                        g *
                                        weights[w_base +
                                                std::size_t(ky * kk + kx)];
                            }
                        }
                    }
                }
            }
        }
    }

    static void pool_forward(const std::vector<double>& in, int ch, int in_h,
                             int in_w, std::vector<double>& out,
                             std::vector<std::size_t>& argmax) {
        const int out_h = CnnConfig::pooled(in_h);
        const int out_w = CnnConfig::pooled(in_w);
        const int win_h = in_h >= 2 ? 2 : 1;
        const int win_w = in_w >= 2 ? 2 : 1;
        out.assign(std::size_t(ch) * std::size_t(out_h) * std::size_t(out_w),
                   0.0);
        argmax.assign(out.size(), 0);
        for (int c = 0; c < ch; ++c) {
            for (int y = 0; y < out_h; ++y) {
                for (int x = 0; x < out_w; ++x) {
                    double best = -1e300;
                    std::size_t best_idx = 0;
                    for (int wy = 0; wy < win_h; ++wy) {
                        for (int wx = 0; wx < win_w; ++wx) {
                            const std::size_t idx =
                                (std::size_t(c) * std::size_t(in_h) +
                                 std::size_t(y * 2 + wy)) *
                                    std::size_t(in_w) +
                                std::size_t(x * 2 + wx);
                            if (in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    const std::size_t out_idx =
                        (std::size_t(c) * std::size_t(out_h) + std::size_t(y)) *
                            std::size_t(out_w) +
                        std::size_t(x);
                    out[out_idx] = best;
                    argmax[out_idx] = best_idx;
                }
            }
        }
    }

    static void pool_backward(const std::vector<double>& dout,
                              const std::vector<std::size_t>& argmax,
                              std::vector<double>& din) {
        for (std::size_t i = 0; i < dout.size(); ++i) {
            din[argmax[i]] += dout[i];
        }
    }
};

// Mean softmax cross-entropy and gradient over a batch of patches.
inline double cnn_loss_and_grad(const CnnModel& model,
                                const std::vector<std::vector<double>>& patches,
                                const std::vector<int>& labels,
                                std::span<double> grad_out) {
    if (patches.size() != labels.size() || patches.empty())
        throw nn::ShapeMismatch("cnn_loss_and_grad: bad batch shape");
    if (grad_out.size() != model.params.size())
        throw nn::ShapeMismatch("cnn_loss_and_grad: bad gradient buffer");
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    double total = 0.0;
    CnnModel::Workspace ws;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const auto z = model.forward(patches[i], ws);
        double dz0 = 0.0, dz1 = 0.0;
        total += nn::softmax_xent2(z[0], z[1], labels[i], &dz0, &dz1);
        model.backward(patches[i], ws, dz0, dz1, grad_out);
    }
    const double inv = 1.0 / double(patches.size());
    for (double& g : grad_out) g *= inv;
    return total * inv;
}

struct CnnTrainConfig {
    int epochs = 50;
    int batch_size = 32;
    nn::AdamConfig adam{};
    std::uint64_t shuffle_seed = 0;
};

inline CnnModel cnn_train(const std::vector<std::vector<double>>& patches,
                          const std::vector<int>& labels,
                          const CnnConfig& model_cfg,
                          const CnnTrainConfig& train_cfg,
                          const PatchStats& stats,
                          std::vector<nn::EpochStat>* history = nullptr) {
    if (patches.empty() || patches.size() != labels.size())
        throw nn::ShapeMismatch("cnn_train: bad training set shape");

    CnnModel model = CnnModel::init(model_cfg);
    model.stats = stats;
    nn::Adam adam(train_cfg.adam);
    std::vector<double> grad(model.params.size());
    detail::Rng rng(train_cfg.shuffle_seed);

    std::vector<std::size_t> order(patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        detail::shuffle(order, rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(train_cfg.batch_size)) {
            const std::size_t end = std::min(
                order.size(), start + std::size_t(train_cfg.batch_size));
            std::vector<std::vector<double>> batch;
            std::vector<int> batch_labels;
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(patches[order[k]]);
                batch_labels.push_back(labels[order[k]]);
            }
            const double loss =
                cnn_loss_and_grad(model, batch, batch_labels, grad);
            if (!std::isfinite(loss)) {
                throw nn::NanLoss("cnn_train: non-finite loss in epoch " +
                                  std::to_string(epoch) + ", batch " +
                                  std::to_string(batches));
            }
            adam.step(model.params, grad);
            epoch_loss += loss;
            ++batches;
        }
        if (history) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < patches.size(); ++i) {
                const auto p = model.probabilities(patches[i]);
                correct += (p[1] >= 0.5 ? 1 : 0) == labels[i];
            }
            history->push_back({epoch, epoch_loss / double(batches),
                                double(correct) / double(patches.size())});
        }
    }
    return model;
}

} // namespace voicescreen::models
