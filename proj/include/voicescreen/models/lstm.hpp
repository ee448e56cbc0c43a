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

struct LstmConfig {
    int input_dim = 13;   // MFCC coefficient count
    int hidden_dim = 128;
    int seq_len = 300;    // frames; shorter sequences stop early, longer are
                          // truncated from the end
    std::uint64_t seed = 0;
};

// One prepared input: the first min(frames, seq_len) MFCC frames.
struct LstmSequence {
    std::vector<double> frames; // valid_len x input_dim, row-major
    int valid_len = 0;
};

inline LstmSequence prepare_sequence(const dsp::FeatureMatrix& fm,
                                     const LstmConfig& cfg) {
    if (fm.cols != std::size_t(cfg.input_dim))
        throw nn::ShapeMismatch("sequence has " + std::to_string(fm.cols) +
                                " dims, model expects " +
                                std::to_string(cfg.input_dim));
    LstmSequence seq;
    seq.valid_len = int(std::min(fm.rows, std::size_t(cfg.seq_len)));
    seq.frames.assign(fm.data.begin(),
                      fm.data.begin() +
                          std::size_t(seq.valid_len) * fm.cols);
    return seq;
}

// Gate order everywhere: input, forget, output, cell-candidate.
class LstmModel {
public:
    LstmConfig cfg;
    std::vector<double> params;

    static LstmModel init(const LstmConfig& cfg) {
        LstmModel m;
        m.cfg = cfg;
        m.params.assign(m.param_count_for(cfg), 0.0);
        detail::Rng rng(cfg.seed);
        const double w_scale = 1.0 / std::sqrt(double(cfg.input_dim));
        const double u_scale = 1.0 / std::sqrt(double(cfg.hidden_dim));
        const std::size_t h = std::size_t(cfg.hidden_dim);
        const std::size_t d = std::size_t(cfg.input_dim);
        for (std::size_t i = 0; i < 4 * h * d; ++i) {
            m.params[m.off_w() + i] = rng.uniform(-w_scale, w_scale);
        }
        for (std::size_t i = 0; i < 4 * h * h; ++i) {
            m.params[m.off_u() + i] = rng.uniform(-u_scale, u_scale);
        }
        // biases start at zero except the forget gate (+1)
        for (std::size_t i = 0; i < h; ++i) m.params[m.off_b(1) + i] = 1.0;
        for (std::size_t i = 0; i < 2 * h + 2; ++i) {
            m.params[m.off_dense_w() + i] =
                i < 2 * h ? rng.uniform(-u_scale, u_scale) : 0.0;
        }
        return m;
    }

    std::size_t param_count() const { return params.size(); }

    static std::size_t param_count_for(const LstmConfig& cfg) {
        const std::size_t h = std::size_t(cfg.hidden_dim);
        const std::size_t d = std::size_t(cfg.input_dim);
        return 4 * h * d + 4 * h * h + 4 * h + 2 * h + 2;
    }

    // flat layout: W[4] | U[4] | b[4] | dense_w | dense_b
    std::size_t off_w(int gate = 0) const {
        return std::size_t(gate) * hd();
    }
    std::size_t off_u(int gate = 0) const {
        return 4 * hd() + std::size_t(gate) * hh();
    }
    std::size_t off_b(int gate = 0) const {
        return 4 * hd() + 4 * hh() + std::size_t(gate) * h();
    }
    std::size_t off_dense_w() const { return 4 * hd() + 4 * hh() + 4 * h(); }
    std::size_t off_dense_b() const { return off_dense_w() + 2 * h(); }

    std::vector<nn::TensorSpec> tensor_specs() const {
        static constexpr const char* gate_names[4] = {"input", "forget",
                                                      "output", "cell"};
        std::vector<nn::TensorSpec> specs;
        for (int g = 0; g < 4; ++g) {
            specs.push_back({std::string("w_") + gate_names[g],
                             {h(), std::size_t(cfg.input_dim)}, off_w(g)});
        }
        for (int g = 0; g < 4; ++g) {
            specs.push_back({std::string("u_") + gate_names[g], {h(), h()},
                             off_u(g)});
        }
        for (int g = 0; g < 4; ++g) {
            specs.push_back({std::string("b_") + gate_names[g], {h()},
                             off_b(g)});
        }
        specs.push_back({"dense_w", {2, h()}, off_dense_w()});
        specs.push_back({"dense_b", {2}, off_dense_b()});
        return specs;
    }

    std::array<double, 2> forward(const LstmSequence& seq) const {
        std::vector<double> h_state(h(), 0.0), c_state(h(), 0.0);
        std::vector<double> gates(4 * h());
        for (int t = 0; t < seq.valid_len; ++t) {
            step(seq.frames.data() + std::size_t(t) * std::size_t(cfg.input_dim),
                 h_state, c_state, gates);
        }
        return logits(h_state);
    }

    std::array<double, 2> probabilities(const LstmSequence& seq) const {
        const auto z = forward(seq);
        return nn::softmax2(z[0], z[1]);
    }

    std::array<double, 2> probabilities(const dsp::FeatureMatrix& fm) const {
        return probabilities(prepare_sequence(fm, cfg));
    }

private:
    std::size_t h() const { return std::size_t(cfg.hidden_dim); }
    std::size_t hd() const { return h() * std::size_t(cfg.input_dim); }
    std::size_t hh() const { return h() * h(); }

    friend double lstm_loss_and_grad(const LstmModel&,
                                     const std::vector<LstmSequence>&,
                                     const std::vector<int>&,
                                     std::span<double>);

    // one recurrence step; gates buffer holds i|f|o|g activations
    void step(const double* x, std::vector<double>& h_state,
              std::vector<double>& c_state, std::vector<double>& gates) const {
        const std::size_t hn = h();
        const std::size_t d = std::size_t(cfg.input_dim);
        for (int g = 0; g < 4; ++g) {
            const double* w = params.data() + off_w(g);
            const double* u = params.data() + off_u(g);
            const double* b = params.data() + off_b(g);
            double* out = gates.data() + std::size_t(g) * hn;
            for (std::size_t r = 0; r < hn; ++r) {
                double acc = b[r];
                const double* wr = w + r * d;
                for (std::size_t k = 0; k < d; ++k) acc += wr[k] * x[k];
                const double* ur = u + r * hn;
                for (std::size_t k = 0; k < hn; ++k) acc += ur[k] * h_state[k];
                out[r] = acc;
            }
        }
        for (std::size_t r = 0; r < hn; ++r) {
            const double gi = nn::sigmoid(gates[r]);
            const double gf = nn::sigmoid(gates[hn + r]);
            const double go = nn::sigmoid(gates[2 * hn + r]);
            const double gg = std::tanh(gates[3 * hn + r]);
            c_state[r] = gf * c_state[r] + gi * gg;
            h_state[r] = go * std::tanh(c_state[r]);
        }
    }

    std::array<double, 2> logits(const std::vector<double>& h_state) const {
        const double* wo = params.data() + off_dense_w();
        const double* bo = params.data() + off_dense_b();
        std::array<double, 2> z{bo[0], bo[1]};
        for (std::size_t r = 0; r < h(); ++r) {
            z[0] += wo[r] * h_state[r];
            z[1] += wo[h() + r] * h_state[r];
        }
        return z;
    }
};

// Mean softmax cross-entropy over the batch plus its exact gradient via full
// backpropagation through time (no truncation inside a sequence).
inline double lstm_loss_and_grad(const LstmModel& model,
                                 const std::vector<LstmSequence>& batch,
                                 const std::vector<int>& labels,
                                 std::span<double> grad_out) {
    if (batch.size() != labels.size() || batch.empty())
        throw nn::ShapeMismatch("lstm_loss_and_grad: bad batch shape");
    if (grad_out.size() != model.params.size())
        throw nn::ShapeMismatch("lstm_loss_and_grad: bad gradient buffer");

    const std::size_t hn = std::size_t(model.cfg.hidden_dim);
    const std::size_t d = std::size_t(model.cfg.input_dim);
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    double total_loss = 0.0;

    // per-step caches for one sequence
    std::vector<std::vector<double>> gi, gf, go, gg, cs, tc, hs;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& seq = batch[s];
        const int t_max = seq.valid_len;
        gi.assign(std::size_t(t_max), std::vector<double>(hn));
        gf = gi;
        go = gi;
        gg = gi;
        cs = gi;
        tc = gi;
        hs = gi;

        std::vector<double> h_prev(hn, 0.0), c_prev(hn, 0.0);
        std::vector<double> acts(4 * hn);
        for (int t = 0; t < t_max; ++t) {
            const double* x = seq.frames.data() + std::size_t(t) * d;
            for (int g = 0; g < 4; ++g) {
                const double* w = model.params.data() + model.off_w(g);
                const double* u = model.params.data() + model.off_u(g);
                const double* b = model.params.data() + model.off_b(g);
                double* out = acts.data() + std::size_t(g) * hn;
                for (std::size_t r = 0; r < hn; ++r) {
                    double acc = b[r];
                    const double* wr = w + r * d;
                    for (std::size_t k = 0; k < d; ++k) acc += wr[k] * x[k];
                    const double* ur = u + r * hn;
                    for (std::size_t k = 0; k < hn; ++k)
                        acc += ur[k] * h_prev[k];
                    out[r] = acc;
                }
            }
            auto& ti = gi[std::size_t(t)];
            auto& tf = gf[std::size_t(t)];
            auto& to = go[std::size_t(t)];
            auto& tg = gg[std::size_t(t)];
            auto& tcs = cs[std::size_t(t)];
            auto& ttc = tc[std::size_t(t)];
            auto& ths = hs[std::size_t(t)];
            for (std::size_t r = 0; r < hn; ++r) {
                ti[r] = nn::sigmoid(acts[r]);
                tf[r] = nn::sigmoid(acts[hn + r]);
                to[r] = nn::sigmoid(acts[2 * hn + r]);
                tg[r] = std::tanh(acts[3 * hn + r]);
                tcs[r] = tf[r] * c_prev[r] + ti[r] * tg[r];
                ttc[r] = std::tanh(tcs[r]);
                ths[r] = to[r] * ttc[r];
            }
            h_prev = ths;
            c_prev = tcs;
        }

        double dz0 = 0.0, dz1 = 0.0;
        total_loss += nn::softmax_xent2(
            [&] {
                const double* wo = model.params.data() + model.off_dense_w();
                const double* bo = model.params.data() + model.off_dense_b();
                double z = bo[0];
                for (std::size_t r = 0; r < hn; ++r) z += wo[r] * h_prev[r];
                return z;
            }(),
            [&] {
                const double* wo = model.params.data() + model.off_dense_w();
                const double* bo = model.params.data() + model.off_dense_b();
                double z = bo[1];
                for (std::size_t r = 0; r < hn; ++r)
                    z += wo[hn + r] * h_prev[r];
                return z;
            }(),
            labels[s], &dz0, &dz1);

        // dense layer gradients and dh at the last valid step
        std::vector<double> dh(hn, 0.0), dc(hn, 0.0);
        {
            double* dwo = grad_out.data() + model.off_dense_w();
            double* dbo = grad_out.data() + model.off_dense_b();
            const double* wo = model.params.data() + model.off_dense_w();
            for (std::size_t r = 0; r < hn; ++r) {
                dwo[r] += dz0 * h_prev[r];
                dwo[hn + r] += dz1 * h_prev[r];
                dh[r] = dz0 * wo[r] + dz1 * wo[hn + r];
            }
            dbo[0] += dz0;
            dbo[1] += dz1;
        }

        std::vector<double> da(4 * hn), dh_prev(hn);
        for (int t = t_max - 1; t >= 0; --t) {
            const auto& ti = gi[std::size_t(t)];
            const auto& tf = gf[std::size_t(t)];
            const auto& to = go[std::size_t(t)];
            const auto& tg = gg[std::size_t(t)];
            const auto& ttc = tc[std::size_t(t)];
            const double* c_before =
                t > 0 ? cs[std::size_t(t - 1)].data() : nullptr;
            const double* h_before =
                t > 0 ? hs[std::size_t(t - 1)].data() : nullptr;
            const double* x = seq.frames.data() + std::size_t(t) * d;

            for (std::size_t r = 0; r < hn; ++r) {
                const double d_out = dh[r] * ttc[r];
                dc[r] += dh[r] * to[r] * (1.0 - ttc[r] * ttc[r]);
                const double d_in = dc[r] * tg[r];
                const double d_cand = dc[r] * ti[r];
                const double cp = c_before ? c_before[r] : 0.0;
                const double d_forget = dc[r] * cp;
                da[r] = d_in * ti[r] * (1.0 - ti[r]);
                da[hn + r] = d_forget * tf[r] * (1.0 - tf[r]);
                da[2 * hn + r] = d_out * to[r] * (1.0 - to[r]);
                da[3 * hn + r] = d_cand * (1.0 - tg[r] * tg[r]);
                dc[r] *= tf[r]; // becomes dc_prev
            }

            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            for (int g = 0; g < 4; ++g) {
                const double* dag = da.data() + std::size_t(g) * hn;
                double* dw = grad_out.data() + model.off_w(g);
                double* du = grad_out.data() + model.off_u(g);
                double* db = grad_out.data() + model.off_b(g);
                const double* u = model.params.data() + model.off_u(g);
                for (std::size_t r = 0; r < hn; ++r) {
                    const double a = dag[r];
                    if (a == 0.0) continue;
                    double* dwr = dw + r * d;
                    for (std::size_t k = 0; k < d; ++k) dwr[k] += a * x[k];
                    if (h_before) {
                        double* dur = du + r * hn;
                        for (std::size_t k = 0; k < hn; ++k)
                            dur[k] += a * h_before[k];
                    }
                    db[r] += a;
                    const double* ur = u + r * hn;
                    for (std::size_t k = 0; k < hn; ++k)
                        dh_prev[k] += a * ur[k];
                }
            }
            dh = dh_prev;
        }
    }

    const double inv = 1.0 / double(batch.size());
    for (double& g : grad_out) g *= inv;
    return total_loss * inv;
}

struct LstmTrainConfig {
    int epochs = 50;
    int batch_size = 32;
    nn::AdamConfig adam{};
    double clip_norm = 5.0;
    std::uint64_t shuffle_seed = 0;
};

// Mini-batch Adam training with deterministic batch order; aborts with a
// diagnostic if the loss goes non-finite.
inline LstmModel lstm_train_bptt(const std::vector<LstmSequence>& sequences,
                                 const std::vector<int>& labels,
                                 const LstmConfig& model_cfg,
                                 const LstmTrainConfig& train_cfg,
                                 std::vector<nn::EpochStat>* history = nullptr) {
    if (sequences.empty() || sequences.size() != labels.size())
        throw nn::ShapeMismatch("lstm_train_bptt: bad training set shape");

    LstmModel model = LstmModel::init(model_cfg);
    nn::Adam adam(train_cfg.adam);
    std::vector<double> grad(model.params.size());
    detail::Rng rng(train_cfg.shuffle_seed);

    std::vector<std::size_t> order(sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        detail::shuffle(order, rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(train_cfg.batch_size)) {
            const std::size_t end = std::min(
                order.size(), start + std::size_t(train_cfg.batch_size));
            std::vector<LstmSequence> batch;
            std::vector<int> batch_labels;
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(sequences[order[k]]);
                batch_labels.push_back(labels[order[k]]);
            }
            const double loss =
                lstm_loss_and_grad(model, batch, batch_labels, grad);
            if (!std::isfinite(loss)) {
                throw nn::NanLoss("lstm_train_bptt: non-finite loss in epoch " +
                                  std::to_string(epoch) + ", batch " +
                                  std::to_string(batches));
            }
            nn::clip_by_global_norm(grad, train_cfg.clip_norm);
            adam.step(model.params, grad);
            epoch_loss += loss;
            ++batches;
        }
        if (history) {
            std::size_t correct = 0;
            for (std::size_t i = 0; i < sequences.size(); ++i) {
                const auto p = model.probabilities(sequences[i]);
                correct += (p[1] >= 0.5 ? 1 : 0) == labels[i];
            }
            history->push_back({epoch, epoch_loss / double(batches),
                                double(correct) / double(sequences.size())});
        }
    }
    return model;
}

} // namespace voicescreen::models
