#pragma once

// Independent reference implementations the optimized paths are checked
// against. Everything here is deliberately naive: direct O(N^2) transforms,
// long-double accumulation, pairwise counting. None of it shares code with
// the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.141592653589793238462643;

// Direct O(N^2) DFT power spectrum of a zero-padded frame.
inline std::vector<double> dft_power(const std::vector<double>& frame,
                                     std::size_t fft_size) {
    std::vector<double> power(fft_size / 2 + 1);
    for (std::size_t k = 0; k <= fft_size / 2; ++k) {
        long double re = 0.0L, im = 0.0L;
        for (std::size_t n = 0; n < frame.size(); ++n) {
            const long double ang =
                -2.0L * kPi * (long double)(k) * (long double)(n) / (long double)(fft_size);
            re += (long double)(frame[n]) * std::cos((double)ang);
            im += (long double)(frame[n]) * std::sin((double)ang);
        }
        power[k] = double(re * re + im * im);
    }
    return power;
}

// Direct cosine-sum orthonormal DCT-II.
inline std::vector<double> dct_ii(const std::vector<double>& x, int n_out) {
    const int n = int(x.size());
    std::vector<double> out(std::size_t(n_out), 0.0);
    for (int k = 0; k < n_out; ++k) {
        long double acc = 0.0L;
        for (int i = 0; i < n; ++i) {
            acc += (long double)(x[std::size_t(i)]) *
                   std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
        }
        const double scale = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        out[std::size_t(k)] = double(acc) * scale;
    }
    return out;
}

// Single-function MFCC reference for one analysis frame, covering
// pre-emphasis -> window -> direct DFT -> explicit mel triangles -> ln ->
// direct DCT.
inline std::vector<double> mfcc_frame_reference(
    const std::vector<double>& raw_frame, int fft_size, int n_mels, int n_mfcc,
    double fmin_hz, double fmax_hz, int sample_rate, double log_floor,
    double preemphasis = 0.0) {
    const std::size_t len = raw_frame.size();

    std::vector<double> emphasized(len);
    emphasized[0] = raw_frame[0];
    for (std::size_t i = 1; i < len; ++i) {
        emphasized[i] = raw_frame[i] - preemphasis * raw_frame[i - 1];
    }

    // periodic Hann
    std::vector<double> windowed(len);
    for (std::size_t i = 0; i < len; ++i) {
        windowed[i] = emphasized[i] *
                      (0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(len)));
    }

    const std::vector<double> power = dft_power(windowed, std::size_t(fft_size));

    const auto to_mel = [](double hz) {
        return 2595.0 * std::log10(1.0 + hz / 700.0);
    };
    const double mel_lo = to_mel(fmin_hz);
    const double mel_hi = to_mel(fmax_hz);
    const double spacing = (mel_hi - mel_lo) / (n_mels + 1);

    std::vector<double> logmel(std::size_t(n_mels), 0.0);
    for (int m = 1; m <= n_mels; ++m) {
        const double c_prev = mel_lo + (m - 1) * spacing;
        const double c_mid = mel_lo + m * spacing;
        const double c_next = mel_lo + (m + 1) * spacing;
        long double energy = 0.0L;
        for (std::size_t k = 0; k < power.size(); ++k) {
            const double mel = to_mel(double(k) * sample_rate / fft_size);
            double w = 0.0;
            if (mel >= c_prev && mel <= c_mid) {
                w = (mel - c_prev) / (c_mid - c_prev);
            } else if (mel > c_mid && mel <= c_next) {
                w = (c_next - mel) / (c_next - c_mid);
            }
            energy += (long double)(w) * (long double)(power[k]);
        }
        logmel[std::size_t(m - 1)] = std::log(double(energy) + log_floor);
    }

    return dct_ii(logmel, n_mfcc);
}

// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> params, double step = 1e-5) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = f(params);
        params[i] = saved - step;
        const double down = f(params);
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Mann-Whitney pairwise AUC: P(score_pos > score_neg) with ties counted 1/2.
inline double mann_whitney_auc(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
    long double wins = 0.0L;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            ++n_pos;
            for (std::size_t j = 0; j < scores.size(); ++j) {
                if (labels[j] != 0) continue;
                if (scores[i] > scores[j]) wins += 1.0L;
                else if (scores[i] == scores[j]) wins += 0.5L;
            }
        } else {
            ++n_neg;
        }
    }
    return double(wins / ((long double)(n_pos) * (long double)(n_neg)));
}

// Projected-gradient solver for the SVM dual:
//   min 1/2 a^T Q a - e^T a   s.t.  0 <= a <= C,  y^T a = 0
// Projection onto the box intersected with the hyperplane via bisection on
// the multiplier. Slow and steady; used only as a test oracle.
class SvmDualOracle {
public:
    SvmDualOracle(std::vector<std::vector<double>> q, std::vector<int> y,
                  double C)
        : q_(std::move(q)), y_(std::move(y)), c_(C), n_(y_.size()) {}

    double objective(const std::vector<double>& a) const {
        long double obj = 0.0L;
        for (std::size_t i = 0; i < n_; ++i) {
            long double qa = 0.0L;
            for (std::size_t j = 0; j < n_; ++j) qa += q_[i][j] * a[j];
            obj += 0.5L * (long double)(a[i]) * qa - (long double)(a[i]);
        }
        return double(obj);
    }

    std::vector<double> solve(std::size_t iters = 200000) const {
        std::vector<double> a(n_, 0.0);
        // Lipschitz bound via row sums (Gershgorin).
        double lip = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n_; ++j) row += std::fabs(q_[i][j]);
            lip = std::max(lip, row);
        }
        const double step = 1.0 / std::max(lip, 1e-12);
        std::vector<double> g(n_), trial(n_);
        for (std::size_t it = 0; it < iters; ++it) {
            for (std::size_t i = 0; i < n_; ++i) {
                double qa = 0.0;
                for (std::size_t j = 0; j < n_; ++j) qa += q_[i][j] * a[j];
                g[i] = qa - 1.0;
            }
            for (std::size_t i = 0; i < n_; ++i) trial[i] = a[i] - step * g[i];
            project(trial);
            double delta = 0.0;
            for (std::size_t i = 0; i < n_; ++i)
                delta = std::max(delta, std::fabs(trial[i] - a[i]));
            a = trial;
            if (delta < 1e-14) break;
        }
        return a;
    }

private:
    // argmin ||x - v|| s.t. 0<=x<=C, y^T x = 0: x_i = clip(v_i - nu*y_i).
    void project(std::vector<double>& v) const {
        const auto residual = [&](double nu) {
            double r = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                const double x =
                    std::clamp(v[i] - nu * double(y_[i]), 0.0, c_);
                r += double(y_[i]) * x;
            }
            return r;
        };
        double lo = -1.0, hi = 1.0;
        // residual is non-increasing in nu; bracket the root
        while (residual(lo) < 0.0) lo *= 2.0;
        while (residual(hi) > 0.0) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (residual(mid) > 0.0) lo = mid;
            else hi = mid;
        }
        const double nu = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < n_; ++i) {
            v[i] = std::clamp(v[i] - nu * double(y_[i]), 0.0, c_);
        }
    }

    std::vector<std::vector<double>> q_;
    std::vector<int> y_;
    double c_;
    std::size_t n_;
};

} // namespace oracle
