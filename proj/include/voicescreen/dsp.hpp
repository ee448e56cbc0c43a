#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "voicescreen/audio.hpp"
#include "voicescreen/detail/fft.hpp"
#include "voicescreen/detail/sha256.hpp"
#include "voicescreen/error.hpp"

namespace voicescreen::dsp {

class TooShort : public DataError {
public:
    using DataError::DataError;
};

class InvalidRange : public DataError {
public:
    using DataError::DataError;
};

// Every extraction hyperparameter lives here and is folded into hash(), so
// features produced under different settings can never be mixed silently.
struct DspConfig {
    int frame_len = 400;  // 25 ms @ 16 kHz
    int hop_len = 160;    // 10 ms
    int fft_size = 512;
    int n_mels = 40;
    int n_mfcc = 13;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    double preemphasis = 0.97;
    double log_floor = 1e-10;

    void validate() const {
        if (frame_len <= 0 || hop_len <= 0 || fft_size <= 0)
            throw InvalidRange("frame/hop/fft sizes must be positive");
        if (!(hop_len <= frame_len && frame_len <= fft_size))
            throw InvalidRange("need hop_len <= frame_len <= fft_size");
        if (!detail::is_power_of_two(std::size_t(fft_size)))
            throw InvalidRange("fft_size must be a power of two");
        if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz))
            throw InvalidRange("need 0 <= fmin < fmax");
        if (n_mels <= 0 || n_mfcc <= 0 || n_mfcc > n_mels)
            throw InvalidRange("need 0 < n_mfcc <= n_mels");
        if (!(preemphasis >= 0.0 && preemphasis < 1.0))
            throw InvalidRange("preemphasis must be in [0, 1)");
        if (!(log_floor > 0.0))
            throw InvalidRange("log_floor must be positive");
    }

    std::string canonical_string() const {
        std::ostringstream os;
        os.precision(17);
        os << "frame_len=" << frame_len << ";hop_len=" << hop_len
           << ";fft_size=" << fft_size << ";n_mels=" << n_mels
           << ";n_mfcc=" << n_mfcc << ";fmin_hz=" << fmin_hz
           << ";fmax_hz=" << fmax_hz << ";preemphasis=" << preemphasis
           << ";log_floor=" << log_floor;
        return os.str();
    }

    std::array<std::uint8_t, 32> hash() const {
        return detail::sha256(canonical_string());
    }
};

enum class FeatureKind : std::uint32_t { mfcc = 0, log_mel = 1 };

inline const char* feature_kind_name(FeatureKind k) {
    return k == FeatureKind::mfcc ? "mfcc" : "log_mel";
}

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major
    FeatureKind kind = FeatureKind::mfcc;
    std::array<std::uint8_t, 32> config_hash{};

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// mel(f) = 1127 * ln(1 + f/700), the natural-log form of the classic
// 2595*log10 parameterization. This constant keeps the 1000 Hz -> 1000 mel
// anchor within 0.01; the filterbank is invariant to the choice because
// triangle weights are ratios of mel differences.
inline double hz_to_mel(double f_hz) {
    return 1127.0 * std::log(1.0 + f_hz / 700.0);
}

inline double mel_to_hz(double mel) {
    return 700.0 * (std::exp(mel / 1127.0) - 1.0);
}

// Periodic Hann: w[n] = 0.5 * (1 - cos(2*pi*n/N)), N = frame_len.
inline std::vector<double> hann_window(int frame_len) {
    std::vector<double> w(std::size_t(frame_len), 0.0);
    constexpr double two_pi = 6.283185307179586476925287;
    for (int n = 0; n < frame_len; ++n) {
        w[std::size_t(n)] = 0.5 * (1.0 - std::cos(two_pi * n / frame_len));
    }
    return w;
}

// Pre-emphasis, framing at hop stride (final partial frame dropped), then
// the periodic Hann taper per frame.
inline std::vector<std::vector<double>> frame_and_window(
    const audio::AudioBuffer& buf, const DspConfig& cfg) {
    cfg.validate();
    const std::size_t n = buf.samples.size();
    if (n < std::size_t(cfg.frame_len))
        throw TooShort("buffer shorter than one frame (" +
                       std::to_string(n) + " < " +
                       std::to_string(cfg.frame_len) + ")");

    std::vector<double> emphasized(n);
    emphasized[0] = buf.samples[0];
    for (std::size_t t = 1; t < n; ++t) {
        emphasized[t] = buf.samples[t] - cfg.preemphasis * buf.samples[t - 1];
    }

    const std::vector<double> window = hann_window(cfg.frame_len);
    const std::size_t n_frames =
        (n - std::size_t(cfg.frame_len)) / std::size_t(cfg.hop_len) + 1;

    std::vector<std::vector<double>> frames(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * std::size_t(cfg.hop_len);
        std::vector<double> frame(std::size_t(cfg.frame_len));
        for (int i = 0; i < cfg.frame_len; ++i) {
            frame[std::size_t(i)] =
                emphasized[start + std::size_t(i)] * window[std::size_t(i)];
        }
        frames[f] = std::move(frame);
    }
    return frames;
}

// |DFT_k|^2 for k = 0..fft_size/2 on a zero-padded frame.
inline std::vector<double> power_spectrum(const std::vector<double>& frame,
                                          const DspConfig& cfg) {
    cfg.validate();
    if (frame.size() != std::size_t(cfg.frame_len))
        throw DataError("power_spectrum: frame length " +
                        std::to_string(frame.size()) + " != frame_len " +
                        std::to_string(cfg.frame_len));
    std::vector<std::complex<double>> buf(std::size_t(cfg.fft_size));
    for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
    detail::fft_inplace(buf);
    std::vector<double> power(std::size_t(cfg.fft_size / 2 + 1));
    for (std::size_t k = 0; k < power.size(); ++k) {
        power[k] = std::norm(buf[k]);
    }
    return power;
}

// Triangle evaluated in mel coordinates; apex height 1 at c_center.
inline double mel_triangle_weight(double c_prev, double c_center,
                                  double c_next, double mel) {
    const double up = (mel - c_prev) / (c_center - c_prev);
    const double down = (c_next - mel) / (c_next - c_center);
    return std::max(0.0, std::min(up, down));
}

// n_mels + 2 points equally spaced in mel between fmin and fmax; filter m
// rises over [c_{m-1}, c_m] and falls over [c_m, c_{m+1}].
inline std::vector<double> mel_center_points(const DspConfig& cfg) {
    const double mel_lo = hz_to_mel(cfg.fmin_hz);
    const double mel_hi = hz_to_mel(cfg.fmax_hz);
    const double spacing = (mel_hi - mel_lo) / (cfg.n_mels + 1);
    if (!(spacing > 1e-6))
        throw InvalidRange("mel grid collapses: fmax too close to fmin for " +
                           std::to_string(cfg.n_mels) + " filters");
    std::vector<double> centers(std::size_t(cfg.n_mels) + 2);
    for (std::size_t j = 0; j < centers.size(); ++j) {
        centers[j] = mel_lo + double(j) * spacing;
    }
    return centers;
}

// n_mels x (fft_size/2 + 1) triangular weights, unnormalized peak 1.
inline std::vector<std::vector<double>> mel_filterbank(const DspConfig& cfg,
                                                       int sample_rate_hz) {
    cfg.validate();
    if (sample_rate_hz <= 0)
        throw InvalidRange("sample rate must be positive");
    if (cfg.fmax_hz > sample_rate_hz / 2.0 + 1e-9)
        throw InvalidRange("fmax exceeds Nyquist for sample rate " +
                           std::to_string(sample_rate_hz));

    const std::vector<double> centers = mel_center_points(cfg);
    const std::size_t n_bins = std::size_t(cfg.fft_size / 2 + 1);

    std::vector<double> bin_mel(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
        bin_mel[k] = hz_to_mel(double(k) * sample_rate_hz / cfg.fft_size);
    }

    std::vector<std::vector<double>> fb(
        std::size_t(cfg.n_mels), std::vector<double>(n_bins, 0.0));
    for (int m = 1; m <= cfg.n_mels; ++m) {
        auto& row = fb[std::size_t(m - 1)];
        for (std::size_t k = 0; k < n_bins; ++k) {
            row[k] = mel_triangle_weight(centers[std::size_t(m - 1)],
                                         centers[std::size_t(m)],
                                         centers[std::size_t(m + 1)],
                                         bin_mel[k]);
        }
    }
    return fb;
}

// Per frame: ln(filterbank . power_spectrum + log_floor).
inline FeatureMatrix log_mel_spectrogram(const audio::AudioBuffer& buf,
                                         const DspConfig& cfg) {
    const auto frames = frame_and_window(buf, cfg);
    const auto fb = mel_filterbank(cfg, buf.sample_rate_hz);
    const std::size_t n_bins = std::size_t(cfg.fft_size / 2 + 1);

    FeatureMatrix out;
    out.kind = FeatureKind::log_mel;
    out.config_hash = cfg.hash();
    out.rows = frames.size();
    out.cols = std::size_t(cfg.n_mels);
    out.data.resize(out.rows * out.cols);

    for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::vector<double> power = power_spectrum(frames[f], cfg);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            const auto& row = fb[std::size_t(m)];
            for (std::size_t k = 0; k < n_bins; ++k) e += row[k] * power[k];
            out.at(f, std::size_t(m)) = std::log(e + cfg.log_floor);
        }
    }
    return out;
}

// Orthonormal DCT-II basis, n_out x n_in rows. Cached per call site; the
// matmul against this table is the fast path the direct cosine-sum oracle
// checks in the tests.
inline std::vector<double> dct_ii_basis(int n_in, int n_out) {
    std::vector<double> basis(std::size_t(n_out) * std::size_t(n_in));
    constexpr double pi = 3.141592653589793238462643;
    const double s0 = std::sqrt(1.0 / n_in);
    const double sk = std::sqrt(2.0 / n_in);
    for (int k = 0; k < n_out; ++k) {
        for (int n = 0; n < n_in; ++n) {
            basis[std::size_t(k) * std::size_t(n_in) + std::size_t(n)] =
                (k == 0 ? s0 : sk) *
                std::cos(pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
        }
    }
    return basis;
}

inline std::vector<double> dct_ii_ortho(const std::vector<double>& x,
                                        int n_out) {
    const int n_in = int(x.size());
    const std::vector<double> basis = dct_ii_basis(n_in, n_out);
    std::vector<double> out(std::size_t(n_out), 0.0);
    for (int k = 0; k < n_out; ++k) {
        double acc = 0.0;
        const double* row = basis.data() + std::size_t(k) * std::size_t(n_in);
        for (int n = 0; n < n_in; ++n) acc += row[std::size_t(n)] * x[std::size_t(n)];
        out[std::size_t(k)] = acc;
    }
    return out;
}

// DCT-II along the mel axis of the log-Mel spectrogram, coefficients
// 0..n_mfcc-1 kept.
inline FeatureMatrix mfcc(const audio::AudioBuffer& buf, const DspConfig& cfg) {
    const FeatureMatrix logmel = log_mel_spectrogram(buf, cfg);
    const std::vector<double> basis = dct_ii_basis(cfg.n_mels, cfg.n_mfcc);

    FeatureMatrix out;
    out.kind = FeatureKind::mfcc;
    out.config_hash = cfg.hash();
    out.rows = logmel.rows;
    out.cols = std::size_t(cfg.n_mfcc);
    out.data.resize(out.rows * out.cols);

    for (std::size_t f = 0; f < logmel.rows; ++f) {
        const double* in = logmel.row(f);
        for (int k = 0; k < cfg.n_mfcc; ++k) {
            double acc = 0.0;
            const double* row =
                basis.data() + std::size_t(k) * std::size_t(cfg.n_mels);
            for (int n = 0; n < cfg.n_mels; ++n) acc += row[std::size_t(n)] * in[n];
            out.at(f, std::size_t(k)) = acc;
        }
    }
    return out;
}

// The 11 scalar descriptors. Population moments; excess kurtosis; quartiles
// by linear interpolation of sorted order statistics; mode as the center of
// the fullest of 256 equal-width bins over [min, max] (lowest bin wins ties).
struct StatDescriptor {
    double mean = 0, std_dev = 0, max = 0, min = 0, median = 0, kurtosis = 0,
           q1 = 0, q3 = 0, iqr = 0, skewness = 0, mode = 0;
    bool degenerate = false; // all samples equal; skewness/kurtosis forced 0
};

namespace detail_stats {
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}
} // namespace detail_stats

inline StatDescriptor stat_features(const audio::AudioBuffer& buf,
                                    std::vector<std::string>* warnings = nullptr) {
    const std::size_t n = buf.samples.size();
    if (n < 2) throw TooShort("stat_features needs at least 2 samples");

    StatDescriptor d;
    double sum = 0.0;
    for (double s : buf.samples) sum += s;
    d.mean = sum / double(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double s : buf.samples) {
        const double dx = s - d.mean;
        const double dx2 = dx * dx;
        m2 += dx2;
        m3 += dx2 * dx;
        m4 += dx2 * dx2;
    }
    m2 /= double(n);
    m3 /= double(n);
    m4 /= double(n);
    d.std_dev = std::sqrt(m2);

    std::vector<double> sorted = buf.samples;
    std::sort(sorted.begin(), sorted.end());
    d.min = sorted.front();
    d.max = sorted.back();
    d.median = detail_stats::quantile_sorted(sorted, 0.5);
    d.q1 = detail_stats::quantile_sorted(sorted, 0.25);
    d.q3 = detail_stats::quantile_sorted(sorted, 0.75);
    d.iqr = d.q3 - d.q1;

    if (m2 == 0.0) {
        d.degenerate = true;
        d.skewness = 0.0;
        d.kurtosis = 0.0;
        d.mode = d.min;
        if (warnings)
            warnings->push_back(
                "degenerate signal: all samples equal, skewness/kurtosis set to 0");
        return d;
    }
    d.skewness = m3 / std::pow(m2, 1.5);
    d.kurtosis = m4 / (m2 * m2) - 3.0;

    constexpr int kModeBins = 256;
    const double width = d.max - d.min;
    std::array<std::uint32_t, kModeBins> counts{};
    for (double s : buf.samples) {
        int bin = int((s - d.min) / width * kModeBins);
        bin = std::clamp(bin, 0, kModeBins - 1);
        counts[std::size_t(bin)]++;
    }
    std::size_t best = 0;
    for (std::size_t b = 1; b < counts.size(); ++b) {
        if (counts[b] > counts[best]) best = b;
    }
    d.mode = d.min + (double(best) + 0.5) * width / kModeBins;
    return d;
}

} // namespace voicescreen::dsp
