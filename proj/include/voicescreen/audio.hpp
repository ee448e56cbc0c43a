#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "voicescreen/error.hpp"

namespace voicescreen::audio {

class MalformedHeader : public DataError {
public:
    using DataError::DataError;
};

class UnsupportedEncoding : public DataError {
public:
    using DataError::DataError;
};

class EmptyAudio : public DataError {
public:
    using DataError::DataError;
};

// Canonical mono buffer every downstream stage consumes.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate_hz = 0;
    std::string source_id;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate_hz > 0
                   ? double(samples.size()) / sample_rate_hz
                   : 0.0;
    }
};

inline constexpr int kCanonicalRateHz = 16000;

namespace wav {
inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatIeeeFloat = 3;
} // namespace wav

// Decode a RIFF/WAVE container. PCM 16-bit and IEEE float 32-bit, mono or
// stereo. Stereo is downmixed by per-sample mean; 16-bit samples scale by
// 1/32768.
inline AudioBuffer decode_wav(std::span<const std::uint8_t> bytes,
                              std::string source_id = {}) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw MalformedHeader("not a RIFF/WAVE container: " + source_id);
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    const std::uint8_t* data_ptr = nullptr;
    std::size_t data_len = 0;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        char id[4];
        std::memcpy(id, bytes.data() + pos, 4);
        std::uint32_t chunk_size = 0;
        for (int i = 0; i < 4; ++i)
            chunk_size |= std::uint32_t(bytes[pos + 4 + i]) << (8 * i);
        pos += 8;
        if (pos + chunk_size > bytes.size()) {
            throw MalformedHeader("truncated chunk '" +
                                  std::string(id, 4) + "': " + source_id);
        }
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16)
                throw MalformedHeader("fmt chunk too small: " + source_id);
            format = std::uint16_t(bytes[pos] | (bytes[pos + 1] << 8));
            channels = std::uint16_t(bytes[pos + 2] | (bytes[pos + 3] << 8));
            sample_rate = 0;
            for (int i = 0; i < 4; ++i)
                sample_rate |= std::uint32_t(bytes[pos + 4 + i]) << (8 * i);
            bits = std::uint16_t(bytes[pos + 14] | (bytes[pos + 15] << 8));
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_ptr = bytes.data() + pos;
            data_len = chunk_size;
            have_data = true;
        }
        pos += chunk_size + (chunk_size & 1); // chunks are word-aligned
    }

    if (!have_fmt)
        throw MalformedHeader("missing fmt chunk: " + source_id);
    if (format != wav::kFormatPcm && format != wav::kFormatIeeeFloat)
        throw UnsupportedEncoding("unsupported WAVE format tag " +
                                  std::to_string(format) + ": " + source_id);
    if (format == wav::kFormatPcm && bits != 16)
        throw UnsupportedEncoding("PCM bit depth " + std::to_string(bits) +
                                  " unsupported (need 16): " + source_id);
    if (format == wav::kFormatIeeeFloat && bits != 32)
        throw UnsupportedEncoding("float bit depth " + std::to_string(bits) +
                                  " unsupported (need 32): " + source_id);
    if (channels < 1 || channels > 2)
        throw UnsupportedEncoding(std::to_string(channels) +
                                  " channels unsupported: " + source_id);
    if (sample_rate == 0)
        throw MalformedHeader("zero sample rate: " + source_id);

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_size = bytes_per_sample * channels;
    if (!have_data || data_len < frame_size)
        throw EmptyAudio("no audio frames: " + source_id);
    const std::size_t n_frames = data_len / frame_size;

    AudioBuffer out;
    out.sample_rate_hz = int(sample_rate);
    out.source_id = std::move(source_id);
    out.samples.resize(n_frames);

    for (std::size_t f = 0; f < n_frames; ++f) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data_ptr + f * frame_size +
                                    c * bytes_per_sample;
            if (format == wav::kFormatPcm) {
                const std::int16_t raw =
                    std::int16_t(std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8));
                acc += double(raw) / 32768.0;
            } else {
                std::uint32_t u = 0;
                for (int i = 0; i < 4; ++i) u |= std::uint32_t(p[i]) << (8 * i);
                float v;
                std::memcpy(&v, &u, 4);
                acc += double(v);
            }
        }
        out.samples[f] = acc / channels;
    }
    return out;
}

inline AudioBuffer load_wav_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open audio file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_wav(bytes, path);
}

// Linear-interpolation resampling. Output length = round(len * target/source).
// Adequate for classification features; high-frequency imaging error is the
// known tradeoff versus sinc resampling.
inline AudioBuffer resample(const AudioBuffer& buf, int target_hz) {
    if (buf.empty()) throw EmptyAudio("resample: empty buffer");
    if (target_hz <= 0) throw DataError("resample: target rate must be > 0");
    if (target_hz == buf.sample_rate_hz) return buf;

    const std::size_t src_len = buf.samples.size();
    const auto out_len = std::max<std::size_t>(
        1, std::size_t(std::llround(double(src_len) * target_hz /
                                    buf.sample_rate_hz)));
    const double step = double(buf.sample_rate_hz) / target_hz;

    AudioBuffer out;
    out.sample_rate_hz = target_hz;
    out.source_id = buf.source_id;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = double(i) * step;
        std::size_t i0 = std::size_t(pos);
        if (i0 >= src_len - 1) {
            out.samples[i] = buf.samples[src_len - 1];
            continue;
        }
        const double frac = pos - double(i0);
        out.samples[i] =
            (1.0 - frac) * buf.samples[i0] + frac * buf.samples[i0 + 1];
    }
    return out;
}

// Scale so max|s| == 1.0; all-zero input passes through unchanged.
inline AudioBuffer peak_normalize(const AudioBuffer& buf) {
    if (buf.empty()) throw EmptyAudio("peak_normalize: empty buffer");
    double peak = 0.0;
    for (double s : buf.samples) peak = std::max(peak, std::fabs(s));
    if (peak == 0.0) return buf;
    AudioBuffer out = buf;
    for (double& s : out.samples) s /= peak;
    return out;
}

} // namespace voicescreen::audio
