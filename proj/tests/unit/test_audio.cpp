#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "support/oracles.hpp"
#include "support/wavgen.hpp"
#include "voicescreen/audio.hpp"

using namespace voicescreen;
using testsupport::sine;
using testsupport::to_pcm16;
using testsupport::wav_float32;
using testsupport::wav_pcm16;

TEST_CASE("decode_wav scales 16-bit PCM by 1/32768") {
    const auto bytes = wav_pcm16({0, 16384, -16384, 32767}, 16000, 1);
    const auto buf = audio::decode_wav(bytes, "t");
    REQUIRE(buf.sample_rate_hz == 16000);
    REQUIRE(buf.samples.size() == 4);
    CHECK(buf.samples[0] == 0.0);
    CHECK(buf.samples[1] == 0.5);
    CHECK(buf.samples[2] == -0.5);
    CHECK_THAT(buf.samples[3], Catch::Matchers::WithinAbs(0.99997, 1e-5));
}

TEST_CASE("decode_wav downmixes stereo by per-sample mean") {
    const auto bytes = wav_float32({1.0f, 0.0f, 1.0f, 0.0f}, 8000, 2);
    const auto buf = audio::decode_wav(bytes);
    REQUIRE(buf.samples.size() == 2);
    CHECK(buf.samples[0] == 0.5);
    CHECK(buf.samples[1] == 0.5);
}

TEST_CASE("decode_wav rejects malformed and unsupported input") {
    SECTION("truncated header") {
        const std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'F', 1, 2};
        CHECK_THROWS_AS(audio::decode_wav(junk), audio::MalformedHeader);
    }
    SECTION("not RIFF at all") {
        const std::vector<std::uint8_t> junk(64, 0x7f);
        CHECK_THROWS_AS(audio::decode_wav(junk), audio::MalformedHeader);
    }
    SECTION("truncated data chunk") {
        auto bytes = wav_pcm16({0, 0, 0, 0}, 16000, 1);
        bytes.resize(bytes.size() - 3);
        CHECK_THROWS_AS(audio::decode_wav(bytes), audio::MalformedHeader);
    }
    SECTION("compressed codec tag") {
        auto bytes = wav_pcm16({0, 0}, 16000, 1);
        bytes[20] = 85; // MP3 format tag
        CHECK_THROWS_AS(audio::decode_wav(bytes), audio::UnsupportedEncoding);
    }
    SECTION("24-bit PCM") {
        auto bytes = wav_pcm16({0, 0}, 16000, 1);
        bytes[34] = 24;
        CHECK_THROWS_AS(audio::decode_wav(bytes), audio::UnsupportedEncoding);
    }
    SECTION("zero data frames") {
        const auto bytes = wav_pcm16({}, 16000, 1);
        CHECK_THROWS_AS(audio::decode_wav(bytes), audio::EmptyAudio);
    }
}

TEST_CASE("resample is identity at matching rate") {
    audio::AudioBuffer buf;
    buf.sample_rate_hz = 16000;
    buf.samples = {0.1, -0.2, 0.3};
    const auto out = audio::resample(buf, 16000);
    CHECK(out.samples == buf.samples);
}

TEST_CASE("resample doubles length and inserts midpoints at 2x") {
    audio::AudioBuffer buf;
    buf.sample_rate_hz = 8000;
    buf.samples = {0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0};
    const auto out = audio::resample(buf, 16000);
    REQUIRE(out.samples.size() == 16);
    CHECK(out.sample_rate_hz == 16000);
    for (std::size_t i = 0; i + 1 < buf.samples.size(); ++i) {
        CHECK(out.samples[2 * i] == buf.samples[i]);
        CHECK_THAT(out.samples[2 * i + 1],
                   Catch::Matchers::WithinAbs(
                       0.5 * (buf.samples[i] + buf.samples[i + 1]), 1e-12));
    }
}

TEST_CASE("440 Hz tone keeps its dominant bin after 44.1k -> 16k resample") {
    audio::AudioBuffer buf;
    buf.sample_rate_hz = 44100;
    buf.samples = sine(440.0, 44100, 44100);
    const auto out = audio::resample(buf, 16000);

    std::vector<double> frame(out.samples.begin(), out.samples.begin() + 512);
    const auto power = oracle::dft_power(frame, 512);
    std::size_t peak = 1;
    for (std::size_t k = 1; k <= 256; ++k) {
        if (power[k] > power[peak]) peak = k;
    }
    const double bin_hz = 16000.0 / 512.0;
    const auto expected = std::size_t(std::llround(440.0 / bin_hz));
    CHECK(peak == expected);
}

TEST_CASE("peak_normalize") {
    audio::AudioBuffer buf;
    buf.sample_rate_hz = 16000;

    SECTION("scales to unit peak") {
        buf.samples = {0.5, -0.25};
        const auto out = audio::peak_normalize(buf);
        CHECK(out.samples[0] == 1.0);
        CHECK(out.samples[1] == -0.5);
    }
    SECTION("all-zero input unchanged") {
        buf.samples = {0.0, 0.0, 0.0};
        const auto out = audio::peak_normalize(buf);
        CHECK(out.samples == buf.samples);
    }
    SECTION("random buffer ends with max|s| == 1 exactly") {
        voicescreen::detail::Rng rng(42);
        buf.samples.resize(1000);
        for (double& s : buf.samples) s = rng.uniform(-0.3, 0.3);
        const auto out = audio::peak_normalize(buf);
        double peak = 0.0;
        for (double s : out.samples) peak = std::max(peak, std::fabs(s));
        CHECK(peak == 1.0);
    }
}

TEST_CASE("decode -> resample -> normalize is deterministic") {
    auto noise = sine(523.0, 44100, 4410, 0.7);
    const auto bytes = wav_pcm16(to_pcm16(noise), 44100, 1);
    const auto a = audio::peak_normalize(
        audio::resample(audio::decode_wav(bytes), audio::kCanonicalRateHz));
    const auto b = audio::peak_normalize(
        audio::resample(audio::decode_wav(bytes), audio::kCanonicalRateHz));
    CHECK(a.samples == b.samples);
}

TEST_CASE("up-down resample round trip reproduces a band-limited sine") {
    audio::AudioBuffer buf;
    buf.sample_rate_hz = 16000;
    buf.samples = sine(1000.0, 16000, 16000);
    const auto up = audio::resample(buf, 32000);
    const auto back = audio::resample(up, 16000);
    REQUIRE(back.samples.size() == buf.samples.size());
    for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        CHECK(std::fabs(back.samples[i] - buf.samples[i]) < 0.01);
    }
}

TEST_CASE("stereo downmix equals mean of per-channel decodes") {
    const auto left = sine(300.0, 16000, 64, 0.8);
    const auto right = sine(450.0, 16000, 64, 0.6);
    std::vector<float> interleaved, left_only, right_only;
    for (std::size_t i = 0; i < left.size(); ++i) {
        interleaved.push_back(float(left[i]));
        interleaved.push_back(float(right[i]));
        left_only.push_back(float(left[i]));
        right_only.push_back(float(right[i]));
    }
    const auto st = audio::decode_wav(wav_float32(interleaved, 16000, 2));
    const auto lo = audio::decode_wav(wav_float32(left_only, 16000, 1));
    const auto ro = audio::decode_wav(wav_float32(right_only, 16000, 1));
    for (std::size_t i = 0; i < st.samples.size(); ++i) {
        CHECK_THAT(st.samples[i],
                   Catch::Matchers::WithinAbs(
                       0.5 * (lo.samples[i] + ro.samples[i]), 1e-12));
    }
}
