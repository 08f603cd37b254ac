#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "coughlab/audio.hpp"
#include "oracles.hpp"

using namespace coughlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "coughlab-test-audio";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void put_le16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Handcrafted PCM16 WAV so load_wav is tested against independent bytes,
// not against our own writer.
fs::path write_raw_pcm16(const std::string& name, std::uint32_t rate, std::uint16_t channels,
                         const std::vector<std::int16_t>& frames_interleaved) {
    std::string data;
    for (std::int16_t s : frames_interleaved) put_le16(data, static_cast<std::uint16_t>(s));
    const std::uint16_t block = static_cast<std::uint16_t>(2 * channels);
    std::string out = "RIFF";
    put_le32(out, static_cast<std::uint32_t>(36 + data.size()));
    out += "WAVEfmt ";
    put_le32(out, 16);
    put_le16(out, 1);  // PCM
    put_le16(out, channels);
    put_le32(out, rate);
    put_le32(out, rate * block);
    put_le16(out, block);
    put_le16(out, 16);
    out += "data";
    put_le32(out, static_cast<std::uint32_t>(data.size()));
    out += data;
    const fs::path path = temp_dir() / name;
    std::ofstream os(path, std::ios::binary);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    return path;
}

}  // namespace

TEST_CASE("load_wav scales PCM16 linearly") {
    const auto path = write_raw_pcm16("pcm_scale.wav", 44100, 1, {0, 16384, -16384});
    const auto clip = audio::load_wav(path);
    REQUIRE(clip.size() == 3);
    CHECK(clip.sample_rate == 44100);
    CHECK(clip.samples[0] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(clip.samples[1] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(clip.samples[2] == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("load_wav averages stereo channels to mono") {
    // left channel full scale, right channel zero
    const auto path = write_raw_pcm16("stereo.wav", 8000, 2, {32767, 0, 32767, 0});
    const auto clip = audio::load_wav(path);
    REQUIRE(clip.size() == 2);
    CHECK(clip.samples[0] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(clip.samples[1] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("load_wav keeps rate and length") {
    std::vector<std::int16_t> frames(44100, 1000);
    const auto path = write_raw_pcm16("identity.wav", 44100, 1, frames);
    const auto clip = audio::load_wav(path);
    CHECK(clip.sample_rate == 44100);
    CHECK(clip.size() == 44100);
}

TEST_CASE("load_wav rejects malformed and unsupported files") {
    const auto garbage = temp_dir() / "garbage.wav";
    {
        std::ofstream os(garbage, std::ios::binary);
        os << "this is not a wav file at all, just text padding 1234";
    }
    CHECK_THROWS_AS(audio::load_wav(garbage), WavFormatError);

    // valid header, zero data bytes
    const auto empty = write_raw_pcm16("empty.wav", 44100, 1, {});
    CHECK_THROWS_AS(audio::load_wav(empty), EmptyAudioError);

    CHECK_THROWS_AS(audio::load_wav(temp_dir() / "does-not-exist.wav"), DataError);
}

TEST_CASE("wav round trip: float32 lossless, pcm16 within one LSB") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    audio::AudioClip clip;
    clip.sample_rate = 11025;
    clip.samples = Vector(977);
    for (Index i = 0; i < clip.size(); ++i) clip.samples[i] = uni(rng);

    const auto f32 = temp_dir() / "roundtrip_f32.wav";
    audio::write_wav_float32(f32, clip);
    const auto back32 = audio::load_wav(f32);
    REQUIRE(back32.size() == clip.size());
    CHECK(back32.sample_rate == clip.sample_rate);
    for (Index i = 0; i < clip.size(); ++i)
        CHECK(back32.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-7));

    const auto p16 = temp_dir() / "roundtrip_p16.wav";
    audio::write_wav_pcm16(p16, clip);
    const auto back16 = audio::load_wav(p16);
    REQUIRE(back16.size() == clip.size());
    for (Index i = 0; i < clip.size(); ++i)
        CHECK(std::abs(back16.samples[i] - clip.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("detrend removes constants and ramps exactly") {
    audio::AudioClip clip;
    clip.sample_rate = 1000;

    clip.samples = Vector::Constant(500, 3.25);
    CHECK(audio::detrend(clip).samples.cwiseAbs().maxCoeff() <= 1e-9);

    clip.samples = Vector(500);
    for (Index i = 0; i < 500; ++i) clip.samples[i] = 0.002 * static_cast<double>(i) - 0.4;
    CHECK(audio::detrend(clip).samples.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("detrend recovers a sine riding on a ramp (line-fit oracle)") {
    const int rate = 11025;
    const Index n = 4096;
    const Vector sine = oracles::sinusoid(137.0, rate, n, 0.3);
    audio::AudioClip clip;
    clip.sample_rate = rate;
    clip.samples = sine;
    for (Index i = 0; i < n; ++i) clip.samples[i] += 1e-4 * static_cast<double>(i) + 0.75;

    const auto out = audio::detrend(clip);

    // what detrend must subtract, per the independent closed-form fit
    const auto fit = oracles::fit_line(clip.samples);
    Vector expected(n);
    for (Index i = 0; i < n; ++i)
        expected[i] = clip.samples[i] - (fit.intercept + fit.slope * static_cast<double>(i));
    CHECK((out.samples - expected).cwiseAbs().maxCoeff() <= 1e-9);

    // the residual has no remaining trend
    const auto refit = oracles::fit_line(out.samples);
    CHECK(std::abs(refit.slope) <= 1e-9);
    CHECK(std::abs(out.samples.mean()) <= 1e-9);
}

TEST_CASE("detrend is idempotent and zeroes a single sample") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    audio::AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples = Vector(1000);
    for (Index i = 0; i < 1000; ++i) clip.samples[i] = gauss(rng);

    const auto once = audio::detrend(clip);
    const auto twice = audio::detrend(once);
    CHECK((once.samples - twice.samples).cwiseAbs().maxCoeff() <= 1e-9);

    clip.samples = Vector::Constant(1, 0.7);
    CHECK(audio::detrend(clip).samples[0] == 0.0);
}

TEST_CASE("normalize scales the peak to one and leaves zeros alone") {
    audio::AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples = Vector(2);
    clip.samples << 0.25, -0.5;
    const auto out = audio::normalize(clip);
    CHECK(out.samples[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.samples[1] == doctest::Approx(-1.0).epsilon(1e-12));

    clip.samples = Vector::Zero(3);
    const auto zeros = audio::normalize(clip);
    CHECK(zeros.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize is idempotent and scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-0.2, 0.2);
    audio::AudioClip clip;
    clip.sample_rate = 8000;
    clip.samples = Vector(512);
    for (Index i = 0; i < 512; ++i) clip.samples[i] = uni(rng);

    const auto once = audio::normalize(clip);
    CHECK(once.samples.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
    const auto twice = audio::normalize(once);
    CHECK((once.samples - twice.samples).cwiseAbs().maxCoeff() <= 1e-9);

    audio::AudioClip scaled = clip;
    scaled.samples *= 37.5;
    const auto from_scaled = audio::normalize(scaled);
    CHECK((once.samples - from_scaled.samples).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("downsample length law") {
    audio::ConditioningConfig cfg;
    audio::AudioClip clip;
    clip.sample_rate = 44100;

    clip.samples = Vector::Zero(44100);
    CHECK(audio::downsample(clip, cfg).size() == 11025);
    CHECK(audio::downsample(clip, cfg).sample_rate == 11025);

    clip.samples = Vector::Zero(44101);  // ceil(44101 / 4) = 11026
    CHECK(audio::downsample(clip, cfg).size() == 11026);

    clip.samples = Vector::Zero(3);  // ceil(3 / 4) = 1
    CHECK(audio::downsample(clip, cfg).size() == 1);
}

TEST_CASE("downsample preserves an in-band tone within 1%") {
    const int source = 44100, target = 11025;
    const Index n = 44100;
    audio::AudioClip clip;
    clip.sample_rate = source;
    clip.samples = oracles::sinusoid(500.0, source, n, 0.8);

    audio::ConditioningConfig cfg;
    const auto out = audio::downsample(clip, cfg);
    REQUIRE(out.sample_rate == target);

    // group delay is compensated, so the output should line up with an
    // analytically generated target-rate sinusoid away from the edges
    const Vector expected = oracles::sinusoid(500.0, target, out.size(), 0.8);
    const Index trim = 200;
    double max_err = 0.0;
    for (Index i = trim; i < out.size() - trim; ++i)
        max_err = std::max(max_err, std::abs(out.samples[i] - expected[i]));
    CHECK(max_err <= 0.008);  // 1% of the 0.8 amplitude
}

TEST_CASE("downsample attenuates a stopband tone by at least 60 dB") {
    const int source = 44100;
    const Index n = 44100;
    audio::AudioClip clip;
    clip.sample_rate = source;
    clip.samples = oracles::sinusoid(5300.0, source, n, 1.0);  // above the 4.96 kHz cutoff

    const auto out = audio::downsample(clip, audio::ConditioningConfig{});
    const Index trim = 200;
    double energy = 0.0;
    Index count = 0;
    for (Index i = trim; i < out.size() - trim; ++i, ++count)
        energy += out.samples[i] * out.samples[i];
    const double rms = std::sqrt(energy / static_cast<double>(count));
    const double input_rms = 1.0 / std::sqrt(2.0);
    CHECK(20.0 * std::log10(rms / input_rms + 1e-300) <= -60.0);
}

TEST_CASE("downsample handles rational rate ratios") {
    // 22050 -> 16000: L/M = 640/882 reduced = 320/441
    audio::AudioClip clip;
    clip.sample_rate = 22050;
    clip.samples = oracles::sinusoid(440.0, 22050, 22050, 0.5);
    audio::ConditioningConfig cfg;
    cfg.target_rate = 16000;
    const auto out = audio::downsample(clip, cfg);
    CHECK(out.sample_rate == 16000);
    CHECK(out.size() == static_cast<Index>(std::ceil(22050.0 * 16000.0 / 22050.0)));
    const Vector expected = oracles::sinusoid(440.0, 16000, out.size(), 0.5);
    const Index trim = 300;
    double max_err = 0.0;
    for (Index i = trim; i < out.size() - trim; ++i)
        max_err = std::max(max_err, std::abs(out.samples[i] - expected[i]));
    CHECK(max_err <= 0.005);
}

TEST_CASE("downsample refuses upsampling and bad targets") {
    audio::AudioClip clip;
    clip.sample_rate = 11025;
    clip.samples = Vector::Zero(100);
    audio::ConditioningConfig cfg;
    cfg.target_rate = 44100;
    CHECK_THROWS_AS(audio::downsample(clip, cfg), ConfigError);
    cfg.target_rate = 0;
    CHECK_THROWS_AS(audio::downsample(clip, cfg), ConfigError);
}

TEST_CASE("downsample at the source rate is the identity rate-wise") {
    audio::AudioClip clip;
    clip.sample_rate = 11025;
    clip.samples = oracles::sinusoid(300.0, 11025, 2048, 0.4);
    audio::ConditioningConfig cfg;
    cfg.target_rate = 11025;
    const auto out = audio::downsample(clip, cfg);
    CHECK(out.sample_rate == 11025);
    CHECK(out.size() == clip.size());
}

TEST_CASE("condition applies detrend, normalize, downsample in order") {
    const int source = 44100;
    const Index n = 44100;

    // all-zero clip stays all-zero
    audio::AudioClip zeros;
    zeros.sample_rate = source;
    zeros.samples = Vector::Zero(n);
    const auto zout = audio::condition(zeros, audio::ConditioningConfig{});
    CHECK(zout.sample_rate == 11025);
    CHECK(zout.samples.cwiseAbs().maxCoeff() == 0.0);

    // ramp + tone: ramp removed, tone survives, peak normalized pre-filter
    audio::AudioClip clip;
    clip.sample_rate = source;
    clip.samples = oracles::sinusoid(500.0, source, n, 0.3);
    for (Index i = 0; i < n; ++i) clip.samples[i] += 2e-5 * static_cast<double>(i) + 0.1;

    const auto out = audio::condition(clip, audio::ConditioningConfig{});
    CHECK(out.sample_rate == 11025);
    // normalize ran after detrend: interior peak close to 1
    const Index trim = 200;
    double peak = 0.0;
    for (Index i = trim; i < out.size() - trim; ++i)
        peak = std::max(peak, std::abs(out.samples[i]));
    CHECK(peak == doctest::Approx(1.0).epsilon(0.02));

    // against a normalized analytic tone
    const Vector expected = oracles::sinusoid(500.0, 11025, out.size(), 1.0);
    double max_err = 0.0;
    for (Index i = trim; i < out.size() - trim; ++i)
        max_err = std::max(max_err, std::abs(out.samples[i] - expected[i]));
    CHECK(max_err <= 0.02);
}

TEST_CASE("empty clips are rejected across the conditioning chain") {
    audio::AudioClip empty;
    empty.sample_rate = 44100;
    empty.samples = Vector();
    CHECK_THROWS_AS(audio::detrend(empty), EmptyAudioError);
    CHECK_THROWS_AS(audio::normalize(empty), EmptyAudioError);
    CHECK_THROWS_AS(audio::downsample(empty, audio::ConditioningConfig{}), EmptyAudioError);
}
