#include "coughlab/audio.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <vector>

#include "coughlab/dsp.hpp"
#include "coughlab/util.hpp"

namespace coughlab::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits_per_sample = 0;
};

std::uint32_t read_u32(std::istream& is, const char* what) { return util::read_le<std::uint32_t>(is, what); }
std::uint16_t read_u16(std::istream& is, const char* what) { return util::read_le<std::uint16_t>(is, what); }

void expect_tag(std::istream& is, const char* tag, const std::string& path) {
    char buf[4];
    util::read_bytes(is, buf, 4, tag);
    if (std::memcmp(buf, tag, 4) != 0)
        throw WavFormatError(path + ": missing '" + tag + "' tag; not a RIFF/WAVE file");
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open wav file: " + path.string());
    const std::string name = path.string();

    expect_tag(is, "RIFF", name);
    read_u32(is, "riff size");
    expect_tag(is, "WAVE", name);

    FmtChunk fmt;
    bool have_fmt = false;
    std::vector<char> data;
    bool have_data = false;

    while (!have_data || !have_fmt) {
        char tag[4];
        is.read(tag, 4);
        if (is.gcount() != 4) {
            if (!have_fmt) throw WavFormatError(name + ": no fmt chunk");
            throw WavFormatError(name + ": no data chunk");
        }
        const std::uint32_t size = read_u32(is, "chunk size");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw WavFormatError(name + ": fmt chunk too short");
            fmt.format = read_u16(is, "format");
            fmt.channels = read_u16(is, "channels");
            fmt.sample_rate = read_u32(is, "sample rate");
            read_u32(is, "byte rate");
            read_u16(is, "block align");
            fmt.bits_per_sample = read_u16(is, "bits per sample");
            is.seekg(size - 16 + (size % 2), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size);
            if (size > 0) util::read_bytes(is, data.data(), size, "wav samples");
            have_data = true;
        } else {
            is.seekg(size + (size % 2), std::ios::cur);
            if (!is) throw WavFormatError(name + ": truncated chunk");
        }
    }

    if (fmt.channels != 1 && fmt.channels != 2)
        throw UnsupportedCodecError(name + ": only mono or stereo supported, got " +
                                    std::to_string(fmt.channels) + " channels");
    if (fmt.sample_rate == 0) throw WavFormatError(name + ": zero sample rate");

    std::size_t bytes_per_sample;
    if (fmt.format == kFormatPcm && fmt.bits_per_sample == 16) {
        bytes_per_sample = 2;
    } else if (fmt.format == kFormatIeeeFloat && fmt.bits_per_sample == 32) {
        bytes_per_sample = 4;
    } else {
        throw UnsupportedCodecError(name + ": unsupported encoding (format " +
                                    std::to_string(fmt.format) + ", " +
                                    std::to_string(fmt.bits_per_sample) + " bits)");
    }

    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t n_frames = data.size() / frame_bytes;
    if (n_frames == 0) throw EmptyAudioError(name + ": zero-length audio data");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(fmt.sample_rate);
    clip.samples.resize(static_cast<Index>(n_frames));
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < fmt.channels; ++c) {
            const char* p = data.data() + (i * fmt.channels + c) * bytes_per_sample;
            if (bytes_per_sample == 2) {
                std::int16_t s;
                std::memcpy(&s, p, 2);
                // Mirror the writer's 32767 scale; -32768 clamps to -1.
                acc += std::max(static_cast<double>(s) / 32767.0, -1.0);
            } else {
                float f;
                std::memcpy(&f, p, 4);
                acc += static_cast<double>(f);
            }
        }
        clip.samples[static_cast<Index>(i)] = acc / fmt.channels;
    }
    return clip;
}

namespace {

void write_wav(const std::filesystem::path& path, const AudioClip& clip, bool as_float) {
    if (clip.size() == 0) throw EmptyAudioError("refusing to write empty clip: " + path.string());
    if (clip.sample_rate <= 0) throw DataError("invalid sample rate for " + path.string());

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot create wav file: " + path.string());

    const std::uint16_t bytes_per_sample = as_float ? 4 : 2;
    const std::uint32_t data_size = static_cast<std::uint32_t>(clip.size()) * bytes_per_sample;
    const std::uint32_t fact_size = as_float ? 12 : 0;
    const std::uint32_t riff_size = 4 + 24 + fact_size + 8 + data_size;

    util::write_bytes(os, "RIFF", 4);
    util::write_le<std::uint32_t>(os, riff_size);
    util::write_bytes(os, "WAVE", 4);

    util::write_bytes(os, "fmt ", 4);
    util::write_le<std::uint32_t>(os, 16);
    util::write_le<std::uint16_t>(os, as_float ? kFormatIeeeFloat : kFormatPcm);
    util::write_le<std::uint16_t>(os, 1);
    util::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
    util::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate) * bytes_per_sample);
    util::write_le<std::uint16_t>(os, bytes_per_sample);
    util::write_le<std::uint16_t>(os, as_float ? 32 : 16);

    if (as_float) {
        util::write_bytes(os, "fact", 4);
        util::write_le<std::uint32_t>(os, 4);
        util::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.size()));
    }

    util::write_bytes(os, "data", 4);
    util::write_le<std::uint32_t>(os, data_size);
    for (Index i = 0; i < clip.size(); ++i) {
        if (as_float) {
            util::write_le<float>(os, static_cast<float>(clip.samples[i]));
        } else {
            const long q = std::lround(clip.samples[i] * 32767.0);
            util::write_le<std::int16_t>(
                os, static_cast<std::int16_t>(std::clamp(q, -32768l, 32767l)));
        }
    }
    if (!os) throw DataError("failed writing wav file: " + path.string());
}

}  // namespace

void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip) {
    write_wav(path, clip, false);
}

void write_wav_float32(const std::filesystem::path& path, const AudioClip& clip) {
    write_wav(path, clip, true);
}

AudioClip detrend(const AudioClip& clip) {
    const Index n = clip.size();
    if (n == 0) throw EmptyAudioError("detrend: empty clip");
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    if (n == 1) {
        out.samples = Vector::Zero(1);
        return out;
    }
    // Closed-form least squares of y = a*i + b over i = 0..n-1.
    const double mean_i = static_cast<double>(n - 1) / 2.0;
    const double mean_y = clip.samples.mean();
    double sxy = 0.0, sxx = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - mean_i;
        sxy += dx * (clip.samples[i] - mean_y);
        sxx += dx * dx;
    }
    const double slope = sxy / sxx;
    const double intercept = mean_y - slope * mean_i;
    out.samples.resize(n);
    for (Index i = 0; i < n; ++i)
        out.samples[i] = clip.samples[i] - (slope * static_cast<double>(i) + intercept);
    return out;
}

AudioClip normalize(const AudioClip& clip) {
    if (clip.size() == 0) throw EmptyAudioError("normalize: empty clip");
    const double peak = clip.samples.cwiseAbs().maxCoeff();
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples = peak > 0.0 ? (clip.samples / peak).eval() : clip.samples;
    return out;
}

AudioClip downsample(const AudioClip& clip, const ConditioningConfig& cfg) {
    if (clip.size() == 0) throw EmptyAudioError("downsample: empty clip");
    if (cfg.target_rate <= 0) throw ConfigError("target_rate must be positive");
    if (cfg.target_rate > clip.sample_rate)
        throw ConfigError("upsampling unsupported: target " + std::to_string(cfg.target_rate) +
                          " Hz > source " + std::to_string(clip.sample_rate) + " Hz");

    AudioClip out;
    out.sample_rate = cfg.target_rate;
    if (cfg.target_rate == clip.sample_rate) {
        out.samples = clip.samples;
        return out;
    }

    const int g = std::gcd(clip.sample_rate, cfg.target_rate);
    const Index up = cfg.target_rate / g;    // L
    const Index down = clip.sample_rate / g; // M

    // Filter runs at the L-upsampled rate; cutoff 0.45 and stopband edge
    // 0.475 of the target rate, 70 dB, so a tone at 0.48 * target is
    // already >= 60 dB down.
    const double up_rate = static_cast<double>(clip.sample_rate) * static_cast<double>(up);
    const double cutoff = 0.45 * cfg.target_rate / up_rate;
    const double transition = 0.05 * cfg.target_rate / up_rate;
    Vector h = dsp::design_kaiser_lowpass<double>(cutoff, transition, 70.0);
    h *= static_cast<double>(up);  // restore unity passband gain after zero stuffing
    const Index taps = h.size();
    const Index delay = (taps - 1) / 2;

    const Index n_in = clip.size();
    const Index n_out = static_cast<Index>(
        (static_cast<long long>(n_in) * cfg.target_rate + clip.sample_rate - 1) / clip.sample_rate);
    out.samples = Vector::Zero(n_out);

    // y[m] = sum_j h[j] * xu[m*M + delay - j] with xu the zero-stuffed
    // input; only indices divisible by L contribute.
    for (Index m = 0; m < n_out; ++m) {
        const Index center = m * down + delay;
        double acc = 0.0;
        // smallest j >= max(0, center - L*(n_in-1)) with (center - j) % L == 0
        Index j_lo = center - up * (n_in - 1);
        if (j_lo < 0) j_lo = center % up;
        const Index j_hi = std::min(taps - 1, center);
        for (Index j = j_lo; j <= j_hi; j += up) acc += h[j] * clip.samples[(center - j) / up];
        out.samples[m] = acc;
    }
    return out;
}

AudioClip condition(const AudioClip& clip, const ConditioningConfig& cfg) {
    AudioClip cur = detrend(clip);
    if (cfg.normalize_peak) cur = normalize(cur);
    if (cfg.target_rate != clip.sample_rate) cur = downsample(cur, cfg);
    return cur;
}

}  // namespace coughlab::audio
