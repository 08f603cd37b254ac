#pragma once

#include <filesystem>

#include "coughlab/common.hpp"

namespace coughlab::audio {

// A single segmented cough: mono samples in [-1, 1] plus the rate they
// were captured at.
struct AudioClip {
    Vector samples;
    int sample_rate = 0;

    Index size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class DetrendMode { linear };

struct ConditioningConfig {
    int target_rate = 11025;
    bool normalize_peak = true;
    DetrendMode detrend_mode = DetrendMode::linear;
};

// Reads a RIFF/WAVE file (PCM16 or IEEE float32, mono or stereo) and
// returns a mono clip scaled to [-1, 1]. Stereo is collapsed by channel
// mean. Throws WavFormatError / UnsupportedCodecError / EmptyAudioError.
AudioClip load_wav(const std::filesystem::path& path);

void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip);
void write_wav_float32(const std::filesystem::path& path, const AudioClip& clip);

// Subtracts the least-squares best-fit line over sample index; the result
// has zero mean and zero regression slope. A single-sample clip maps to zero.
AudioClip detrend(const AudioClip& clip);

// Divides by the maximum absolute sample; an all-zero clip is returned
// unchanged.
AudioClip normalize(const AudioClip& clip);

// Anti-aliased resample to cfg.target_rate: Kaiser-windowed sinc low-pass
// at 0.45 * target_rate (stopband edge 0.475 * target_rate, 70 dB design
// attenuation), group delay compensated, output length ceil(N * target / source).
// Rates that do not divide the source go through the rational L/M path.
AudioClip downsample(const AudioClip& clip, const ConditioningConfig& cfg);

// detrend -> normalize -> downsample, in that order.
AudioClip condition(const AudioClip& clip, const ConditioningConfig& cfg);

}  // namespace coughlab::audio
