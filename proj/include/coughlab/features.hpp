#pragma once

#include <filesystem>
#include <string>

#include "coughlab/audio.hpp"
#include "coughlab/common.hpp"

namespace coughlab::features {

enum class WindowKind { hamming };

struct FrameConfig {
    double frame_len_s = 0.100;
    double hop_len_s = 0.050;
    WindowKind window = WindowKind::hamming;
    Index fft_size = 0;  // 0: smallest power of two >= frame samples

    Index frame_samples(int sample_rate) const;
    Index hop_samples(int sample_rate) const;
    Index resolved_fft_size(int sample_rate) const;
};

struct MfccConfig {
    Index n_mfcc = 14;
    Index n_mels = 26;
    double fmin = 0.0;
    double fmax = 0.0;  // 0: sample_rate / 2
    Index delta_window = 2;
    bool include_c0 = true;

    double resolved_fmax(int sample_rate) const;
    void validate(int sample_rate) const;
};

// T x D per-frame features; D = 3 * n_mfcc (42 under defaults).
struct FeatureSequence {
    Matrix frames;
    Vector frame_times;  // frame centers, seconds
    std::string source_id;
};

struct SpectralBins {
    Vector bin_power;  // n_bins, each >= 0
    Vector bin_edges;  // n_bins + 1 frequencies, 0 .. fs/2
};

// Windowed frames as rows; the last partial frame is zero-padded, so a
// clip shorter than one frame still yields a single frame.
Matrix frame_signal(const audio::AudioClip& clip, const FrameConfig& cfg);

// |FFT(zero-padded frame)|^2 over fft_size/2 + 1 bins.
Vector power_spectrum(const Eigen::Ref<const Vector>& frame, Index fft_size);

// Triangular filters with centers equally spaced on the mel scale;
// n_mels x (fft_size/2 + 1), every row nonnegative with a positive sum.
Matrix mel_filterbank(Index n_mels, Index fft_size, int sample_rate, double fmin, double fmax);

// Per frame: log(mel energies + 1e-10), orthonormal DCT-II, first n_mfcc
// coefficients (starting at c0 or c1 per include_c0).
Matrix mfcc(const Eigen::Ref<const Matrix>& spectra, const MfccConfig& cfg, int sample_rate);

// Regression deltas with replicated edges, applied twice; columns ordered
// [coeffs | delta | delta-delta].
Matrix add_deltas(const Eigen::Ref<const Matrix>& coeffs, Index delta_window);

FeatureSequence extract(const audio::AudioClip& clip, const FrameConfig& frame_cfg,
                        const MfccConfig& mfcc_cfg, std::string source_id = "");

// Welch-style average of frame power spectra, partitioned into n_bins
// equal-width bands over [0, fs/2].
SpectralBins spectral_bins(const audio::AudioClip& clip, Index n_bins = 5,
                           const FrameConfig& cfg = {});

// Conditioning plus feature settings for one pipeline run; what a trained
// checkpoint needs to reproduce its input features.
struct PipelineConfig {
    audio::ConditioningConfig conditioning;
    FrameConfig frame;
    MfccConfig mfcc;
};

FeatureSequence extract_from_file(const std::filesystem::path& wav_path, const PipelineConfig& cfg,
                                  std::string source_id = "");

// Binary feature dump: magic, version, T, D, row-major float64.
void write_feature_file(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_feature_file(const std::filesystem::path& path);
void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& seq);

}  // namespace coughlab::features
