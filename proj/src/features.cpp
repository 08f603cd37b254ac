#include "coughlab/features.hpp"

#include <cmath>
#include <fstream>

#include "coughlab/dsp.hpp"
#include "coughlab/util.hpp"

namespace coughlab::features {

namespace {

constexpr double kLogFloor = 1e-10;
constexpr char kFeatureMagic[8] = {'C', 'G', 'H', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kFeatureVersion = 1;

Index round_samples(double seconds, int sample_rate) {
    // round-to-nearest-even so 100 ms at 11025 Hz is 1102 samples
    return static_cast<Index>(std::nearbyint(seconds * sample_rate));
}

}  // namespace

Index FrameConfig::frame_samples(int sample_rate) const {
    const Index n = round_samples(frame_len_s, sample_rate);
    if (n < 1) throw ConfigError("frame length shorter than one sample");
    return n;
}

Index FrameConfig::hop_samples(int sample_rate) const {
    const Index hop = round_samples(hop_len_s, sample_rate);
    const Index frame = frame_samples(sample_rate);
    if (hop < 1) throw ConfigError("hop length shorter than one sample");
    if (hop > frame) throw ConfigError("hop length exceeds frame length");
    return hop;
}

Index FrameConfig::resolved_fft_size(int sample_rate) const {
    const Index frame = frame_samples(sample_rate);
    if (fft_size == 0) return dsp::next_pow2(frame);
    if (!dsp::is_pow2(fft_size))
        throw ConfigError("fft_size must be a power of two, got " + std::to_string(fft_size));
    if (fft_size < frame)
        throw ConfigError("fft_size " + std::to_string(fft_size) + " smaller than frame of " +
                          std::to_string(frame) + " samples");
    return fft_size;
}

double MfccConfig::resolved_fmax(int sample_rate) const {
    return fmax == 0.0 ? sample_rate / 2.0 : fmax;
}

void MfccConfig::validate(int sample_rate) const {
    if (n_mfcc < 1) throw ConfigError("n_mfcc must be >= 1");
    if (n_mfcc > n_mels) throw ConfigError("n_mfcc must not exceed n_mels");
    const double hi = resolved_fmax(sample_rate);
    if (!(fmin >= 0.0) || !(fmin < hi)) throw ConfigError("need 0 <= fmin < fmax");
    if (hi > sample_rate / 2.0 + 1e-9) throw ConfigError("fmax exceeds Nyquist");
    if (delta_window < 1) throw ConfigError("delta_window must be >= 1");
}

Matrix frame_signal(const audio::AudioClip& clip, const FrameConfig& cfg) {
    const Index n = clip.size();
    if (n == 0) throw EmptyAudioError("frame_signal: empty clip");
    const Index frame = cfg.frame_samples(clip.sample_rate);
    const Index hop = cfg.hop_samples(clip.sample_rate);

    const Index t = 1 + (n > frame ? (n - frame + hop - 1) / hop : 0);
    const Vector window = dsp::hamming_window<double>(frame);

    Matrix frames = Matrix::Zero(t, frame);
    for (Index i = 0; i < t; ++i) {
        const Index start = i * hop;
        const Index len = std::min(frame, n - start);
        frames.row(i).head(len) = clip.samples.segment(start, len).transpose();
        frames.row(i).array() *= window.transpose().array();
    }
    return frames;
}

Vector power_spectrum(const Eigen::Ref<const Vector>& frame, Index fft_size) {
    const auto spectrum = dsp::fft<double>(frame, fft_size);
    Vector power(fft_size / 2 + 1);
    for (Index k = 0; k <= fft_size / 2; ++k) power[k] = std::norm(spectrum[static_cast<std::size_t>(k)]);
    return power;
}

Matrix mel_filterbank(Index n_mels, Index fft_size, int sample_rate, double fmin, double fmax) {
    if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
    const Index n_bins = fft_size / 2 + 1;
    const double mel_lo = dsp::hz_to_mel(fmin);
    const double mel_hi = dsp::hz_to_mel(fmax);

    Vector centers_hz(n_mels + 2);
    for (Index i = 0; i < n_mels + 2; ++i)
        centers_hz[i] = dsp::mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / double(n_mels + 1));

    Matrix bank = Matrix::Zero(n_mels, n_bins);
    for (Index m = 0; m < n_mels; ++m) {
        const double lo = centers_hz[m], mid = centers_hz[m + 1], hi = centers_hz[m + 2];
        for (Index k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_size;
            if (f <= lo || f >= hi) continue;
            bank(m, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
        if (!(bank.row(m).sum() > 0.0))
            throw ConfigError("mel filter " + std::to_string(m) +
                              " is empty; fewer mels or a larger fft_size needed");
    }
    return bank;
}

Matrix mfcc(const Eigen::Ref<const Matrix>& spectra, const MfccConfig& cfg, int sample_rate) {
    cfg.validate(sample_rate);
    const Index fft_size = 2 * (spectra.cols() - 1);
    const Matrix bank =
        mel_filterbank(cfg.n_mels, fft_size, sample_rate, cfg.fmin, cfg.resolved_fmax(sample_rate));
    const Matrix dct = dsp::dct_ii_orthonormal<double>(cfg.n_mels);

    const Index first = cfg.include_c0 ? 0 : 1;
    if (first + cfg.n_mfcc > cfg.n_mels)
        throw ConfigError("n_mfcc too large for n_mels when c0 is dropped");
    Matrix log_energies = ((spectra * bank.transpose()).array() + kLogFloor).log().matrix();
    return log_energies * dct.middleRows(first, cfg.n_mfcc).transpose();
}

Matrix add_deltas(const Eigen::Ref<const Matrix>& coeffs, Index delta_window) {
    const Index t = coeffs.rows();
    const Index d = coeffs.cols();
    if (t < 1) throw ShapeError("add_deltas: need at least one frame");
    if (delta_window < 1) throw ConfigError("delta_window must be >= 1");

    double norm = 0.0;
    for (Index k = 1; k <= delta_window; ++k) norm += double(k) * k;
    norm *= 2.0;

    auto clamp_row = [&](Index i) { return std::clamp<Index>(i, 0, t - 1); };
    auto regress = [&](const Matrix& src) {
        Matrix out(t, d);
        for (Index i = 0; i < t; ++i) {
            Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
            for (Index k = 1; k <= delta_window; ++k)
                acc += double(k) * (src.row(clamp_row(i + k)) - src.row(clamp_row(i - k)));
            out.row(i) = acc / norm;
        }
        return out;
    };

    const Matrix delta = regress(coeffs);
    const Matrix delta2 = regress(delta);
    Matrix full(t, 3 * d);
    full << coeffs, delta, delta2;
    return full;
}

FeatureSequence extract(const audio::AudioClip& clip, const FrameConfig& frame_cfg,
                        const MfccConfig& mfcc_cfg, std::string source_id) {
    const Index fft_size = frame_cfg.resolved_fft_size(clip.sample_rate);
    const Matrix frames = frame_signal(clip, frame_cfg);

    Matrix spectra(frames.rows(), fft_size / 2 + 1);
    for (Index i = 0; i < frames.rows(); ++i)
        spectra.row(i) = power_spectrum(frames.row(i).transpose(), fft_size).transpose();

    FeatureSequence seq;
    seq.frames = add_deltas(mfcc(spectra, mfcc_cfg, clip.sample_rate), mfcc_cfg.delta_window);
    seq.source_id = std::move(source_id);

    const Index frame = frame_cfg.frame_samples(clip.sample_rate);
    const Index hop = frame_cfg.hop_samples(clip.sample_rate);
    seq.frame_times.resize(seq.frames.rows());
    for (Index i = 0; i < seq.frames.rows(); ++i)
        seq.frame_times[i] = (static_cast<double>(i * hop) + frame / 2.0) / clip.sample_rate;

    if (!seq.frames.allFinite()) throw NumericError("non-finite features for " + seq.source_id);
    return seq;
}

SpectralBins spectral_bins(const audio::AudioClip& clip, Index n_bins, const FrameConfig& cfg) {
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
    const Index fft_size = cfg.resolved_fft_size(clip.sample_rate);
    const Matrix frames = frame_signal(clip, cfg);

    Vector mean_power = Vector::Zero(fft_size / 2 + 1);
    for (Index i = 0; i < frames.rows(); ++i)
        mean_power += power_spectrum(frames.row(i).transpose(), fft_size);
    mean_power /= static_cast<double>(frames.rows());

    SpectralBins bins;
    bins.bin_power = Vector::Zero(n_bins);
    bins.bin_edges.resize(n_bins + 1);
    const double nyquist = clip.sample_rate / 2.0;
    for (Index b = 0; b <= n_bins; ++b) bins.bin_edges[b] = nyquist * b / n_bins;
    for (Index k = 0; k < mean_power.size(); ++k) {
        const double f = static_cast<double>(k) * clip.sample_rate / fft_size;
        const Index b = std::min<Index>(n_bins - 1, static_cast<Index>(f / nyquist * n_bins));
        bins.bin_power[b] += mean_power[k];
    }
    return bins;
}

FeatureSequence extract_from_file(const std::filesystem::path& wav_path, const PipelineConfig& cfg,
                                  std::string source_id) {
    const audio::AudioClip clip = audio::load_wav(wav_path);
    const audio::AudioClip conditioned = audio::condition(clip, cfg.conditioning);
    if (source_id.empty()) source_id = wav_path.string();
    return extract(conditioned, cfg.frame, cfg.mfcc, std::move(source_id));
}

void write_feature_file(const std::filesystem::path& path, const FeatureSequence& seq) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot create feature file: " + path.string());
    util::write_bytes(os, kFeatureMagic, sizeof(kFeatureMagic));
    util::write_le<std::uint32_t>(os, kFeatureVersion);
    util::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(seq.frames.rows()));
    util::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(seq.frames.cols()));
    for (Index i = 0; i < seq.frames.rows(); ++i)
        for (Index j = 0; j < seq.frames.cols(); ++j) util::write_le<double>(os, seq.frames(i, j));
    if (!os) throw DataError("failed writing feature file: " + path.string());
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open feature file: " + path.string());
    char magic[8];
    util::read_bytes(is, magic, sizeof(magic), "feature magic");
    if (std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0)
        throw DataError("not a feature file: " + path.string());
    const auto version = util::read_le<std::uint32_t>(is, "feature version");
    if (version != kFeatureVersion)
        throw VersionError("unknown feature file version " + std::to_string(version));
    const auto t = static_cast<Index>(util::read_le<std::uint64_t>(is, "frame count"));
    const auto d = static_cast<Index>(util::read_le<std::uint64_t>(is, "feature dim"));

    FeatureSequence seq;
    seq.source_id = path.string();
    seq.frames.resize(t, d);
    for (Index i = 0; i < t; ++i)
        for (Index j = 0; j < d; ++j) seq.frames(i, j) = util::read_le<double>(is, "feature value");
    seq.frame_times = Vector::Zero(t);
    return seq;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& seq) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create csv file: " + path.string());
    os << "frame_time_s";
    for (Index j = 0; j < seq.frames.cols(); ++j) os << ",f" << j;
    os << "\n";
    for (Index i = 0; i < seq.frames.rows(); ++i) {
        os << util::format_double(seq.frame_times.size() > i ? seq.frame_times[i] : 0.0);
        for (Index j = 0; j < seq.frames.cols(); ++j)
            os << ',' << util::format_double(seq.frames(i, j));
        os << "\n";
    }
    if (!os) throw DataError("failed writing csv file: " + path.string());
}

}  // namespace coughlab::features
