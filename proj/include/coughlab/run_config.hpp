#pragma once

#include <filesystem>
#include <string>

#include "coughlab/common.hpp"
#include "coughlab/container.hpp"
#include "coughlab/features.hpp"
#include "coughlab/net.hpp"

namespace coughlab::runcfg {

// Every tunable a pipeline run resolves before any stage executes. The
// shipped defaults are the reference settings: 100 ms frames with 50 ms
// hop, 14 MFCCs + deltas (42 dims), 2x BiLSTM(50) with 0.3 dropout, 70/30
// subject-disjoint split.
struct RunConfig {
    std::uint64_t seed = 0;
    Index jobs = 1;
    audio::ConditioningConfig conditioning;
    features::FrameConfig frame;
    features::MfccConfig mfcc;
    net::NetworkConfig network;
    net::TrainConfig training;
    double train_fraction = 0.7;
    // carved subject-disjoint out of the train side for early stopping
    double val_fraction = 0.15;
    Index pca_samples_per_class = 5000;
    Index spectral_bins = 5;

    features::PipelineConfig pipeline() const { return {conditioning, frame, mfcc}; }
    Index feature_dim() const { return 3 * mfcc.n_mfcc; }
};

// One "key = value" assignment; unknown keys and malformed values raise
// ConfigError naming the key.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat key=value file; '#' starts a comment, blank lines are skipped.
void apply_file(RunConfig& cfg, const std::filesystem::path& path);

// Full, parseable key=value rendering in a fixed order — what gets echoed
// into output directories as the provenance record.
std::string render(const RunConfig& cfg);

// render() written to <out_dir>/resolved_config.txt.
void echo_config(const RunConfig& cfg, const std::filesystem::path& out_dir);

container::Json pipeline_to_json(const features::PipelineConfig& pipeline);
features::PipelineConfig pipeline_from_json(const container::Json& j);

}  // namespace coughlab::runcfg
