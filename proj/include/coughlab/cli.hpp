#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coughlab/common.hpp"
#include "coughlab/dataset.hpp"
#include "coughlab/net.hpp"
#include "coughlab/run_config.hpp"

namespace coughlab::cli {

// Settings shared by every verb: the resolved run configuration, the output
// directory (echoed provenance included), and whether per-file failures
// abort instead of warn.
struct CommonArgs {
    runcfg::RunConfig config;
    std::filesystem::path out_dir;
    bool strict = false;
};

// Conditions + featurizes every manifest clip into binary feature files
// plus feature_index.csv.
void cmd_featurize(const std::filesystem::path& manifest, const CommonArgs& args);

// Subject-disjoint split, training, and the trained-model bundle:
// checkpoint.bin, history.csv, split.json.
void cmd_train(const std::filesystem::path& manifest, dataset::Task task, const CommonArgs& args);

struct GridArgs {
    std::vector<Index> hidden_units{50};
    std::vector<Index> num_bilstm_layers{2};
    std::vector<double> dropout_rate{0.3};
    net::GridMetric metric = net::GridMetric::validation_accuracy;
};

void cmd_grid_search(const std::filesystem::path& manifest, dataset::Task task,
                     const GridArgs& grid, const CommonArgs& args);

struct EvalArgs {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> split_record;  // reuse a train run's split
    bool use_train_side = false;                        // flagged in the report
};

void cmd_eval(const std::filesystem::path& manifest, const EvalArgs& eval_args,
              const CommonArgs& args);

struct PredictArgs {
    std::filesystem::path checkpoint;
    std::vector<std::filesystem::path> wav_paths;        // either these ...
    std::optional<std::filesystem::path> manifest;       // ... or a manifest
    std::string subject_id;  // assigns all loose WAVs to one subject
    bool subject_grouping = false;
};

void cmd_predict(const PredictArgs& predict_args, const CommonArgs& args);

enum class AnalyzeMode { pca, spectral_bins };

struct AnalyzeArgs {
    AnalyzeMode mode = AnalyzeMode::pca;
    std::optional<std::filesystem::path> compare;  // second manifest, same export path
};

void cmd_analyze(const std::filesystem::path& manifest, const AnalyzeArgs& analyze_args,
                 const CommonArgs& args);

struct SynthArgs {
    Index healthy = 0;
    Index asthma = 0;
    Index urti = 0;
    Index lrti = 0;
    Index coughs_min = 10;
    Index coughs_max = 12;
    int sample_rate = 44100;
    dataset::Stage stage = dataset::Stage::none;
};

void cmd_synth(const SynthArgs& synth_args, const CommonArgs& args);

}  // namespace coughlab::cli
