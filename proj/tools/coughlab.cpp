// coughlab: cough-screening pipeline driver. Verbs cover the full workflow:
// synth (test corpus), featurize, train, grid-search, eval, predict, analyze.
#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <string>
#include <vector>

#include "coughlab/cli.hpp"
#include "coughlab/log.hpp"

namespace {

using namespace coughlab;

// Raw common flags as parsed; resolution order is defaults -> --config file
// -> --set overrides -> dedicated flags, so flags always win.
struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    long long jobs = 1;
    std::string out_dir;
    bool strict = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_path, "key=value config file");
    sub->add_option("--set", flags.overrides, "config override key=value (repeatable)");
    sub->add_option("--seed", flags.seed, "master RNG seed");
    sub->add_option("--jobs", flags.jobs, "worker threads for per-file stages")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out_dir, "output directory")->required();
    sub->add_flag("--strict", flags.strict, "abort on per-file failures instead of skipping");
}

cli::CommonArgs resolve_common(const CommonFlags& flags, CLI::App* sub) {
    cli::CommonArgs args;
    if (!flags.config_path.empty()) runcfg::apply_file(args.config, flags.config_path);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        runcfg::apply_kv(args.config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (sub->count("--seed")) args.config.seed = flags.seed;
    if (sub->count("--jobs")) args.config.jobs = static_cast<Index>(flags.jobs);
    args.out_dir = flags.out_dir;
    args.strict = flags.strict;
    return args;
}

int run(int argc, char** argv) {
    CLI::App app{"coughlab: cough audio screening (conditioning, MFCC features, BiLSTM)"};
    app.require_subcommand(1);

    // featurize
    auto* featurize = app.add_subcommand("featurize", "extract feature files from manifest clips");
    CommonFlags featurize_flags;
    std::string featurize_manifest;
    featurize->add_option("--manifest", featurize_manifest, "clip manifest CSV")
        ->required();
    add_common(featurize, featurize_flags);
    featurize->callback([&] {
        cli::cmd_featurize(featurize_manifest, resolve_common(featurize_flags, featurize));
    });

    // train
    auto* train = app.add_subcommand("train", "train a screening model on a manifest");
    CommonFlags train_flags;
    std::string train_manifest, train_task = "healthy-vs-pathology";
    train->add_option("--manifest", train_manifest, "clip manifest CSV")
        ->required();
    train->add_option("--task", train_task,
                      "healthy-vs-pathology | healthy-vs-asthma | healthy-vs-urti | "
                      "healthy-vs-lrti | 4class");
    add_common(train, train_flags);
    train->callback([&] {
        cli::cmd_train(train_manifest, dataset::task_from_string(train_task),
                       resolve_common(train_flags, train));
    });

    // grid-search
    auto* grid = app.add_subcommand("grid-search", "train every config in a hyperparameter grid");
    CommonFlags grid_flags;
    std::string grid_manifest, grid_task = "healthy-vs-pathology", grid_metric = "validation-accuracy";
    cli::GridArgs grid_args;
    grid->add_option("--manifest", grid_manifest, "clip manifest CSV")
        ->required();
    grid->add_option("--task", grid_task, "task to train (see train --help)");
    grid->add_option("--hidden", grid_args.hidden_units, "hidden unit counts to sweep")
        ->delimiter(',');
    grid->add_option("--layers", grid_args.num_bilstm_layers, "BiLSTM layer counts to sweep")
        ->delimiter(',');
    grid->add_option("--dropout", grid_args.dropout_rate, "dropout rates to sweep")
        ->delimiter(',');
    grid->add_option("--metric", grid_metric, "training-loss | validation-accuracy");
    add_common(grid, grid_flags);
    grid->callback([&] {
        if (grid_metric == "training-loss")
            grid_args.metric = net::GridMetric::training_loss;
        else if (grid_metric == "validation-accuracy")
            grid_args.metric = net::GridMetric::validation_accuracy;
        else
            throw ConfigError("unknown grid metric '" + grid_metric + "'");
        cli::cmd_grid_search(grid_manifest, dataset::task_from_string(grid_task), grid_args,
                             resolve_common(grid_flags, grid));
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against a manifest");
    CommonFlags eval_flags;
    std::string eval_manifest, eval_checkpoint, eval_split;
    bool eval_train_side = false;
    eval->add_option("--manifest", eval_manifest, "clip manifest CSV")
        ->required();
    eval->add_option("--checkpoint", eval_checkpoint, "trained model checkpoint")
        ->required();
    eval->add_option("--split", eval_split, "split record from training; evaluates its test side");
    eval->add_flag("--train-side", eval_train_side,
                   "evaluate the split's training side (flagged in the report)");
    add_common(eval, eval_flags);
    eval->callback([&] {
        cli::EvalArgs eval_args;
        eval_args.checkpoint = eval_checkpoint;
        if (!eval_split.empty()) eval_args.split_record = eval_split;
        eval_args.use_train_side = eval_train_side;
        cli::cmd_eval(eval_manifest, eval_args, resolve_common(eval_flags, eval));
    });

    // predict
    auto* predict = app.add_subcommand("predict", "score WAV clips with a trained checkpoint");
    CommonFlags predict_flags;
    std::string predict_checkpoint, predict_manifest, predict_subject;
    std::vector<std::string> predict_wavs;
    bool predict_grouping = false;
    predict->add_option("--checkpoint", predict_checkpoint, "trained model checkpoint")
        ->required();
    predict->add_option("wavs", predict_wavs, "WAV files to score");
    predict->add_option("--manifest", predict_manifest, "score every clip in a manifest");
    predict->add_option("--subject", predict_subject,
                        "subject id for loose WAVs (default: file stem)");
    predict->add_flag("--subject-grouping", predict_grouping,
                      "add per-subject mode-vote verdict rows");
    add_common(predict, predict_flags);
    predict->callback([&] {
        cli::PredictArgs predict_args;
        predict_args.checkpoint = predict_checkpoint;
        for (const auto& w : predict_wavs) predict_args.wav_paths.push_back(w);
        if (!predict_manifest.empty()) predict_args.manifest = predict_manifest;
        predict_args.subject_id = predict_subject;
        predict_args.subject_grouping = predict_grouping;
        cli::cmd_predict(predict_args, resolve_common(predict_flags, predict));
    });

    // analyze
    auto* analyze = app.add_subcommand("analyze", "export PCA or spectral-bin summaries as CSV");
    CommonFlags analyze_flags;
    std::string analyze_manifest, analyze_mode = "pca", analyze_compare;
    analyze->add_option("--manifest", analyze_manifest, "clip manifest CSV")
        ->required();
    analyze->add_option("--mode", analyze_mode, "pca | spectral-bins");
    analyze->add_option("--compare", analyze_compare,
                        "second manifest; groups are tagged @1/@2 for side-by-side export");
    add_common(analyze, analyze_flags);
    analyze->callback([&] {
        cli::AnalyzeArgs analyze_args;
        if (analyze_mode == "pca")
            analyze_args.mode = cli::AnalyzeMode::pca;
        else if (analyze_mode == "spectral-bins")
            analyze_args.mode = cli::AnalyzeMode::spectral_bins;
        else
            throw ConfigError("unknown analyze mode '" + analyze_mode + "'");
        if (!analyze_compare.empty()) analyze_args.compare = analyze_compare;
        cli::cmd_analyze(analyze_manifest, analyze_args, resolve_common(analyze_flags, analyze));
    });

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled cough corpus");
    CommonFlags synth_flags;
    cli::SynthArgs synth_args;
    std::string synth_stage = "none";
    synth->add_option("--healthy", synth_args.healthy, "healthy subjects to generate");
    synth->add_option("--asthma", synth_args.asthma, "asthma subjects to generate");
    synth->add_option("--urti", synth_args.urti, "URTI subjects to generate");
    synth->add_option("--lrti", synth_args.lrti, "LRTI subjects to generate");
    synth->add_option("--coughs-min", synth_args.coughs_min, "minimum coughs per subject");
    synth->add_option("--coughs-max", synth_args.coughs_max, "maximum coughs per subject");
    synth->add_option("--rate", synth_args.sample_rate, "WAV sample rate in Hz");
    synth->add_option("--stage", synth_stage, "stage tag for every entry: stage1 | stage2 | none");
    add_common(synth, synth_flags);
    synth->callback([&] {
        if (synth_stage == "stage1")
            synth_args.stage = dataset::Stage::stage1;
        else if (synth_stage == "stage2")
            synth_args.stage = dataset::Stage::stage2;
        else if (synth_stage == "none" || synth_stage.empty())
            synth_args.stage = dataset::Stage::none;
        else
            throw ConfigError("unknown stage '" + synth_stage + "'");
        cli::cmd_synth(synth_args, resolve_common(synth_flags, synth));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // stable usage-error code regardless of CLI11 internals
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        log::error(e.what());
        return 1;
    } catch (const NumericError& e) {
        log::error(e.what());
        return 3;
    } catch (const Error& e) {
        log::error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log::error(e.what());
        return 2;
    }
}
