#include "coughlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "coughlab/eval.hpp"
#include "coughlab/log.hpp"
#include "coughlab/parallel.hpp"
#include "coughlab/pca.hpp"
#include "coughlab/util.hpp"

namespace coughlab::cli {

namespace {

// RNG stream salts for this layer (dataset labels use 0..3, split pool 8).
constexpr std::uint64_t kValCarveStream = 21;
constexpr std::uint64_t kPcaSampleStream = 22;

std::string zero_padded(std::size_t value) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", value);
    return buf;
}

// Featurizes task examples in parallel; failures are warned about and
// dropped, or rethrown under --strict.
net::ExampleSet featurize_examples(const std::vector<dataset::TaskExample>& examples,
                                   const runcfg::RunConfig& cfg, bool strict) {
    const auto pipeline = cfg.pipeline();
    std::vector<net::LabeledExample> slots(examples.size());
    std::vector<std::string> failures(examples.size());
    parallel_for(examples.size(), static_cast<int>(cfg.jobs), [&](std::size_t i) {
        const auto& ex = examples[i];
        try {
            slots[i].features = features::extract_from_file(
                ex.entry.clip_path, pipeline, ex.entry.clip_path.generic_string());
            slots[i].label = ex.class_index;
            slots[i].subject_id = ex.entry.subject_id;
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    net::ExampleSet out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!failures[i].empty()) {
            if (strict)
                throw DataError("featurizing '" + examples[i].entry.clip_path.generic_string() +
                                "' failed: " + failures[i]);
            log::warn("skipping '" + examples[i].entry.clip_path.generic_string() +
                      "': " + failures[i]);
            continue;
        }
        out.push_back(std::move(slots[i]));
    }
    if (out.empty()) throw DataError("no clips survived featurization");
    return out;
}

std::vector<dataset::ManifestEntry> entries_of(const std::vector<dataset::TaskExample>& examples) {
    std::vector<dataset::ManifestEntry> entries;
    entries.reserve(examples.size());
    for (const auto& ex : examples) entries.push_back(ex.entry);
    return entries;
}

// Splits task examples by subject membership in the plan's train set.
void partition_examples(const std::vector<dataset::TaskExample>& examples,
                        const dataset::SplitPlan& plan,
                        std::vector<dataset::TaskExample>& train_side,
                        std::vector<dataset::TaskExample>& other_side) {
    for (const auto& ex : examples) {
        if (plan.train_subjects.count(ex.entry.subject_id)) train_side.push_back(ex);
        else other_side.push_back(ex);
    }
}

struct PreparedTraining {
    net::ExampleSet train_set;
    net::ExampleSet val_set;
    dataset::SplitPlan plan;
    std::vector<std::string> class_names;
    net::NetworkConfig net_cfg;
    net::TrainConfig train_cfg;
};

PreparedTraining prepare_training(const std::filesystem::path& manifest, dataset::Task task,
                                  const CommonArgs& args) {
    const auto& cfg = args.config;
    const auto entries = dataset::load_manifest(manifest);
    const auto examples = dataset::apply_task(entries, task);

    PreparedTraining prep;
    prep.class_names = dataset::task_class_names(task);
    prep.plan = dataset::split(entries_of(examples), cfg.train_fraction, cfg.seed, true);

    std::vector<dataset::TaskExample> train_examples, test_examples;
    partition_examples(examples, prep.plan, train_examples, test_examples);

    std::vector<dataset::TaskExample> fit_examples = train_examples, val_examples;
    if (cfg.val_fraction > 0.0) {
        try {
            const auto val_plan =
                dataset::split(entries_of(train_examples), 1.0 - cfg.val_fraction,
                               util::derive_seed(cfg.seed, kValCarveStream), true);
            fit_examples.clear();
            partition_examples(train_examples, val_plan, fit_examples, val_examples);
        } catch (const DataError& e) {
            log::warn(std::string("validation carve infeasible (") + e.what() +
                      "); early stopping will watch the training loss");
            fit_examples = train_examples;
            val_examples.clear();
        }
    }

    log::info("training on " + std::to_string(fit_examples.size()) + " coughs, validating on " +
              std::to_string(val_examples.size()) + ", holding out " +
              std::to_string(test_examples.size()) + " for the test side");

    prep.train_set = featurize_examples(fit_examples, cfg, args.strict);
    prep.val_set = val_examples.empty() ? net::ExampleSet{}
                                        : featurize_examples(val_examples, cfg, args.strict);

    prep.net_cfg = cfg.network;
    prep.net_cfg.input_dim = cfg.feature_dim();
    prep.net_cfg.num_classes = static_cast<Index>(prep.class_names.size());
    prep.net_cfg.seed = cfg.seed;
    prep.train_cfg = cfg.training;
    prep.train_cfg.seed = cfg.seed;
    return prep;
}

container::Json checkpoint_extra(const runcfg::RunConfig& cfg, dataset::Task task,
                                 const std::vector<std::string>& class_names) {
    return container::Json{{"pipeline", runcfg::pipeline_to_json(cfg.pipeline())},
                           {"task", dataset::to_string(task)},
                           {"classes", class_names}};
}

std::vector<std::string> checkpoint_class_names(const net::Checkpoint& ckpt) {
    if (ckpt.extra.contains("classes")) {
        std::vector<std::string> names;
        for (const auto& n : ckpt.extra["classes"]) names.push_back(n.get<std::string>());
        if (static_cast<Index>(names.size()) == ckpt.config.num_classes) return names;
    }
    std::vector<std::string> names;
    for (Index k = 0; k < ckpt.config.num_classes; ++k)
        names.push_back("class" + std::to_string(k));
    return names;
}

// Linear-interpolation quantile over a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw DataError("quantile of an empty set");
    if (sorted.size() == 1) return sorted.front();
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct AnalyzedClip {
    dataset::ManifestEntry entry;
    int manifest_index;  // 1 or 2 (with --compare)
    Matrix frames;       // pca mode
    Vector bin_power;    // spectral mode
    Vector bin_edges;
};

std::vector<AnalyzedClip> analyze_clips(const std::vector<dataset::ManifestEntry>& entries,
                                        int manifest_index, AnalyzeMode mode,
                                        const runcfg::RunConfig& cfg, bool strict) {
    const auto pipeline = cfg.pipeline();
    std::vector<AnalyzedClip> slots(entries.size());
    std::vector<std::string> failures(entries.size());
    parallel_for(entries.size(), static_cast<int>(cfg.jobs), [&](std::size_t i) {
        try {
            slots[i].entry = entries[i];
            slots[i].manifest_index = manifest_index;
            if (mode == AnalyzeMode::pca) {
                slots[i].frames = features::extract_from_file(
                                      entries[i].clip_path, pipeline,
                                      entries[i].clip_path.generic_string())
                                      .frames;
            } else {
                const auto clip = audio::condition(audio::load_wav(entries[i].clip_path),
                                                   pipeline.conditioning);
                const auto bins =
                    features::spectral_bins(clip, cfg.spectral_bins, pipeline.frame);
                slots[i].bin_power = bins.bin_power;
                slots[i].bin_edges = bins.bin_edges;
            }
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    std::vector<AnalyzedClip> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!failures[i].empty()) {
            if (strict)
                throw DataError("analyzing '" + entries[i].clip_path.generic_string() +
                                "' failed: " + failures[i]);
            log::warn("skipping '" + entries[i].clip_path.generic_string() + "': " + failures[i]);
            continue;
        }
        out.push_back(std::move(slots[i]));
    }
    if (out.empty()) throw DataError("no clips survived analysis");
    return out;
}

std::string group_label(const dataset::ManifestEntry& entry, int manifest_index, bool compare) {
    std::string label = dataset::to_string(entry.label);
    if (compare) label += "@" + std::to_string(manifest_index);
    return label;
}

void run_pca_analysis(const std::vector<AnalyzedClip>& clips, bool compare,
                      const CommonArgs& args) {
    const auto& cfg = args.config;

    // group frames by scatter label, preserving first-appearance order
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<const Matrix*>> group_frames;
    for (const auto& clip : clips) {
        const std::string label = group_label(clip.entry, clip.manifest_index, compare);
        auto [it, inserted] = group_frames.try_emplace(label);
        if (inserted) group_order.push_back(label);
        it->second.push_back(&clip.frames);
    }

    // seeded per-group subsample of frames (paper-scale default 5000)
    std::vector<std::string> labels;
    std::vector<Matrix> sampled;
    for (std::size_t g = 0; g < group_order.size(); ++g) {
        const auto& group = group_frames.at(group_order[g]);
        Index total = 0;
        for (const auto* m : group) total += m->rows();
        std::vector<Index> indices(static_cast<std::size_t>(total));
        std::iota(indices.begin(), indices.end(), Index{0});
        std::mt19937_64 rng(util::derive_seed(cfg.seed, kPcaSampleStream,
                                              static_cast<std::uint64_t>(g)));
        std::shuffle(indices.begin(), indices.end(), rng);
        const Index take = std::min<Index>(cfg.pca_samples_per_class, total);

        Matrix pool(total, group.front()->cols());
        Index at = 0;
        for (const auto* m : group) {
            pool.middleRows(at, m->rows()) = *m;
            at += m->rows();
        }
        Matrix chosen(take, pool.cols());
        for (Index r = 0; r < take; ++r)
            chosen.row(r) = pool.row(indices[static_cast<std::size_t>(r)]);
        sampled.push_back(std::move(chosen));
        for (Index r = 0; r < take; ++r) labels.push_back(group_order[g]);
    }

    Index total_rows = 0;
    for (const auto& m : sampled) total_rows += m.rows();
    Matrix pooled(total_rows, sampled.front().cols());
    Index at = 0;
    for (const auto& m : sampled) {
        pooled.middleRows(at, m.rows()) = m;
        at += m.rows();
    }

    const auto model = pca::fit(pooled, 3);
    const Matrix scores = pca::transform(model, pooled);
    pca::export_scatter(scores, labels, args.out_dir / "pca_scatter.csv");

    std::ofstream os(args.out_dir / "explained_variance.csv");
    if (!os) throw DataError("cannot create explained_variance.csv");
    os << "component,variance,ratio,cumulative_ratio\n";
    double cumulative = 0.0;
    for (Index k = 0; k < model.n_components(); ++k) {
        cumulative += model.explained_ratio[k];
        os << (k + 1) << ',' << util::format_double(model.explained_variance[k]) << ','
           << util::format_double(model.explained_ratio[k]) << ','
           << util::format_double(cumulative) << "\n";
    }
    log::info("pca scatter over " + std::to_string(total_rows) + " frames; top-3 ratio " +
              util::format_double(cumulative));
}

void run_spectral_analysis(const std::vector<AnalyzedClip>& clips, bool compare,
                           const CommonArgs& args) {
    const Index n_bins = args.config.spectral_bins;
    {
        std::ofstream os(args.out_dir / "spectral_bins.csv");
        if (!os) throw DataError("cannot create spectral_bins.csv");
        os << "clip_path,subject_id,label,stage,manifest";
        for (Index b = 0; b < n_bins; ++b) os << ",bin" << b << "_power";
        os << "\n";
        for (const auto& clip : clips) {
            os << util::csv_quote(clip.entry.clip_path.generic_string()) << ','
               << util::csv_quote(clip.entry.subject_id) << ','
               << dataset::to_string(clip.entry.label) << ','
               << dataset::to_string(clip.entry.stage) << ',' << clip.manifest_index;
            for (Index b = 0; b < n_bins; ++b)
                os << ',' << util::format_double(clip.bin_power[b]);
            os << "\n";
        }
    }

    // per (group, bin) quartiles: the numbers a boxplot is drawn from
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<const AnalyzedClip*>> groups;
    for (const auto& clip : clips) {
        const std::string label = group_label(clip.entry, clip.manifest_index, compare);
        auto [it, inserted] = groups.try_emplace(label);
        if (inserted) group_order.push_back(label);
        it->second.push_back(&clip);
    }

    std::ofstream os(args.out_dir / "spectral_summary.csv");
    if (!os) throw DataError("cannot create spectral_summary.csv");
    os << "label,bin,lo_hz,hi_hz,q1,median,q3\n";
    for (const auto& name : group_order) {
        const auto& members = groups.at(name);
        for (Index b = 0; b < n_bins; ++b) {
            std::vector<double> values;
            values.reserve(members.size());
            for (const auto* clip : members) values.push_back(clip->bin_power[b]);
            std::sort(values.begin(), values.end());
            os << util::csv_quote(name) << ',' << b << ','
               << util::format_double(members.front()->bin_edges[b]) << ','
               << util::format_double(members.front()->bin_edges[b + 1]) << ','
               << util::format_double(quantile_sorted(values, 0.25)) << ','
               << util::format_double(quantile_sorted(values, 0.5)) << ','
               << util::format_double(quantile_sorted(values, 0.75)) << "\n";
        }
    }
}

}  // namespace

void cmd_featurize(const std::filesystem::path& manifest, const CommonArgs& args) {
    const auto& cfg = args.config;
    const auto entries = dataset::load_manifest(manifest);
    if (entries.empty()) throw DataError("manifest has no entries: " + manifest.string());

    std::filesystem::create_directories(args.out_dir / "features");
    runcfg::echo_config(cfg, args.out_dir);

    const auto pipeline = cfg.pipeline();
    std::vector<features::FeatureSequence> slots(entries.size());
    std::vector<std::string> failures(entries.size());
    parallel_for(entries.size(), static_cast<int>(cfg.jobs), [&](std::size_t i) {
        try {
            slots[i] = features::extract_from_file(entries[i].clip_path, pipeline,
                                                   entries[i].clip_path.generic_string());
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    std::ofstream index(args.out_dir / "feature_index.csv");
    if (!index) throw DataError("cannot create feature_index.csv");
    index << "clip_path,subject_id,label,stage,feature_path,frames,dims\n";

    std::size_t written = 0, skipped = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!failures[i].empty()) {
            if (args.strict)
                throw DataError("featurizing '" + entries[i].clip_path.generic_string() +
                                "' failed: " + failures[i]);
            log::warn("skipping '" + entries[i].clip_path.generic_string() + "': " + failures[i]);
            ++skipped;
            continue;
        }
        const std::string rel = "features/" + zero_padded(i) + ".cgf";
        features::write_feature_file(args.out_dir / rel, slots[i]);
        index << util::csv_quote(entries[i].clip_path.generic_string()) << ','
              << util::csv_quote(entries[i].subject_id) << ','
              << dataset::to_string(entries[i].label) << ','
              << dataset::to_string(entries[i].stage) << ',' << rel << ','
              << slots[i].frames.rows() << ',' << slots[i].frames.cols() << "\n";
        ++written;
    }
    if (written == 0) throw DataError("no clips survived featurization");
    log::info("featurized " + std::to_string(written) + " clips (" + std::to_string(skipped) +
              " skipped) into " + args.out_dir.string());
}

void cmd_train(const std::filesystem::path& manifest, dataset::Task task, const CommonArgs& args) {
    auto prep = prepare_training(manifest, task, args);
    std::filesystem::create_directories(args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);

    const auto result = net::train(prep.train_set, prep.val_set, prep.net_cfg, prep.train_cfg);

    net::save_checkpoint(result.params, prep.net_cfg, args.out_dir / "checkpoint.bin",
                         checkpoint_extra(args.config, task, prep.class_names));
    net::write_history_csv(args.out_dir / "history.csv", result.history);
    dataset::write_split(args.out_dir / "split.json", prep.plan);

    const auto& last = result.history.back();
    const auto& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
    log::info("trained " + dataset::to_string(task) + " for " +
              std::to_string(result.history.size()) + " epochs; final train accuracy " +
              util::format_double(last.train_acc) + ", best epoch " +
              std::to_string(result.best_epoch) + " (val loss " +
              util::format_double(best.val_loss) + ", val accuracy " +
              util::format_double(best.val_acc) + ")");
}

void cmd_grid_search(const std::filesystem::path& manifest, dataset::Task task,
                     const GridArgs& grid, const CommonArgs& args) {
    auto prep = prepare_training(manifest, task, args);
    std::filesystem::create_directories(args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);

    net::GridSearchSpec spec;
    spec.hidden_units = grid.hidden_units;
    spec.num_bilstm_layers = grid.num_bilstm_layers;
    spec.dropout_rate = grid.dropout_rate;
    spec.metric = grid.metric;

    const auto result = net::grid_search(spec, prep.train_set, prep.val_set, prep.net_cfg,
                                         prep.train_cfg);
    net::write_grid_csv(args.out_dir / "grid.csv", result);
    dataset::write_split(args.out_dir / "split.json", prep.plan);

    log::info("grid search over " + std::to_string(result.cells.size()) +
              " cells; best: hidden_units=" + std::to_string(result.best_config.hidden_units) +
              " bilstm_layers=" + std::to_string(result.best_config.num_bilstm_layers) +
              " dropout=" + util::format_double(result.best_config.dropout_rate));
}

void cmd_eval(const std::filesystem::path& manifest, const EvalArgs& eval_args,
              const CommonArgs& args) {
    const auto ckpt = net::load_checkpoint(eval_args.checkpoint);
    if (!ckpt.extra.contains("task") || !ckpt.extra.contains("pipeline"))
        throw DataError("checkpoint lacks task/pipeline metadata: " +
                        eval_args.checkpoint.string());
    const auto task = dataset::task_from_string(ckpt.extra["task"].get<std::string>());

    auto entries = dataset::load_manifest(manifest);
    std::string side = "manifest";
    if (eval_args.split_record) {
        const auto plan = dataset::read_split(*eval_args.split_record);
        auto [train_entries, test_entries] = dataset::apply_split(entries, plan);
        entries = eval_args.use_train_side ? std::move(train_entries) : std::move(test_entries);
        side = eval_args.use_train_side ? "train-set" : "test";
    } else if (eval_args.use_train_side) {
        throw ConfigError("--train-side needs --split to say what the train side is");
    }
    if (entries.empty()) throw DataError("no entries to evaluate on the chosen side");

    eval::EvaluateOptions opts;
    opts.pipeline = runcfg::pipeline_from_json(ckpt.extra["pipeline"]);
    opts.jobs = args.config.jobs;
    opts.strict = args.strict;
    opts.side = side;

    const auto report = eval::evaluate(ckpt, entries, task, opts);
    std::filesystem::create_directories(args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);
    eval::write_report(args.out_dir, report);

    std::string message = "evaluated " + std::to_string(report.n_coughs) + " coughs / " +
                          std::to_string(report.n_subjects) + " subjects: cough accuracy " +
                          util::format_double(report.cough_accuracy) + ", subject accuracy " +
                          util::format_double(report.subject_accuracy);
    if (report.has_roc)
        message += ", cough AROC " + util::format_double(report.cough_roc.aroc) +
                   ", subject AROC " + util::format_double(report.subject_roc.aroc);
    log::info(message);
}

void cmd_predict(const PredictArgs& predict_args, const CommonArgs& args) {
    const auto ckpt = net::load_checkpoint(predict_args.checkpoint);
    if (!ckpt.extra.contains("pipeline"))
        throw DataError("checkpoint lacks pipeline metadata: " + predict_args.checkpoint.string());
    const auto pipeline = runcfg::pipeline_from_json(ckpt.extra["pipeline"]);
    const auto names = checkpoint_class_names(ckpt);

    struct Target {
        std::filesystem::path path;
        std::string subject;
    };
    std::vector<Target> targets;
    if (predict_args.manifest) {
        for (const auto& entry : dataset::load_manifest(*predict_args.manifest))
            targets.push_back({entry.clip_path, entry.subject_id});
    }
    for (const auto& wav : predict_args.wav_paths)
        targets.push_back(
            {wav, predict_args.subject_id.empty() ? wav.stem().string() : predict_args.subject_id});
    if (targets.empty()) throw ConfigError("predict needs WAV paths or --manifest");

    std::vector<eval::PredictionRecord> records(targets.size());
    std::vector<std::string> failures(targets.size());
    parallel_for(targets.size(), static_cast<int>(args.config.jobs), [&](std::size_t i) {
        try {
            const auto feats = features::extract_from_file(targets[i].path, pipeline,
                                                           targets[i].path.generic_string());
            const Vector probs = net::forward(ckpt.params, ckpt.config, feats, net::Mode::infer);
            records[i].source_id = targets[i].path.generic_string();
            records[i].subject_id = targets[i].subject;
            records[i].predicted_label = net::argmax(probs);
            records[i].class_scores = probs;
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    std::vector<eval::PredictionRecord> kept;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!failures[i].empty()) {
            if (args.strict)
                throw DataError("predicting '" + targets[i].path.generic_string() +
                                "' failed: " + failures[i]);
            log::warn("skipping '" + targets[i].path.generic_string() + "': " + failures[i]);
            continue;
        }
        kept.push_back(std::move(records[i]));
    }
    if (kept.empty()) throw DataError("no clips survived prediction");

    std::filesystem::create_directories(args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);

    std::ofstream os(args.out_dir / "predictions.csv");
    if (!os) throw DataError("cannot create predictions.csv");
    os << "row_type,source,subject_id,predicted_label";
    for (const auto& name : names) os << ",score_" << name;
    os << "\n";
    auto emit = [&](const char* type, const eval::PredictionRecord& r) {
        os << type << ',' << util::csv_quote(r.source_id) << ',' << util::csv_quote(r.subject_id)
           << ',' << names[static_cast<std::size_t>(r.predicted_label)];
        for (Index k = 0; k < r.class_scores.size(); ++k)
            os << ',' << util::format_double(r.class_scores[k]);
        os << "\n";
    };
    for (const auto& r : kept) emit("cough", r);
    if (predict_args.subject_grouping) {
        for (const auto& r : eval::aggregate_subject(kept, ckpt.config.num_classes))
            emit("subject", r);
    }
    log::info("predicted " + std::to_string(kept.size()) + " coughs into " +
              (args.out_dir / "predictions.csv").string());
}

void cmd_analyze(const std::filesystem::path& manifest, const AnalyzeArgs& analyze_args,
                 const CommonArgs& args) {
    const auto entries = dataset::load_manifest(manifest);
    if (entries.empty()) throw ConfigError("manifest has no entries: " + manifest.string());

    std::filesystem::create_directories(args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);

    auto clips = analyze_clips(entries, 1, analyze_args.mode, args.config, args.strict);
    if (analyze_args.compare) {
        const auto second = dataset::load_manifest(*analyze_args.compare);
        if (second.empty())
            throw ConfigError("compare manifest has no entries: " + analyze_args.compare->string());
        auto more = analyze_clips(second, 2, analyze_args.mode, args.config, args.strict);
        clips.insert(clips.end(), std::make_move_iterator(more.begin()),
                     std::make_move_iterator(more.end()));
    }

    if (analyze_args.mode == AnalyzeMode::pca)
        run_pca_analysis(clips, analyze_args.compare.has_value(), args);
    else
        run_spectral_analysis(clips, analyze_args.compare.has_value(), args);
}

void cmd_synth(const SynthArgs& synth_args, const CommonArgs& args) {
    dataset::SynthSpec spec;
    spec.seed = args.config.seed;
    spec.coughs_min = synth_args.coughs_min;
    spec.coughs_max = synth_args.coughs_max;
    spec.sample_rate = synth_args.sample_rate;
    spec.stage = synth_args.stage;
    if (synth_args.healthy > 0) spec.class_counts.push_back({dataset::Label::healthy, synth_args.healthy});
    if (synth_args.asthma > 0) spec.class_counts.push_back({dataset::Label::asthma, synth_args.asthma});
    if (synth_args.urti > 0) spec.class_counts.push_back({dataset::Label::urti, synth_args.urti});
    if (synth_args.lrti > 0) spec.class_counts.push_back({dataset::Label::lrti, synth_args.lrti});
    if (spec.class_counts.empty())
        throw ConfigError("synth needs at least one class count (e.g. --healthy 5)");

    const auto entries = dataset::synth_corpus(spec, args.out_dir);
    runcfg::echo_config(args.config, args.out_dir);

    std::set<std::string> subjects;
    for (const auto& e : entries) subjects.insert(e.subject_id);
    log::info("synthesized " + std::to_string(entries.size()) + " coughs across " +
              std::to_string(subjects.size()) + " subjects into " + args.out_dir.string());
}

}  // namespace coughlab::cli
