#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "coughlab/cli.hpp"
#include "coughlab/container.hpp"
#include "coughlab/eval.hpp"

using namespace coughlab;
namespace fs = std::filesystem;

namespace {

std::string g_binary;  // path to the coughlab executable, from --bin

fs::path fresh_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "coughlab-test-cli" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& arguments) {
    REQUIRE(!g_binary.empty());
    const std::string command = g_binary + " " + arguments + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream is(path);
    REQUIRE(is.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// small 2-class corpus shared by the workflow tests
const fs::path& two_class_corpus() {
    static const fs::path dir = [] {
        const fs::path d = fresh_dir("corpus-2class");
        dataset::SynthSpec spec;
        spec.class_counts = {{dataset::Label::healthy, 4}, {dataset::Label::asthma, 4}};
        spec.coughs_min = 3;
        spec.coughs_max = 4;
        spec.sample_rate = 11025;
        spec.seed = 5;
        dataset::synth_corpus(spec, d);
        return d;
    }();
    return dir;
}

const fs::path& four_class_corpus() {
    static const fs::path dir = [] {
        const fs::path d = fresh_dir("corpus-4class");
        dataset::SynthSpec spec;
        spec.class_counts = {{dataset::Label::healthy, 2},
                             {dataset::Label::asthma, 2},
                             {dataset::Label::urti, 2},
                             {dataset::Label::lrti, 2}};
        spec.coughs_min = 2;
        spec.coughs_max = 3;
        spec.sample_rate = 11025;
        spec.seed = 6;
        dataset::synth_corpus(spec, d);
        return d;
    }();
    return dir;
}

cli::CommonArgs fast_args(const fs::path& out_dir, std::uint64_t seed = 3) {
    cli::CommonArgs args;
    args.config.seed = seed;
    args.config.jobs = 2;
    args.config.network.hidden_units = 8;
    args.config.network.num_bilstm_layers = 1;
    args.config.network.dropout_rate = 0.2;
    args.config.training.max_epochs = 12;
    args.out_dir = out_dir;
    return args;
}

// a trained checkpoint + split reused by the eval/predict tests
struct TrainedBundle {
    fs::path out;
    fs::path manifest;
};

const TrainedBundle& trained_bundle() {
    static const TrainedBundle bundle = [] {
        TrainedBundle b;
        b.out = fresh_dir("train-run");
        b.manifest = two_class_corpus() / "manifest.csv";
        cli::cmd_train(b.manifest, dataset::Task::healthy_vs_pathology, fast_args(b.out));
        return b;
    }();
    return bundle;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("synth --help") == 0);
    CHECK(run_cli("") == 1);                  // a verb is required
    CHECK(run_cli("transcribe --out x") == 1);  // unknown verb
    CHECK(run_cli("synth --healthy 2 --asthma 2 --out /tmp/x --frobnicate") == 1);
    CHECK(run_cli("synth --healthy 2 --asthma 2") == 1);  // --out is required
}

TEST_CASE("config errors exit with code 1, data errors with code 2") {
    const auto dir = fresh_dir("exit-codes");

    CHECK(run_cli("synth --healthy 1 --asthma 1 --out " + (dir / "a").string() +
                  " --set no-equals-sign") == 1);
    CHECK(run_cli("synth --healthy 1 --asthma 1 --out " + (dir / "b").string() +
                  " --set unknown.key=1") == 1);
    CHECK(run_cli("synth --healthy 1 --asthma 1 --rate 11025 --stage stage9 --out " +
                  (dir / "c").string()) == 1);

    // featurize against a manifest that does not exist
    CHECK(run_cli("featurize --manifest " + (dir / "ghost.csv").string() + " --out " +
                  (dir / "d").string()) == 2);

    // a manifest whose only clip is not a WAV, run strictly
    std::ofstream(dir / "junk.wav") << "this is not audio";
    std::ofstream(dir / "manifest.csv")
        << "clip_path,subject_id,label,stage\njunk.wav,s1,healthy,none\n";
    CHECK(run_cli("featurize --manifest " + (dir / "manifest.csv").string() + " --strict --out " +
                  (dir / "e").string()) == 2);
    // lenient mode still fails: nothing survives featurization
    CHECK(run_cli("featurize --manifest " + (dir / "manifest.csv").string() + " --out " +
                  (dir / "f").string()) == 2);

    // unknown task / analyze mode are configuration errors
    const auto& corpus = two_class_corpus();
    CHECK(run_cli("train --manifest " + (corpus / "manifest.csv").string() +
                  " --task 3class --out " + (dir / "g").string()) == 1);
    CHECK(run_cli("analyze --manifest " + (corpus / "manifest.csv").string() +
                  " --mode histogram --out " + (dir / "h").string()) == 1);
}

TEST_CASE("synth via the binary writes a coherent corpus") {
    const auto dir = fresh_dir("synth-bin");
    CHECK(run_cli("synth --healthy 2 --asthma 2 --coughs-min 3 --coughs-max 4 --rate 11025 "
                  "--seed 7 --out " +
                  dir.string()) == 0);
    CHECK(fs::exists(dir / "resolved_config.txt"));

    const auto entries = dataset::load_manifest(dir / "manifest.csv");
    std::set<std::string> subjects;
    for (const auto& e : entries) {
        subjects.insert(e.subject_id);
        CHECK(fs::exists(e.clip_path));
    }
    CHECK(subjects.size() == 4);

    // the same invocation reproduces the same bytes
    const auto dir2 = fresh_dir("synth-bin-again");
    CHECK(run_cli("synth --healthy 2 --asthma 2 --coughs-min 3 --coughs-max 4 --rate 11025 "
                  "--seed 7 --out " +
                  dir2.string()) == 0);
    CHECK(read_bytes(dir / "manifest.csv") == read_bytes(dir2 / "manifest.csv"));
    CHECK(read_bytes(entries.front().clip_path) ==
          read_bytes(dir2 / "clips" / entries.front().clip_path.filename()));
}

TEST_CASE("featurize writes numbered feature files and an index") {
    const auto& corpus = two_class_corpus();
    const auto out = fresh_dir("featurize");
    cli::cmd_featurize(corpus / "manifest.csv", fast_args(out));

    CHECK(fs::exists(out / "resolved_config.txt"));
    const auto lines = read_lines(out / "feature_index.csv");
    REQUIRE(!lines.empty());
    CHECK(lines.front() == "clip_path,subject_id,label,stage,feature_path,frames,dims");

    const auto entries = dataset::load_manifest(corpus / "manifest.csv");
    CHECK(lines.size() == entries.size() + 1);
    CHECK(fs::exists(out / "features" / "00000.cgf"));
    std::ostringstream last_name;
    last_name << std::setw(5) << std::setfill('0') << entries.size() - 1 << ".cgf";
    CHECK(fs::exists(out / "features" / last_name.str()));

    // feature payloads are reproducible run to run
    const auto out2 = fresh_dir("featurize-again");
    cli::cmd_featurize(corpus / "manifest.csv", fast_args(out2));
    CHECK(read_bytes(out / "features" / "00000.cgf") ==
          read_bytes(out2 / "features" / "00000.cgf"));
}

TEST_CASE("featurize honors strict mode for broken clips") {
    const auto& corpus = two_class_corpus();
    const auto dir = fresh_dir("featurize-strict");

    auto entries = dataset::load_manifest(corpus / "manifest.csv");
    std::ofstream(dir / "junk.wav") << "not audio";
    dataset::ManifestEntry bad;
    bad.clip_path = dir / "junk.wav";
    bad.subject_id = "broken-subject";
    bad.label = dataset::Label::healthy;
    entries.push_back(bad);
    dataset::write_manifest(dir / "manifest.csv", entries);

    auto strict = fast_args(dir / "strict-out");
    strict.strict = true;
    CHECK_THROWS_AS(cli::cmd_featurize(dir / "manifest.csv", strict), DataError);

    cli::cmd_featurize(dir / "manifest.csv", fast_args(dir / "lenient-out"));
    const auto lines = read_lines(dir / "lenient-out" / "feature_index.csv");
    CHECK(lines.size() == entries.size());  // header + all rows but the broken one
}

TEST_CASE("train produces a loadable checkpoint bundle") {
    const auto& bundle = trained_bundle();
    CHECK(fs::exists(bundle.out / "checkpoint.bin"));
    CHECK(fs::exists(bundle.out / "history.csv"));
    CHECK(fs::exists(bundle.out / "split.json"));
    CHECK(fs::exists(bundle.out / "resolved_config.txt"));

    const auto ckpt = net::load_checkpoint(bundle.out / "checkpoint.bin");
    CHECK(ckpt.config.num_classes == 2);
    CHECK(ckpt.config.input_dim == 42);
    CHECK(ckpt.config.hidden_units == 8);
    CHECK(ckpt.extra.at("task") == "healthy-vs-pathology");
    CHECK(ckpt.extra.contains("pipeline"));
    CHECK(ckpt.extra.at("classes") ==
          container::Json(std::vector<std::string>{"healthy", "pathological"}));

    const auto history = read_lines(bundle.out / "history.csv");
    CHECK(history.front() == "epoch,train_loss,train_acc,val_loss,val_acc");
    CHECK(history.size() >= 2);

    // the split keeps subjects disjoint
    const auto plan = dataset::read_split(bundle.out / "split.json");
    for (const auto& s : plan.train_subjects) CHECK(plan.test_subjects.count(s) == 0);
    CHECK(plan.train_subjects.size() + plan.test_subjects.size() == 8);
}

TEST_CASE("eval reuses a recorded split and tags the side") {
    const auto& bundle = trained_bundle();

    cli::EvalArgs eval_args;
    eval_args.checkpoint = bundle.out / "checkpoint.bin";
    eval_args.split_record = bundle.out / "split.json";

    const auto out = fresh_dir("eval-test-side");
    cli::cmd_eval(bundle.manifest, eval_args, fast_args(out));
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "cough_roc.csv"));

    container::Json report;
    std::ifstream(out / "report.json") >> report;
    CHECK(report.at("task") == "healthy-vs-pathology");
    CHECK(report.at("side") == "test");
    CHECK(report.at("n_subjects").get<Index>() == 4);  // 8 subjects, 0.7 split -> 4 test

    eval_args.use_train_side = true;
    const auto out_train = fresh_dir("eval-train-side");
    cli::cmd_eval(bundle.manifest, eval_args, fast_args(out_train));
    container::Json train_report;
    std::ifstream(out_train / "report.json") >> train_report;
    CHECK(train_report.at("side") == "train-set");
    CHECK(train_report.at("n_subjects").get<Index>() == 4);

    // asking for the train side without a split record is a config error
    cli::EvalArgs no_split;
    no_split.checkpoint = bundle.out / "checkpoint.bin";
    no_split.use_train_side = true;
    CHECK_THROWS_AS(cli::cmd_eval(bundle.manifest, no_split, fast_args(fresh_dir("eval-bad"))),
                    ConfigError);

    // whole-manifest evaluation is tagged as such
    cli::EvalArgs whole;
    whole.checkpoint = bundle.out / "checkpoint.bin";
    const auto out_whole = fresh_dir("eval-whole");
    cli::cmd_eval(bundle.manifest, whole, fast_args(out_whole));
    container::Json whole_report;
    std::ifstream(out_whole / "report.json") >> whole_report;
    CHECK(whole_report.at("side") == "manifest");
    CHECK(whole_report.at("n_subjects").get<Index>() == 8);
}

TEST_CASE("eval refuses a checkpoint without workflow metadata") {
    const auto dir = fresh_dir("eval-bare-ckpt");
    net::NetworkConfig cfg;
    cfg.input_dim = 42;
    cfg.hidden_units = 4;
    cfg.num_bilstm_layers = 1;
    cfg.num_classes = 2;
    net::save_checkpoint(net::init_params(cfg), cfg, dir / "bare.bin");

    cli::EvalArgs eval_args;
    eval_args.checkpoint = dir / "bare.bin";
    CHECK_THROWS_AS(
        cli::cmd_eval(trained_bundle().manifest, eval_args, fast_args(dir / "out")), DataError);

    cli::PredictArgs predict_args;
    predict_args.checkpoint = dir / "bare.bin";
    predict_args.manifest = trained_bundle().manifest;
    CHECK_THROWS_AS(cli::cmd_predict(predict_args, fast_args(dir / "out2")), DataError);
}

TEST_CASE("predict emits cough rows and an aggregated subject row") {
    const auto& bundle = trained_bundle();
    const auto entries = dataset::load_manifest(bundle.manifest);

    cli::PredictArgs predict_args;
    predict_args.checkpoint = bundle.out / "checkpoint.bin";
    for (int i = 0; i < 3; ++i) predict_args.wav_paths.push_back(entries[i].clip_path);
    predict_args.subject_id = "pt-1";
    predict_args.subject_grouping = true;

    const auto out = fresh_dir("predict-grouped");
    cli::cmd_predict(predict_args, fast_args(out));

    const auto lines = read_lines(out / "predictions.csv");
    REQUIRE(lines.size() == 5);  // header + 3 coughs + 1 subject
    CHECK(lines[0] ==
          "row_type,source,subject_id,predicted_label,score_healthy,score_pathological");
    for (int i = 1; i <= 3; ++i) CHECK(lines[i].rfind("cough,", 0) == 0);
    CHECK(lines[4].rfind("subject,", 0) == 0);
    CHECK(lines[4].find("pt-1") != std::string::npos);

    // without grouping only the cough rows appear
    predict_args.subject_grouping = false;
    const auto flat = fresh_dir("predict-flat");
    cli::cmd_predict(predict_args, fast_args(flat));
    CHECK(read_lines(flat / "predictions.csv").size() == 4);

    // no inputs at all is a usage error
    cli::PredictArgs empty;
    empty.checkpoint = bundle.out / "checkpoint.bin";
    CHECK_THROWS_AS(cli::cmd_predict(empty, fast_args(fresh_dir("predict-none"))), ConfigError);
}

TEST_CASE("grid-search writes the cell table and the split") {
    const auto& corpus = two_class_corpus();
    const auto out = fresh_dir("grid");

    cli::GridArgs grid;
    grid.hidden_units = {6};
    grid.num_bilstm_layers = {1};
    grid.dropout_rate = {0.0, 0.2};
    grid.metric = net::GridMetric::training_loss;

    auto args = fast_args(out);
    args.config.training.max_epochs = 4;
    cli::cmd_grid_search(corpus / "manifest.csv", dataset::Task::healthy_vs_pathology, grid,
                         args);

    CHECK(fs::exists(out / "split.json"));
    const auto lines = read_lines(out / "grid.csv");
    CHECK(lines.size() == 3);  // header + one row per cell
}

TEST_CASE("analyze pca exports a 3-component scatter") {
    const auto& corpus = two_class_corpus();
    const auto out = fresh_dir("analyze-pca");

    cli::AnalyzeArgs analyze;
    analyze.mode = cli::AnalyzeMode::pca;
    auto args = fast_args(out);
    args.config.pca_samples_per_class = 200;
    cli::cmd_analyze(corpus / "manifest.csv", analyze, args);

    const auto scatter = read_lines(out / "pca_scatter.csv");
    REQUIRE(scatter.size() >= 2);
    CHECK(scatter.front() == "pc1,pc2,pc3,label");

    const auto variance = read_lines(out / "explained_variance.csv");
    REQUIRE(variance.size() == 4);  // header + 3 components
    CHECK(variance.front() == "component,variance,ratio,cumulative_ratio");

    std::set<std::string> labels;
    for (std::size_t i = 1; i < scatter.size(); ++i)
        labels.insert(scatter[i].substr(scatter[i].rfind(',') + 1));
    CHECK(labels == std::set<std::string>{"healthy", "asthma"});
}

TEST_CASE("analyze pca --compare tags the two manifests") {
    const auto& corpus = two_class_corpus();
    const auto out = fresh_dir("analyze-compare");

    cli::AnalyzeArgs analyze;
    analyze.mode = cli::AnalyzeMode::pca;
    analyze.compare = four_class_corpus() / "manifest.csv";
    auto args = fast_args(out);
    args.config.pca_samples_per_class = 100;
    cli::cmd_analyze(corpus / "manifest.csv", analyze, args);

    const auto scatter = read_lines(out / "pca_scatter.csv");
    bool saw_first = false, saw_second = false;
    for (std::size_t i = 1; i < scatter.size(); ++i) {
        const auto label = scatter[i].substr(scatter[i].rfind(',') + 1);
        saw_first = saw_first || label.find("@1") != std::string::npos;
        saw_second = saw_second || label.find("@2") != std::string::npos;
    }
    CHECK(saw_first);
    CHECK(saw_second);
}

TEST_CASE("analyze spectral-bins summarizes every class and bin") {
    const auto& corpus = four_class_corpus();
    const auto out = fresh_dir("analyze-spectral");

    cli::AnalyzeArgs analyze;
    analyze.mode = cli::AnalyzeMode::spectral_bins;
    cli::cmd_analyze(corpus / "manifest.csv", analyze, fast_args(out));

    const auto bins = read_lines(out / "spectral_bins.csv");
    const auto entries = dataset::load_manifest(corpus / "manifest.csv");
    REQUIRE(bins.size() == entries.size() + 1);
    CHECK(bins.front().rfind("clip_path,subject_id,label,stage,manifest,bin0_power", 0) == 0);

    const auto summary = read_lines(out / "spectral_summary.csv");
    CHECK(summary.front() == "label,bin,lo_hz,hi_hz,q1,median,q3");
    CHECK(summary.size() == 1 + 4 * 5);  // four labels x five bins

    std::set<std::string> labels;
    for (std::size_t i = 1; i < summary.size(); ++i)
        labels.insert(summary[i].substr(0, summary[i].find(',')));
    CHECK(labels == std::set<std::string>{"healthy", "asthma", "urti", "lrti"});
}

int main(int argc, char** argv) {
    std::vector<char*> pass;
    pass.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--bin" && i + 1 < argc) {
            g_binary = argv[++i];
            continue;
        }
        pass.push_back(argv[i]);
    }
    doctest::Context context(static_cast<int>(pass.size()), pass.data());
    return context.run();
}
