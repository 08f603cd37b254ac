#include "coughlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "coughlab/audio.hpp"
#include "coughlab/container.hpp"
#include "coughlab/util.hpp"

namespace coughlab::dataset {

namespace {

constexpr const char* kManifestHeader = "clip_path,subject_id,label,stage";

// RNG stream salts; labels use their enum value, these start above it.
constexpr std::uint64_t kPoolStream = 8;

std::string trim_cr(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

// Constant-peak-gain biquad bandpass (RBJ cookbook); used by the corpus
// generator to give each class its own resonance band.
struct BandpassBiquad {
    double b0, b2, a1, a2;
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;

    BandpassBiquad(double center_hz, double q, double sample_rate) {
        const double w = 2.0 * std::numbers::pi * center_hz / sample_rate;
        const double alpha = std::sin(w) / (2.0 * q);
        const double a0 = 1.0 + alpha;
        b0 = alpha / a0;
        b2 = -alpha / a0;
        a1 = -2.0 * std::cos(w) / a0;
        a2 = (1.0 - alpha) / a0;
    }

    double step(double x) {
        const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        return y;
    }
};

struct ClassVoice {
    double resonance_lo;  // Hz
    double resonance_hi;  // Hz
    double tilt;          // one-pole lowpass feedback; higher = warmer
    Index bursts_min;
    Index bursts_max;
};

// Fixed test-fixture constants: each class occupies its own resonance band
// (all far below the conditioned Nyquist of ~5.5 kHz), so the classes are
// separable by construction. Not a model of clinical cough acoustics.
ClassVoice voice_for(Label label) {
    switch (label) {
        case Label::healthy: return {500.0, 850.0, 0.55, 1, 2};
        case Label::asthma: return {1600.0, 1900.0, 0.15, 1, 1};
        case Label::urti: return {2700.0, 3000.0, 0.10, 2, 2};
        case Label::lrti: return {3800.0, 4200.0, 0.05, 2, 3};
    }
    throw ConfigError("unknown label");
}

audio::AudioClip synth_cough(Label label, double jitter_lo, double jitter_hi,
                             std::uint64_t cough_seed, int sample_rate) {
    std::mt19937_64 rng(cough_seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const ClassVoice voice = voice_for(label);

    const double duration_s = 0.35 + 0.2 * uniform(rng);
    const Index n = static_cast<Index>(std::lround(duration_s * sample_rate));
    Vector excitation = Vector::Zero(n);

    const Index burst_span = voice.bursts_max - voice.bursts_min + 1;
    const Index n_bursts = std::min(
        voice.bursts_max,
        voice.bursts_min + static_cast<Index>(uniform(rng) * static_cast<double>(burst_span)));
    for (Index b = 0; b < n_bursts; ++b) {
        const Index start =
            b == 0 ? 0 : static_cast<Index>((0.15 + 0.5 * uniform(rng)) * static_cast<double>(n));
        const double tau = (0.03 + 0.05 * uniform(rng)) * sample_rate;  // samples
        const double amp = b == 0 ? 1.0 : 0.3 + 0.4 * uniform(rng);
        for (Index t = start; t < n; ++t)
            excitation[t] += amp * std::exp(-static_cast<double>(t - start) / tau) * gauss(rng);
    }

    BandpassBiquad lo(voice.resonance_lo * jitter_lo, 8.0, sample_rate);
    BandpassBiquad hi(voice.resonance_hi * jitter_hi, 8.0, sample_rate);
    Vector shaped(n);
    double tilt_state = 0.0;
    for (Index t = 0; t < n; ++t) {
        const double resonant = lo.step(excitation[t]) + 0.8 * hi.step(excitation[t]);
        tilt_state = resonant + voice.tilt * tilt_state;
        shaped[t] = tilt_state + 0.01 * gauss(rng);
    }

    const double peak = shaped.cwiseAbs().maxCoeff();
    const double target = 0.6 + 0.3 * uniform(rng);
    if (peak > 0.0) shaped *= target / peak;

    audio::AudioClip clip;
    clip.samples = std::move(shaped);
    clip.sample_rate = sample_rate;
    return clip;
}

}  // namespace

std::string to_string(Label label) {
    switch (label) {
        case Label::healthy: return "healthy";
        case Label::asthma: return "asthma";
        case Label::urti: return "urti";
        case Label::lrti: return "lrti";
    }
    throw ConfigError("unknown label value");
}

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::stage1: return "stage1";
        case Stage::stage2: return "stage2";
        case Stage::none: return "none";
    }
    throw ConfigError("unknown stage value");
}

Label label_from_string(const std::string& text) {
    if (text == "healthy") return Label::healthy;
    if (text == "asthma") return Label::asthma;
    if (text == "urti") return Label::urti;
    if (text == "lrti") return Label::lrti;
    throw ManifestError("unknown label '" + text + "'");
}

Stage stage_from_string(const std::string& text) {
    if (text == "stage1") return Stage::stage1;
    if (text == "stage2") return Stage::stage2;
    if (text == "none" || text.empty()) return Stage::none;
    throw ManifestError("unknown stage '" + text + "'");
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ManifestError("cannot open manifest: " + path.string());
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";

    std::string line;
    if (!std::getline(is, line) || trim_cr(line) != kManifestHeader)
        throw ManifestError("manifest must start with header '" + std::string(kManifestHeader) +
                            "': " + path.string());

    std::vector<ManifestEntry> entries;
    std::set<std::string> seen_paths;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim_cr(line);
        if (line.empty()) continue;
        const auto fields = util::csv_split(line);
        if (fields.size() != 4)
            throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                std::to_string(fields.size()));
        if (fields[0].empty())
            throw ManifestError("manifest line " + std::to_string(line_no) + ": empty clip_path");
        if (fields[1].empty())
            throw ManifestError("manifest line " + std::to_string(line_no) + ": empty subject_id");

        ManifestEntry entry;
        std::filesystem::path clip(fields[0]);
        entry.clip_path = clip.is_absolute() ? clip : base / clip;
        entry.subject_id = fields[1];
        try {
            entry.label = label_from_string(fields[2]);
            entry.stage = stage_from_string(fields[3]);
        } catch (const ManifestError& e) {
            throw ManifestError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen_paths.insert(entry.clip_path.generic_string()).second)
            throw ManifestError("manifest line " + std::to_string(line_no) + ": duplicate clip_path '" +
                                fields[0] + "'");
        entries.push_back(std::move(entry));
    }
    return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create manifest: " + path.string());
    os << kManifestHeader << "\n";
    for (const auto& entry : entries) {
        os << util::csv_quote(entry.clip_path.generic_string()) << ','
           << util::csv_quote(entry.subject_id) << ',' << to_string(entry.label) << ','
           << to_string(entry.stage) << "\n";
    }
    if (!os) throw DataError("failed writing manifest: " + path.string());
}

SplitPlan split(const std::vector<ManifestEntry>& entries, double train_fraction,
                std::uint64_t seed, bool stratify_by_label) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    if (entries.empty()) throw DataError("split: empty manifest");

    // subject -> label, in first-appearance order; conflicting labels for
    // one subject make stratification meaningless
    std::vector<std::string> subject_order;
    std::map<std::string, Label> subject_label;
    for (const auto& entry : entries) {
        const auto it = subject_label.find(entry.subject_id);
        if (it == subject_label.end()) {
            subject_label.emplace(entry.subject_id, entry.label);
            subject_order.push_back(entry.subject_id);
        } else if (it->second != entry.label) {
            throw DataError("subject '" + entry.subject_id + "' appears with conflicting labels");
        }
    }

    SplitPlan plan;
    plan.train_fraction = train_fraction;
    plan.seed = seed;

    auto assign = [&](std::vector<std::string>& pool, std::uint64_t stream) {
        std::mt19937_64 rng(util::derive_seed(seed, stream));
        std::shuffle(pool.begin(), pool.end(), rng);
        const Index n = static_cast<Index>(pool.size());
        Index n_train = static_cast<Index>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
        if (n >= 2) n_train = std::clamp<Index>(n_train, 1, n - 1);
        else n_train = n;  // a lone subject goes to the train side
        for (Index i = 0; i < n; ++i) {
            if (i < n_train) plan.train_subjects.insert(pool[static_cast<std::size_t>(i)]);
            else plan.test_subjects.insert(pool[static_cast<std::size_t>(i)]);
        }
    };

    if (stratify_by_label) {
        for (Index lab = 0; lab < kNumLabels; ++lab) {
            std::vector<std::string> pool;
            for (const auto& s : subject_order)
                if (subject_label.at(s) == static_cast<Label>(lab)) pool.push_back(s);
            if (pool.empty()) continue;
            if (pool.size() < 2)
                throw DataError("stratified split infeasible: label '" +
                                to_string(static_cast<Label>(lab)) + "' has a single subject");
            assign(pool, static_cast<std::uint64_t>(lab));
        }
    } else {
        std::vector<std::string> pool = subject_order;
        if (pool.size() < 2) throw DataError("split needs at least two subjects");
        assign(pool, kPoolStream);
    }
    return plan;
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> apply_split(
    const std::vector<ManifestEntry>& entries, const SplitPlan& plan) {
    std::vector<ManifestEntry> train, test;
    for (const auto& entry : entries) {
        if (plan.train_subjects.count(entry.subject_id)) train.push_back(entry);
        else if (plan.test_subjects.count(entry.subject_id)) test.push_back(entry);
        else throw DataError("subject '" + entry.subject_id + "' is absent from the split plan");
    }
    return {std::move(train), std::move(test)};
}

void write_split(const std::filesystem::path& path, const SplitPlan& plan) {
    container::Json j = container::Json::object();
    j["train_fraction"] = plan.train_fraction;
    j["seed"] = plan.seed;
    j["train_subjects"] = plan.train_subjects;
    j["test_subjects"] = plan.test_subjects;

    std::ofstream os(path);
    if (!os) throw DataError("cannot create split record: " + path.string());
    os << j.dump(2) << "\n";
    if (!os) throw DataError("failed writing split record: " + path.string());
}

SplitPlan read_split(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open split record: " + path.string());
    container::Json j;
    try {
        is >> j;
        SplitPlan plan;
        plan.train_fraction = j.at("train_fraction").get<double>();
        plan.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("train_subjects")) plan.train_subjects.insert(s.get<std::string>());
        for (const auto& s : j.at("test_subjects")) plan.test_subjects.insert(s.get<std::string>());
        return plan;
    } catch (const container::Json::exception& e) {
        throw DataError("malformed split record " + path.string() + ": " + e.what());
    }
}

Task task_from_string(const std::string& text) {
    if (text == "healthy-vs-pathology" || text == "2class") return Task::healthy_vs_pathology;
    if (text == "healthy-vs-asthma") return Task::healthy_vs_asthma;
    if (text == "healthy-vs-urti") return Task::healthy_vs_urti;
    if (text == "healthy-vs-lrti") return Task::healthy_vs_lrti;
    if (text == "4class") return Task::four_class;
    throw ConfigError("unknown task '" + text +
                      "' (expected healthy-vs-pathology, healthy-vs-asthma, healthy-vs-urti, "
                      "healthy-vs-lrti, or 4class)");
}

std::string to_string(Task task) {
    switch (task) {
        case Task::healthy_vs_pathology: return "healthy-vs-pathology";
        case Task::healthy_vs_asthma: return "healthy-vs-asthma";
        case Task::healthy_vs_urti: return "healthy-vs-urti";
        case Task::healthy_vs_lrti: return "healthy-vs-lrti";
        case Task::four_class: return "4class";
    }
    throw ConfigError("unknown task value");
}

std::vector<std::string> task_class_names(Task task) {
    switch (task) {
        case Task::healthy_vs_pathology: return {"healthy", "pathological"};
        case Task::healthy_vs_asthma: return {"healthy", "asthma"};
        case Task::healthy_vs_urti: return {"healthy", "urti"};
        case Task::healthy_vs_lrti: return {"healthy", "lrti"};
        case Task::four_class: return {"healthy", "asthma", "urti", "lrti"};
    }
    throw ConfigError("unknown task value");
}

std::vector<TaskExample> apply_task(const std::vector<ManifestEntry>& entries, Task task) {
    auto keep_pair = [&](Label pathology) {
        std::vector<TaskExample> out;
        for (const auto& e : entries) {
            if (e.label == Label::healthy) out.push_back({e, 0});
            else if (e.label == pathology) out.push_back({e, 1});
        }
        return out;
    };

    std::vector<TaskExample> examples;
    switch (task) {
        case Task::healthy_vs_pathology:
            for (const auto& e : entries)
                examples.push_back({e, e.label == Label::healthy ? Index{0} : Index{1}});
            break;
        case Task::healthy_vs_asthma: examples = keep_pair(Label::asthma); break;
        case Task::healthy_vs_urti: examples = keep_pair(Label::urti); break;
        case Task::healthy_vs_lrti: examples = keep_pair(Label::lrti); break;
        case Task::four_class:
            for (const auto& e : entries)
                examples.push_back({e, static_cast<Index>(e.label)});
            break;
    }

    const auto names = task_class_names(task);
    std::vector<bool> present(names.size(), false);
    for (const auto& ex : examples) present[static_cast<std::size_t>(ex.class_index)] = true;
    for (std::size_t k = 0; k < names.size(); ++k)
        if (!present[k])
            throw ConfigError("task " + to_string(task) + " infeasible: no '" + names[k] +
                              "' entries in the manifest");
    return examples;
}

std::vector<ManifestEntry> synth_corpus(const SynthSpec& spec,
                                        const std::filesystem::path& out_dir) {
    if (spec.coughs_min < 1 || spec.coughs_max < spec.coughs_min)
        throw ConfigError("coughs-per-subject range is invalid");
    if (spec.sample_rate < 8000) throw ConfigError("synth sample rate must be >= 8000");
    for (const auto& [label, count] : spec.class_counts)
        if (count < 1) throw ConfigError("subject count for " + to_string(label) + " must be >= 1");

    std::filesystem::create_directories(out_dir / "clips");

    std::vector<ManifestEntry> entries;
    for (const auto& [label, count] : spec.class_counts) {
        const auto label_salt = static_cast<std::uint64_t>(label);
        for (Index s = 0; s < count; ++s) {
            std::mt19937_64 subject_rng(
                util::derive_seed(spec.seed, label_salt, static_cast<std::uint64_t>(s)));
            std::uniform_real_distribution<double> jitter(0.96, 1.04);
            const double jitter_lo = jitter(subject_rng);
            const double jitter_hi = jitter(subject_rng);
            const Index n_coughs =
                spec.coughs_min +
                static_cast<Index>(subject_rng() % static_cast<std::uint64_t>(
                                                        spec.coughs_max - spec.coughs_min + 1));

            char subject_name[64];
            std::snprintf(subject_name, sizeof(subject_name), "%s-s%03lld",
                          to_string(label).c_str(), static_cast<long long>(s + 1));

            for (Index c = 0; c < n_coughs; ++c) {
                const std::uint64_t cough_seed =
                    util::derive_seed(spec.seed, label_salt, static_cast<std::uint64_t>(s),
                                      static_cast<std::uint64_t>(c), std::uint64_t{99});
                const audio::AudioClip clip =
                    synth_cough(label, jitter_lo, jitter_hi, cough_seed, spec.sample_rate);

                char file_name[96];
                std::snprintf(file_name, sizeof(file_name), "%s-c%02lld.wav", subject_name,
                              static_cast<long long>(c + 1));
                const std::filesystem::path rel = std::filesystem::path("clips") / file_name;
                audio::write_wav_pcm16(out_dir / rel, clip);

                ManifestEntry entry;
                entry.clip_path = rel;  // relative inside the manifest for portability
                entry.subject_id = subject_name;
                entry.label = label;
                entry.stage = spec.stage;
                entries.push_back(std::move(entry));
            }
        }
    }

    write_manifest(out_dir / "manifest.csv", entries);
    return load_manifest(out_dir / "manifest.csv");
}

}  // namespace coughlab::dataset
