#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coughlab/common.hpp"

namespace coughlab::dataset {

enum class Label { healthy, asthma, urti, lrti };
enum class Stage { stage1, stage2, none };

constexpr Index kNumLabels = 4;

std::string to_string(Label label);
std::string to_string(Stage stage);
Label label_from_string(const std::string& text);  // ManifestError on unknown
Stage stage_from_string(const std::string& text);

struct ManifestEntry {
    std::filesystem::path clip_path;
    std::string subject_id;
    Label label = Label::healthy;
    Stage stage = Stage::none;
};

// CSV with header clip_path,subject_id,label,stage. Relative clip paths are
// resolved against the manifest's directory; duplicates and unknown labels
// are rejected with the offending line number.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct SplitPlan {
    std::set<std::string> train_subjects;
    std::set<std::string> test_subjects;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

// Subject-level split: subjects are shuffled with a seeded RNG (within each
// label stratum when stratifying) and the first floor(n*fraction) go to the
// train side, clamped so both sides keep at least one subject. Every cough
// of a subject lands on a single side. A stratified label with fewer than
// two subjects is infeasible.
SplitPlan split(const std::vector<ManifestEntry>& entries, double train_fraction = 0.7,
                std::uint64_t seed = 0, bool stratify_by_label = true);

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> apply_split(
    const std::vector<ManifestEntry>& entries, const SplitPlan& plan);

// JSON split record so an evaluation can reuse the exact test set.
void write_split(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan read_split(const std::filesystem::path& path);

// The trainable/evaluable tasks: the merged 2-class screen, the pairwise
// screens, and the 4-class model.
enum class Task { healthy_vs_pathology, healthy_vs_asthma, healthy_vs_urti, healthy_vs_lrti, four_class };

Task task_from_string(const std::string& text);  // ConfigError on unknown
std::string to_string(Task task);

// Class names in model output order; index 0 is always healthy and, for the
// 2-class tasks, index 1 is the positive (pathological) class.
std::vector<std::string> task_class_names(Task task);

struct TaskExample {
    ManifestEntry entry;
    Index class_index = 0;
};

// Filters and relabels manifest entries for a task (pathologies merge to
// one class for the 2-class screen; pairwise tasks drop the other classes).
// A task whose classes are not all present is infeasible -> ConfigError.
std::vector<TaskExample> apply_task(const std::vector<ManifestEntry>& entries, Task task);

struct SynthSpec {
    // subjects per class; classes listed here are the only ones generated
    std::vector<std::pair<Label, Index>> class_counts;
    Index coughs_min = 10;
    Index coughs_max = 12;
    int sample_rate = 44100;
    Stage stage = Stage::none;
    std::uint64_t seed = 0;
};

// Synthetic cough corpus: exponentially decaying noise bursts shaped by
// class-dependent resonators and spectral tilt, written as PCM16 WAVs under
// out_dir/clips plus out_dir/manifest.csv. Purely a test fixture standing
// in for clinical audio; deterministic per seed. Returns the entries with
// resolved paths.
std::vector<ManifestEntry> synth_corpus(const SynthSpec& spec,
                                        const std::filesystem::path& out_dir);

}  // namespace coughlab::dataset
