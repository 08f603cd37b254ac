#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coughlab/common.hpp"
#include "coughlab/container.hpp"
#include "coughlab/dataset.hpp"
#include "coughlab/features.hpp"
#include "coughlab/net.hpp"

namespace coughlab::eval {

struct PredictionRecord {
    std::string source_id;
    std::string subject_id;
    Index true_label = 0;
    Index predicted_label = 0;
    Vector class_scores;  // per-class sigmoid outputs (means at subject level)
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct ConfusionMatrix {
    CountMatrix counts;      // rows = true, cols = predicted
    Matrix row_percentages;  // rows sum to 100 (empty rows stay zero)
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // threshold +inf (0,0) down to -inf (1,1)
    double aroc = 0.0;
    double optimal_threshold = 0.0;  // point nearest (0,1)
};

// Number of correct predictions over total predictions.
double accuracy(const std::vector<PredictionRecord>& records);

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records, Index num_classes);

// Threshold sweep over the distinct positive-class scores plus +/-inf
// sentinels; a record is called positive iff its score >= threshold. AROC
// by trapezoidal integration. Needs both classes present.
RocCurve roc(const std::vector<PredictionRecord>& records, Index positive_class);

// One record per subject: predicted label = mode of the subject's cough
// predictions (ties fall to the pathological class when there are two
// classes, otherwise to the tied class with the highest mean score, then
// class order); class_scores = mean of cough scores. Subjects keep their
// first-appearance order.
std::vector<PredictionRecord> aggregate_subject(const std::vector<PredictionRecord>& records,
                                                Index num_classes);

struct EvaluateOptions {
    features::PipelineConfig pipeline;
    Index jobs = 1;
    bool strict = false;        // per-file failures abort instead of warn
    std::string side = "test";  // which manifest side this is, echoed into the report
};

struct EvalReport {
    std::string task;
    std::string side;
    std::vector<std::string> class_names;
    Index n_coughs = 0;
    Index n_subjects = 0;
    Index n_failures = 0;
    double cough_accuracy = 0.0;
    double subject_accuracy = 0.0;
    ConfusionMatrix cough_confusion;
    ConfusionMatrix subject_confusion;
    bool has_roc = false;  // 2-class tasks
    RocCurve cough_roc;
    RocCurve subject_roc;
    // 4-class only: healthy vs any-pathology collapse
    bool has_collapsed = false;
    double collapsed_cough_accuracy = 0.0;
    double collapsed_subject_accuracy = 0.0;
    ConfusionMatrix collapsed_cough_confusion;
    ConfusionMatrix collapsed_subject_confusion;
    std::vector<PredictionRecord> cough_records;
    std::vector<PredictionRecord> subject_records;
};

// Full pipeline evaluation: conditions and featurizes every manifest entry,
// runs the checkpoint in infer mode, and assembles cough- and subject-level
// metrics. Per-file failures are logged, counted, and excluded unless
// opts.strict is set.
EvalReport evaluate(const net::Checkpoint& checkpoint,
                    const std::vector<dataset::ManifestEntry>& entries, dataset::Task task,
                    const EvaluateOptions& opts);

container::Json report_to_json(const EvalReport& report);

// report.json plus CSV exports (confusions, ROC points when present).
void write_report(const std::filesystem::path& out_dir, const EvalReport& report);

}  // namespace coughlab::eval
