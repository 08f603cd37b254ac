#include "coughlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "coughlab/log.hpp"
#include "coughlab/parallel.hpp"
#include "coughlab/util.hpp"

namespace coughlab::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_labels(const std::vector<PredictionRecord>& records, Index num_classes) {
    for (const auto& r : records) {
        if (r.true_label < 0 || r.true_label >= num_classes ||
            r.predicted_label < 0 || r.predicted_label >= num_classes)
            throw DataError("record '" + r.source_id + "' carries a label outside [0, " +
                            std::to_string(num_classes) + ")");
    }
}

ConfusionMatrix collapse_to_screen(const std::vector<PredictionRecord>& records) {
    // healthy (class 0) vs any pathology
    std::vector<PredictionRecord> collapsed = records;
    for (auto& r : collapsed) {
        r.true_label = r.true_label == 0 ? 0 : 1;
        r.predicted_label = r.predicted_label == 0 ? 0 : 1;
    }
    return confusion(collapsed, 2);
}

double collapsed_accuracy(const std::vector<PredictionRecord>& records) {
    Index correct = 0;
    for (const auto& r : records)
        if ((r.true_label == 0) == (r.predicted_label == 0)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

container::Json confusion_to_json(const ConfusionMatrix& cm,
                                  const std::vector<std::string>& names) {
    container::Json counts = container::Json::array();
    container::Json percents = container::Json::array();
    for (Index i = 0; i < cm.counts.rows(); ++i) {
        container::Json crow = container::Json::array();
        container::Json prow = container::Json::array();
        for (Index j = 0; j < cm.counts.cols(); ++j) {
            crow.push_back(cm.counts(i, j));
            prow.push_back(cm.row_percentages(i, j));
        }
        counts.push_back(std::move(crow));
        percents.push_back(std::move(prow));
    }
    return container::Json{{"classes", names}, {"counts", counts}, {"row_percentages", percents}};
}

container::Json roc_to_json(const RocCurve& curve) {
    container::Json points = container::Json::array();
    for (const auto& p : curve.points)
        points.push_back(container::Json{{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}});
    return container::Json{
        {"aroc", curve.aroc}, {"optimal_threshold", curve.optimal_threshold}, {"points", points}};
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         const std::vector<std::string>& names) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create confusion file: " + path.string());
    os << "true_label,predicted_label,count,row_percent\n";
    for (Index i = 0; i < cm.counts.rows(); ++i)
        for (Index j = 0; j < cm.counts.cols(); ++j)
            os << util::csv_quote(names[static_cast<std::size_t>(i)]) << ','
               << util::csv_quote(names[static_cast<std::size_t>(j)]) << ',' << cm.counts(i, j)
               << ',' << util::format_double(cm.row_percentages(i, j)) << "\n";
    if (!os) throw DataError("failed writing confusion file: " + path.string());
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create roc file: " + path.string());
    os << "fpr,tpr,threshold\n";
    for (const auto& p : curve.points)
        os << util::format_double(p.fpr) << ',' << util::format_double(p.tpr) << ','
           << util::format_double(p.threshold) << "\n";
    if (!os) throw DataError("failed writing roc file: " + path.string());
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& records,
                           const std::vector<std::string>& names) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create predictions file: " + path.string());
    os << "source_id,subject_id,true_label,predicted_label";
    for (const auto& name : names) os << ",score_" << name;
    os << "\n";
    for (const auto& r : records) {
        os << util::csv_quote(r.source_id) << ',' << util::csv_quote(r.subject_id) << ','
           << names[static_cast<std::size_t>(r.true_label)] << ','
           << names[static_cast<std::size_t>(r.predicted_label)];
        for (Index k = 0; k < r.class_scores.size(); ++k)
            os << ',' << util::format_double(r.class_scores[k]);
        os << "\n";
    }
    if (!os) throw DataError("failed writing predictions file: " + path.string());
}

}  // namespace

double accuracy(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw DataError("accuracy of an empty record set is undefined");
    Index correct = 0;
    for (const auto& r : records)
        if (r.true_label == r.predicted_label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records, Index num_classes) {
    if (num_classes < 2) throw ConfigError("confusion needs at least 2 classes");
    check_labels(records, num_classes);

    ConfusionMatrix cm;
    cm.counts = CountMatrix::Zero(num_classes, num_classes);
    for (const auto& r : records) ++cm.counts(r.true_label, r.predicted_label);

    cm.row_percentages = Matrix::Zero(num_classes, num_classes);
    for (Index i = 0; i < num_classes; ++i) {
        const auto row_total = cm.counts.row(i).sum();
        if (row_total == 0) continue;
        for (Index j = 0; j < num_classes; ++j)
            cm.row_percentages(i, j) =
                100.0 * static_cast<double>(cm.counts(i, j)) / static_cast<double>(row_total);
    }
    return cm;
}

RocCurve roc(const std::vector<PredictionRecord>& records, Index positive_class) {
    if (records.empty()) throw DataError("roc of an empty record set is undefined");
    Index n_pos = 0, n_neg = 0;
    for (const auto& r : records) {
        if (positive_class < 0 || positive_class >= r.class_scores.size())
            throw DataError("positive class outside the score vector");
        (r.true_label == positive_class ? n_pos : n_neg) += 1;
    }
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc is degenerate: both positive and negative examples are required");

    std::set<double, std::greater<double>> distinct;
    for (const auto& r : records) distinct.insert(r.class_scores[positive_class]);

    std::vector<double> thresholds;
    thresholds.push_back(kInf);
    thresholds.insert(thresholds.end(), distinct.begin(), distinct.end());
    thresholds.push_back(-kInf);

    RocCurve curve;
    for (const double th : thresholds) {
        Index tp = 0, fp = 0;
        for (const auto& r : records) {
            if (!(r.class_scores[positive_class] >= th)) continue;
            (r.true_label == positive_class ? tp : fp) += 1;
        }
        RocPoint point;
        point.threshold = th;
        point.tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        point.fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        curve.points.push_back(point);
    }

    curve.aroc = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        curve.aroc += (b.fpr - a.fpr) * (b.tpr + a.tpr) / 2.0;
    }

    double best_dist = kInf;
    for (const auto& p : curve.points) {
        const double dist = p.fpr * p.fpr + (1.0 - p.tpr) * (1.0 - p.tpr);
        if (dist < best_dist) {
            best_dist = dist;
            curve.optimal_threshold = p.threshold;
        }
    }
    return curve;
}

std::vector<PredictionRecord> aggregate_subject(const std::vector<PredictionRecord>& records,
                                                Index num_classes) {
    check_labels(records, num_classes);
    std::vector<std::string> subject_order;
    std::map<std::string, std::vector<const PredictionRecord*>> by_subject;
    for (const auto& r : records) {
        auto [it, inserted] = by_subject.try_emplace(r.subject_id);
        if (inserted) subject_order.push_back(r.subject_id);
        it->second.push_back(&r);
    }

    std::vector<PredictionRecord> subjects;
    for (const auto& id : subject_order) {
        const auto& coughs = by_subject.at(id);
        PredictionRecord subject;
        subject.source_id = id;
        subject.subject_id = id;
        subject.true_label = coughs.front()->true_label;
        for (const auto* c : coughs)
            if (c->true_label != subject.true_label)
                throw DataError("subject '" + id + "' has records with conflicting true labels");

        std::vector<Index> votes(static_cast<std::size_t>(num_classes), 0);
        subject.class_scores = Vector::Zero(num_classes);
        for (const auto* c : coughs) {
            ++votes[static_cast<std::size_t>(c->predicted_label)];
            if (c->class_scores.size() != num_classes)
                throw ShapeError("subject '" + id + "' has a score vector of the wrong length");
            subject.class_scores += c->class_scores;
        }
        subject.class_scores /= static_cast<double>(coughs.size());

        const Index top_votes = *std::max_element(votes.begin(), votes.end());
        std::vector<Index> tied;
        for (Index k = 0; k < num_classes; ++k)
            if (votes[static_cast<std::size_t>(k)] == top_votes) tied.push_back(k);

        if (tied.size() == 1) {
            subject.predicted_label = tied.front();
        } else if (num_classes == 2) {
            // a screening tie resolves toward the pathological class
            subject.predicted_label = 1;
        } else {
            Index best = tied.front();
            for (const Index k : tied)
                if (subject.class_scores[k] > subject.class_scores[best]) best = k;
            subject.predicted_label = best;
        }
        subjects.push_back(std::move(subject));
    }
    return subjects;
}

EvalReport evaluate(const net::Checkpoint& checkpoint,
                    const std::vector<dataset::ManifestEntry>& entries, dataset::Task task,
                    const EvaluateOptions& opts) {
    const auto class_names = dataset::task_class_names(task);
    if (static_cast<Index>(class_names.size()) != checkpoint.config.num_classes)
        throw ConfigError("task " + dataset::to_string(task) + " has " +
                          std::to_string(class_names.size()) + " classes but the checkpoint was " +
                          "trained with " + std::to_string(checkpoint.config.num_classes));

    const auto examples = dataset::apply_task(entries, task);

    std::vector<PredictionRecord> records(examples.size());
    std::vector<std::string> failures(examples.size());
    parallel_for(examples.size(), static_cast<int>(opts.jobs), [&](std::size_t i) {
        const auto& ex = examples[i];
        try {
            const auto features = features::extract_from_file(ex.entry.clip_path, opts.pipeline,
                                                              ex.entry.clip_path.generic_string());
            const Vector probs =
                net::forward(checkpoint.params, checkpoint.config, features, net::Mode::infer);
            auto& rec = records[i];
            rec.source_id = ex.entry.clip_path.generic_string();
            rec.subject_id = ex.entry.subject_id;
            rec.true_label = ex.class_index;
            rec.predicted_label = net::argmax(probs);
            rec.class_scores = probs;
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    EvalReport report;
    report.task = dataset::to_string(task);
    report.side = opts.side;
    report.class_names = class_names;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!failures[i].empty()) {
            if (opts.strict) throw DataError(failures[i]);
            log::warn("skipping '" + examples[i].entry.clip_path.generic_string() +
                      "': " + failures[i]);
            ++report.n_failures;
        } else {
            report.cough_records.push_back(std::move(records[i]));
        }
    }
    if (report.cough_records.empty())
        throw DataError("evaluation produced no usable records");

    const Index k = checkpoint.config.num_classes;
    report.subject_records = aggregate_subject(report.cough_records, k);
    report.n_coughs = static_cast<Index>(report.cough_records.size());
    report.n_subjects = static_cast<Index>(report.subject_records.size());
    report.cough_accuracy = accuracy(report.cough_records);
    report.subject_accuracy = accuracy(report.subject_records);
    report.cough_confusion = confusion(report.cough_records, k);
    report.subject_confusion = confusion(report.subject_records, k);

    if (k == 2) {
        report.has_roc = true;
        report.cough_roc = roc(report.cough_records, 1);
        report.subject_roc = roc(report.subject_records, 1);
    }
    if (task == dataset::Task::four_class) {
        report.has_collapsed = true;
        report.collapsed_cough_accuracy = collapsed_accuracy(report.cough_records);
        report.collapsed_subject_accuracy = collapsed_accuracy(report.subject_records);
        report.collapsed_cough_confusion = collapse_to_screen(report.cough_records);
        report.collapsed_subject_confusion = collapse_to_screen(report.subject_records);
    }
    return report;
}

container::Json report_to_json(const EvalReport& report) {
    container::Json j = container::Json::object();
    j["task"] = report.task;
    j["side"] = report.side;
    j["classes"] = report.class_names;
    j["n_coughs"] = report.n_coughs;
    j["n_subjects"] = report.n_subjects;
    j["n_failures"] = report.n_failures;
    j["cough_accuracy"] = report.cough_accuracy;
    j["subject_accuracy"] = report.subject_accuracy;
    j["cough_confusion"] = confusion_to_json(report.cough_confusion, report.class_names);
    j["subject_confusion"] = confusion_to_json(report.subject_confusion, report.class_names);
    if (report.has_roc) {
        j["aroc_cough"] = report.cough_roc.aroc;
        j["aroc_subject"] = report.subject_roc.aroc;
        j["cough_roc"] = roc_to_json(report.cough_roc);
        j["subject_roc"] = roc_to_json(report.subject_roc);
    }
    if (report.has_collapsed) {
        const std::vector<std::string> screen_names{"healthy", "pathological"};
        j["collapsed_cough_accuracy"] = report.collapsed_cough_accuracy;
        j["collapsed_subject_accuracy"] = report.collapsed_subject_accuracy;
        j["collapsed_cough_confusion"] =
            confusion_to_json(report.collapsed_cough_confusion, screen_names);
        j["collapsed_subject_confusion"] =
            confusion_to_json(report.collapsed_subject_confusion, screen_names);
    }
    return j;
}

void write_report(const std::filesystem::path& out_dir, const EvalReport& report) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir / "report.json");
        if (!os) throw DataError("cannot create report.json in " + out_dir.string());
        os << report_to_json(report).dump(2) << "\n";
    }
    write_confusion_csv(out_dir / "cough_confusion.csv", report.cough_confusion,
                        report.class_names);
    write_confusion_csv(out_dir / "subject_confusion.csv", report.subject_confusion,
                        report.class_names);
    write_predictions_csv(out_dir / "cough_predictions.csv", report.cough_records,
                          report.class_names);
    write_predictions_csv(out_dir / "subject_predictions.csv", report.subject_records,
                          report.class_names);
    if (report.has_roc) {
        write_roc_csv(out_dir / "cough_roc.csv", report.cough_roc);
        write_roc_csv(out_dir / "subject_roc.csv", report.subject_roc);
    }
    if (report.has_collapsed) {
        const std::vector<std::string> screen_names{"healthy", "pathological"};
        write_confusion_csv(out_dir / "collapsed_cough_confusion.csv",
                            report.collapsed_cough_confusion, screen_names);
        write_confusion_csv(out_dir / "collapsed_subject_confusion.csv",
                            report.collapsed_subject_confusion, screen_names);
    }
}

}  // namespace coughlab::eval
