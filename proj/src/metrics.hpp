#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labels.hpp"

namespace lexchain {

// Per-task metrics in percent. Macro averages run over the labels that
// occur in the gold annotations of the evaluated split; a label that never
// occurs contributes no 0/0 term.
struct TaskMetrics {
    double accuracy = 0.0; // exact-set-match for multi-label, correctness for classes
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    long n_defendants = 0;

    struct LabelCounts {
        long tp = 0, fp = 0, fn = 0;
        double precision = 0.0, recall = 0.0, f1 = 0.0;
    };
    std::map<int, LabelCounts> labels; // keyed by label id, gold labels only
};

// Multi-label task (articles, charges, circumstances, relationship-as-set):
// per-defendant predicted and gold id sets, aligned by index.
TaskMetrics compute_set_metrics(const std::vector<std::vector<int>> &predictions,
                                const std::vector<std::vector<int>> &golds);

// Multi-class task (term of penalty). A missing prediction (malformed
// decode) scores as wrong everywhere.
TaskMetrics compute_class_metrics(const std::vector<std::optional<int>> &predictions,
                                  const std::vector<int> &golds);

// The five tasks of one evaluation run.
struct MetricReport {
    std::map<std::string, TaskMetrics> tasks;

    // Mean macro-F1 over the three judgment tasks; the model-selection and
    // headline comparison number.
    double mean_judgment_f1() const;

    std::string to_text() const;
    std::string to_json() const;
    static MetricReport from_json_file(const std::string &path);

    static const std::vector<std::string> &task_order();
};

} // namespace lexchain
