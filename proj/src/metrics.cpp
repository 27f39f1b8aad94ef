#include "metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "errors.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

namespace {

void finalize(TaskMetrics &m) {
    double sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
    for (auto &[id, c] : m.labels) {
        c.precision = (c.tp + c.fp) > 0
                          ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                          : 0.0;
        c.recall = (c.tp + c.fn) > 0
                       ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                       : 0.0;
        c.f1 = (c.precision + c.recall) > 0.0
                   ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
                   : 0.0;
        c.precision *= 100.0;
        c.recall *= 100.0;
        c.f1 *= 100.0;
        sum_p += c.precision;
        sum_r += c.recall;
        sum_f1 += c.f1;
    }
    double n_labels = static_cast<double>(m.labels.size());
    if (n_labels > 0) {
        m.macro_precision = sum_p / n_labels;
        m.macro_recall = sum_r / n_labels;
        m.macro_f1 = sum_f1 / n_labels;
    }
}

} // namespace

TaskMetrics compute_set_metrics(const std::vector<std::vector<int>> &predictions,
                                const std::vector<std::vector<int>> &golds) {
    if (predictions.size() != golds.size())
        throw DataError("metrics: prediction/gold alignment mismatch (" +
                        std::to_string(predictions.size()) + " vs " +
                        std::to_string(golds.size()) + ")");
    TaskMetrics m;
    m.n_defendants = static_cast<long>(golds.size());
    // Macro runs over labels present in gold.
    for (const auto &g : golds)
        for (int id : g) m.labels.emplace(id, TaskMetrics::LabelCounts{});

    long exact = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        std::set<int> pred(predictions[i].begin(), predictions[i].end());
        std::set<int> gold(golds[i].begin(), golds[i].end());
        if (pred == gold) ++exact;
        for (int id : gold) {
            if (pred.count(id))
                ++m.labels[id].tp;
            else
                ++m.labels[id].fn;
        }
        for (int id : pred)
            if (!gold.count(id)) {
                auto it = m.labels.find(id);
                if (it != m.labels.end()) ++it->second.fp;
                // Predictions of labels outside the gold inventory still
                // break exact match but carry no macro term.
            }
    }
    m.accuracy = golds.empty() ? 0.0
                               : 100.0 * static_cast<double>(exact) /
                                     static_cast<double>(golds.size());
    finalize(m);
    return m;
}

TaskMetrics compute_class_metrics(const std::vector<std::optional<int>> &predictions,
                                  const std::vector<int> &golds) {
    if (predictions.size() != golds.size())
        throw DataError("metrics: prediction/gold alignment mismatch (" +
                        std::to_string(predictions.size()) + " vs " +
                        std::to_string(golds.size()) + ")");
    TaskMetrics m;
    m.n_defendants = static_cast<long>(golds.size());
    for (int g : golds) m.labels.emplace(g, TaskMetrics::LabelCounts{});

    long correct = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        int gold = golds[i];
        if (predictions[i] && *predictions[i] == gold) {
            ++correct;
            ++m.labels[gold].tp;
        } else {
            ++m.labels[gold].fn;
            if (predictions[i]) {
                auto it = m.labels.find(*predictions[i]);
                if (it != m.labels.end()) ++it->second.fp;
            }
        }
    }
    m.accuracy = golds.empty() ? 0.0
                               : 100.0 * static_cast<double>(correct) /
                                     static_cast<double>(golds.size());
    finalize(m);
    return m;
}

const std::vector<std::string> &MetricReport::task_order() {
    static const std::vector<std::string> order = {"articles", "charges", "penalty",
                                                   "relationship", "circumstances"};
    return order;
}

double MetricReport::mean_judgment_f1() const {
    double sum = 0.0;
    int n = 0;
    for (const char *task : {"articles", "charges", "penalty"}) {
        auto it = tasks.find(task);
        if (it != tasks.end()) {
            sum += it->second.macro_f1;
            ++n;
        }
    }
    return n > 0 ? sum / n : 0.0;
}

std::string MetricReport::to_text() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %8s %8s %8s %8s %8s\n", "task", "Acc", "MP",
                  "MR", "F1", "n");
    out += line;
    for (const auto &name : task_order()) {
        auto it = tasks.find(name);
        if (it == tasks.end()) continue;
        const TaskMetrics &m = it->second;
        std::snprintf(line, sizeof line, "%-14s %8.2f %8.2f %8.2f %8.2f %8ld\n",
                      name.c_str(), m.accuracy, m.macro_precision, m.macro_recall,
                      m.macro_f1, m.n_defendants);
        out += line;
    }
    std::snprintf(line, sizeof line, "mean judgment F1: %.2f\n", mean_judgment_f1());
    out += line;
    return out;
}

std::string MetricReport::to_json() const {
    json j;
    for (const auto &name : task_order()) {
        auto it = tasks.find(name);
        if (it == tasks.end()) continue;
        const TaskMetrics &m = it->second;
        json tj;
        tj["accuracy"] = m.accuracy;
        tj["macro_precision"] = m.macro_precision;
        tj["macro_recall"] = m.macro_recall;
        tj["macro_f1"] = m.macro_f1;
        tj["n_defendants"] = m.n_defendants;
        json labels;
        for (const auto &[id, c] : m.labels) {
            json lj;
            lj["tp"] = c.tp;
            lj["fp"] = c.fp;
            lj["fn"] = c.fn;
            lj["precision"] = c.precision;
            lj["recall"] = c.recall;
            lj["f1"] = c.f1;
            labels[std::to_string(id)] = std::move(lj);
        }
        tj["labels"] = std::move(labels);
        j[name] = std::move(tj);
    }
    j["mean_judgment_f1"] = mean_judgment_f1();
    return j.dump(2);
}

MetricReport MetricReport::from_json_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read metric report " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw DataError(path + ": bad metric report: " + e.what());
    }
    MetricReport report;
    for (const auto &name : task_order()) {
        if (!j.contains(name)) continue;
        const auto &tj = j.at(name);
        TaskMetrics m;
        m.accuracy = tj.at("accuracy").get<double>();
        m.macro_precision = tj.at("macro_precision").get<double>();
        m.macro_recall = tj.at("macro_recall").get<double>();
        m.macro_f1 = tj.at("macro_f1").get<double>();
        m.n_defendants = tj.at("n_defendants").get<long>();
        if (tj.contains("labels"))
            for (const auto &[key, lj] : tj.at("labels").items()) {
                TaskMetrics::LabelCounts c;
                c.tp = lj.at("tp").get<long>();
                c.fp = lj.at("fp").get<long>();
                c.fn = lj.at("fn").get<long>();
                c.precision = lj.at("precision").get<double>();
                c.recall = lj.at("recall").get<double>();
                c.f1 = lj.at("f1").get<double>();
                m.labels[std::stoi(key)] = c;
            }
        report.tasks[name] = std::move(m);
    }
    return report;
}

} // namespace lexchain
