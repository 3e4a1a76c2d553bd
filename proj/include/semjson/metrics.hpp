#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"

namespace semjson {

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;  // reported per-class accuracy = recall
    std::size_t support = 0;
    std::size_t predicted = 0;
    bool multi_node = false;
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

struct GroupMetrics {
    std::string name;
    std::vector<std::string> classes;
    double f1 = 0.0;
    double accuracy = 0.0;
};

struct MetricsReport {
    std::vector<std::vector<std::size_t>> confusion;  // rows = truth, cols = prediction
    std::vector<ClassMetrics> per_class;
    AverageMetrics macro;     // over classes that occur in truth or prediction
    AverageMetrics weighted;  // support-weighted
    double overall_accuracy = 0.0;
    GroupMetrics single_node{"Single-Node", {}, 0.0, 0.0};
    GroupMetrics multi_node{"Multi-Node", {}, 0.0, 0.0};
    std::vector<std::size_t> sample_indices;

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : confusion)
            for (auto v : row) t += v;
        return t;
    }
};

inline double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Builds the report from a confusion matrix. `class_multi_node[c]` assigns a
/// class to the multi-node group.
inline MetricsReport metrics_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                            const std::vector<std::string>& class_names,
                                            const std::vector<bool>& class_multi_node = {}) {
    const std::size_t c = confusion.size();
    if (class_names.size() != c) throw ContractViolation("metrics: class name count differs from confusion size");
    for (const auto& row : confusion)
        if (row.size() != c) throw ContractViolation("metrics: confusion matrix must be square");
    MetricsReport r;
    r.confusion = confusion;
    std::size_t total = 0, correct = 0;
    std::vector<std::size_t> col_sums(c, 0);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            total += confusion[i][j];
            col_sums[j] += confusion[i][j];
            if (i == j) correct += confusion[i][j];
        }
    std::size_t active = 0;
    for (std::size_t k = 0; k < c; ++k) {
        ClassMetrics m;
        m.name = class_names[k];
        const std::size_t tp = confusion[k][k];
        for (auto v : confusion[k]) m.support += v;
        m.predicted = col_sums[k];
        m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
        m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
        m.f1 = f1_score(m.precision, m.recall);
        m.accuracy = m.recall;
        m.multi_node = k < class_multi_node.size() && class_multi_node[k];
        if (m.support > 0 || m.predicted > 0) {
            ++active;
            r.macro.precision += m.precision;
            r.macro.recall += m.recall;
            r.macro.f1 += m.f1;
            r.macro.accuracy += m.accuracy;
        }
        if (total > 0) {
            const double w = static_cast<double>(m.support) / static_cast<double>(total);
            r.weighted.precision += w * m.precision;
            r.weighted.f1 += w * m.f1;
        }
        r.per_class.push_back(std::move(m));
    }
    if (active > 0) {
        const double a = static_cast<double>(active);
        r.macro.precision /= a;
        r.macro.recall /= a;
        r.macro.f1 /= a;
        r.macro.accuracy /= a;
    }
    r.overall_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    // sum_k support_k * (tp_k / support_k) / total collapses to correct / total
    r.weighted.recall = r.overall_accuracy;
    r.weighted.accuracy = r.overall_accuracy;

    for (auto* g : {&r.single_node, &r.multi_node}) {
        const bool want_multi = g == &r.multi_node;
        std::size_t n = 0;
        for (const auto& m : r.per_class) {
            if (m.support == 0 || m.multi_node != want_multi) continue;
            g->classes.push_back(m.name);
            g->f1 += m.f1;
            g->accuracy += m.accuracy;
            ++n;
        }
        if (n) {
            g->f1 /= static_cast<double>(n);
            g->accuracy /= static_cast<double>(n);
        }
    }
    return r;
}

/// Report for argmax predictions. `multi_node[i]` tells whether sample i's graph
/// has more than one node; a class joins the multi-node group when most of its
/// evaluated samples do.
inline MetricsReport metrics_from_predictions(const std::vector<std::size_t>& truth,
                                              const std::vector<std::size_t>& predicted,
                                              const std::vector<std::string>& class_names,
                                              const std::vector<bool>& multi_node,
                                              std::vector<std::size_t> sample_indices) {
    if (truth.size() != predicted.size() || truth.size() != multi_node.size())
        throw ContractViolation("metrics: truth/prediction length mismatch");
    const std::size_t c = class_names.size();
    std::vector<std::vector<std::size_t>> confusion(c, std::vector<std::size_t>(c, 0));
    std::vector<std::size_t> multi(c, 0), seen(c, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= c || predicted[i] >= c) throw ContractViolation("metrics: class index out of range");
        ++confusion[truth[i]][predicted[i]];
        ++seen[truth[i]];
        multi[truth[i]] += multi_node[i];
    }
    std::vector<bool> class_multi(c);
    for (std::size_t k = 0; k < c; ++k) class_multi[k] = seen[k] > 0 && 2 * multi[k] >= seen[k];
    auto r = metrics_from_confusion(confusion, class_names, class_multi);
    r.sample_indices = std::move(sample_indices);
    return r;
}

inline nlohmann::json to_json(const AverageMetrics& a) {
    return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}, {"accuracy", a.accuracy}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& m : r.per_class)
        per_class.push_back({{"label", m.name},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"accuracy", m.accuracy},
                             {"support", m.support},
                             {"group", m.multi_node ? "Multi-Node" : "Single-Node"}});
    nlohmann::json groups = nlohmann::json::array();
    for (const auto* g : {&r.single_node, &r.multi_node})
        groups.push_back({{"name", g->name}, {"classes", g->classes}, {"f1", g->f1}, {"accuracy", g->accuracy}});
    return {{"format_version", 1},
            {"confusion", r.confusion},
            {"per_class", per_class},
            {"macro", to_json(r.macro)},
            {"weighted", to_json(r.weighted)},
            {"overall_accuracy", r.overall_accuracy},
            {"groups", groups},
            {"n_samples", r.total()},
            {"sample_indices", r.sample_indices}};
}

struct ComparisonRow {
    std::string label;
    double baseline_f1 = 0, baseline_accuracy = 0;
    double proposed_f1 = 0, proposed_accuracy = 0;
    double delta_f1() const { return proposed_f1 - baseline_f1; }
    double delta_accuracy() const { return proposed_accuracy - baseline_accuracy; }
};

struct ComparisonTable {
    std::vector<ComparisonRow> single_node;
    std::vector<ComparisonRow> multi_node;
    ComparisonRow average{"Average"};
};

/// Side-by-side per-class table, baseline (single-column MLP) vs proposed (GCN).
inline ComparisonTable compare_models(const MetricsReport& proposed, const MetricsReport& baseline) {
    if (proposed.sample_indices != baseline.sample_indices)
        throw ContractViolation("compare_models: reports cover different test samples");
    if (proposed.per_class.size() != baseline.per_class.size())
        throw ContractViolation("compare_models: reports have different class sets");
    ComparisonTable t;
    for (std::size_t k = 0; k < proposed.per_class.size(); ++k) {
        const auto& p = proposed.per_class[k];
        const auto& b = baseline.per_class[k];
        if (p.name != b.name) throw ContractViolation("compare_models: class order differs");
        if (p.support == 0) continue;
        ComparisonRow row{p.name, b.f1, b.accuracy, p.f1, p.accuracy};
        (p.multi_node ? t.multi_node : t.single_node).push_back(row);
    }
    t.average = {"Average", baseline.macro.f1, baseline.macro.accuracy, proposed.macro.f1, proposed.macro.accuracy};
    return t;
}

inline nlohmann::json to_json(const ComparisonRow& r) {
    return {{"label", r.label},
            {"baseline", {{"f1", r.baseline_f1}, {"accuracy", r.baseline_accuracy}}},
            {"proposed", {{"f1", r.proposed_f1}, {"accuracy", r.proposed_accuracy}}},
            {"delta", {{"f1", r.delta_f1()}, {"accuracy", r.delta_accuracy()}}}};
}

inline nlohmann::json to_json(const ComparisonTable& t) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [name, rows] : {std::pair{"Single-Node", &t.single_node}, std::pair{"Multi-Node", &t.multi_node}}) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& r : *rows) jr.push_back(to_json(r));
        groups.push_back({{"name", name}, {"rows", jr}});
    }
    return {{"format_version", 1},
            {"baseline_model", "single-column MLP"},
            {"proposed_model", "GCN"},
            {"groups", groups},
            {"average", to_json(t.average)}};
}

/// Plain-text rendering in the grouped layout.
inline std::string render_comparison(const ComparisonTable& t) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-24s %9s %9s %9s %9s\n", "", "Label", "MLP F1", "MLP Acc", "GCN F1",
                  "GCN Acc");
    out += line;
    auto emit = [&](const char* group, const std::vector<ComparisonRow>& rows) {
        bool first = true;
        for (const auto& r : rows) {
            std::snprintf(line, sizeof line, "%-12s %-24s %9.2f %9.2f %9.2f %9.2f\n", first ? group : "",
                          r.label.c_str(), r.baseline_f1, r.baseline_accuracy, r.proposed_f1, r.proposed_accuracy);
            out += line;
            first = false;
        }
    };
    emit("Single-Node", t.single_node);
    emit("Multi-Node", t.multi_node);
    std::snprintf(line, sizeof line, "%-12s %-24s %9.2f %9.2f %9.2f %9.2f\n", "Average", "", t.average.baseline_f1,
                  t.average.baseline_accuracy, t.average.proposed_f1, t.average.proposed_accuracy);
    out += line;
    return out;
}

}  // namespace semjson
