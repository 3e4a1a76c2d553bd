#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"
#include "semjson/features.hpp"
#include "semjson/json_ingest.hpp"
#include "semjson/matrix.hpp"

namespace semjson {

struct GraphMeta {
    std::int64_t document_id = 0;
    std::string path;
};

/// One key-value pair as a rooted tree. Row 0 of `node_features` is the root.
struct GraphSample {
    Matrix<double> node_features;                           // N x 1587
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // (parent, child), local indices
    std::string label_name;
    std::vector<float> label_onehot;                         // filled by encode_labels
    int label_index = -1;
    GraphMeta meta;

    std::size_t node_count() const noexcept { return node_features.rows(); }
    bool multi_node() const noexcept { return node_count() > 1; }

    /// Symmetric 0/1 adjacency with zero diagonal.
    Matrix<double> adjacency() const {
        const std::size_t n = node_count();
        Matrix<double> a(n, n, 0.0);
        for (auto [p, c] : edges) {
            a(p, c) = 1.0;
            a(c, p) = 1.0;
        }
        return a;
    }
};

/// One graph per record of a single document. `features[i]` belongs to
/// `records[i]`; a null entry is a missing vector.
inline std::vector<GraphSample> build_graphs(const std::vector<PathRecord>& records,
                                             std::span<const FeatureVector* const> features) {
    if (features.size() != records.size()) throw BuildError("build_graphs: one feature vector per record required");
    std::unordered_map<std::string, std::size_t> by_path;
    for (std::size_t i = 0; i < records.size(); ++i) by_path.emplace(records[i].path.str(), i);

    // nearest ancestor that is itself a record
    std::vector<std::vector<std::size_t>> children(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        JsonPath p = records[i].path.parent();
        while (!p.empty()) {
            if (auto it = by_path.find(p.str()); it != by_path.end()) {
                children[it->second].push_back(i);
                break;
            }
            p = p.parent();
        }
    }

    std::vector<GraphSample> out;
    out.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        std::vector<std::size_t> nodes;
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        // pre-order; trees are shallow enough for recursion
        auto walk = [&](auto&& self, std::size_t rec, std::size_t parent_local) -> void {
            std::size_t local = nodes.size();
            nodes.push_back(rec);
            if (parent_local != SIZE_MAX) edges.emplace_back(parent_local, local);
            for (std::size_t c : children[rec]) self(self, c, local);
        };
        walk(walk, r, SIZE_MAX);

        GraphSample g;
        g.node_features = Matrix<double>(nodes.size(), kFeatureDim);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const FeatureVector* f = features[nodes[k]];
            if (f == nullptr) throw BuildError("missing feature vector for " + records[nodes[k]].path.str());
            std::copy(f->values().begin(), f->values().end(), g.node_features.row(k).begin());
        }
        g.edges = std::move(edges);
        g.label_name = records[r].label;
        g.meta = {records[r].document_id, records[r].path.str()};
        out.push_back(std::move(g));
    }
    return out;
}

inline std::vector<GraphSample> build_graphs(const std::vector<PathRecord>& records,
                                             const std::vector<FeatureVector>& features) {
    std::vector<const FeatureVector*> ptrs;
    ptrs.reserve(features.size());
    for (const auto& f : features) ptrs.push_back(&f);
    return build_graphs(records, ptrs);
}

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
inline Matrix<double> normalize_adjacency(const Matrix<double>& a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ContractViolation("normalize_adjacency: matrix is not square");
    for (std::size_t i = 0; i < n; ++i) {
        if (a(i, i) != 0.0) throw ContractViolation("normalize_adjacency: diagonal must be zero");
        for (std::size_t j = i + 1; j < n; ++j)
            if (a(i, j) != a(j, i)) throw ContractViolation("normalize_adjacency: matrix is not symmetric");
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 1.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        inv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    Matrix<double> out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = (i == j ? 1.0 : a(i, j));
            out(i, j) = v == 0.0 ? 0.0 : v * inv_sqrt[i] * inv_sqrt[j];
        }
    return out;
}

/// Class names in lexicographic order; index = position.
class LabelEncoder {
public:
    LabelEncoder() = default;
    explicit LabelEncoder(std::vector<std::string> names) : names_(std::move(names)) {
        std::sort(names_.begin(), names_.end());
        names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
        for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], static_cast<int>(i));
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    int index(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

private:
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

/// Sorts the label set and writes each sample's index and one-hot vector.
inline LabelEncoder encode_labels(std::vector<GraphSample>& samples) {
    std::vector<std::string> names;
    names.reserve(samples.size());
    for (const auto& s : samples) names.push_back(s.label_name);
    LabelEncoder enc(std::move(names));
    for (auto& s : samples) {
        s.label_index = enc.index(s.label_name);
        s.label_onehot.assign(enc.size(), 0.0f);
        s.label_onehot[static_cast<std::size_t>(s.label_index)] = 1.0f;
    }
    return enc;
}

/// Applies an existing class list; throws if a sample's label is unknown.
inline void apply_labels(std::vector<GraphSample>& samples, const LabelEncoder& enc) {
    for (auto& s : samples) {
        s.label_index = enc.index(s.label_name);
        if (s.label_index < 0) throw EvaluationError("label '" + s.label_name + "' is not in the model's class set");
        s.label_onehot.assign(enc.size(), 0.0f);
        s.label_onehot[static_cast<std::size_t>(s.label_index)] = 1.0f;
    }
}

inline nlohmann::json to_json(const GraphSample& g) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [p, c] : g.edges) edges.push_back({p, c});
    nlohmann::json feats = nlohmann::json::array();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        auto row = g.node_features.row(i);
        feats.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"format_version", 1},
            {"label", g.label_name},
            {"n_nodes", g.node_count()},
            {"edges", edges},
            {"node_features", feats},
            {"meta", {{"doc_id", g.meta.document_id}, {"path", g.meta.path}}}};
}

inline GraphSample graph_from_json(const nlohmann::json& j) {
    GraphSample g;
    g.label_name = j.at("label").get<std::string>();
    std::size_t n = j.at("n_nodes").get<std::size_t>();
    const auto& feats = j.at("node_features");
    if (feats.size() != n) throw LoadError("graph dump: node_features has " + std::to_string(feats.size()) + " rows, expected " + std::to_string(n));
    g.node_features = Matrix<double>(n, kFeatureDim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = feats[i];
        if (row.size() != kFeatureDim) throw LoadError("graph dump: node feature row has wrong length");
        for (std::size_t k = 0; k < kFeatureDim; ++k) g.node_features(i, k) = row[k].get<double>();
    }
    for (const auto& e : j.at("edges")) {
        auto p = e.at(0).get<std::size_t>();
        auto c = e.at(1).get<std::size_t>();
        if (p >= n || c >= n) throw LoadError("graph dump: edge index out of range");
        g.edges.emplace_back(p, c);
    }
    g.meta.document_id = j.at("meta").at("doc_id").get<std::int64_t>();
    g.meta.path = j.at("meta").at("path").get<std::string>();
    return g;
}

}  // namespace semjson
