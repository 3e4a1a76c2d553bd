#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "semjson/common.hpp"
#include "semjson/features.hpp"
#include "semjson/gcn.hpp"
#include "semjson/graph.hpp"
#include "semjson/metrics.hpp"
#include "semjson/mlp.hpp"
#include "semjson/nn.hpp"
#include "semjson/random.hpp"

namespace semjson {

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Per-class 7:3:3 allocation (fractions 7/13, 3/13, 3/13) by largest remainder,
/// so each part is within one sample of its exact share.
inline DatasetSplit stratified_split(const std::vector<std::string>& labels, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [name, idx] : by_class)
        if (idx.size() < 2) throw SplitError("class '" + name + "' has fewer than 2 samples");

    constexpr std::array<double, 3> kShares = {7.0 / 13.0, 3.0 / 13.0, 3.0 / 13.0};
    Rng rng(mix_seed(seed ^ 0x73706c6974ULL));
    DatasetSplit split;
    for (auto& [name, idx] : by_class) {
        rng.shuffle(idx);
        const double n = static_cast<double>(idx.size());
        std::array<std::size_t, 3> count{};
        std::array<double, 3> frac{};
        std::size_t assigned = 0;
        for (int p = 0; p < 3; ++p) {
            double exact = n * kShares[p];
            count[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            frac[p] = exact - static_cast<double>(count[p]);
            assigned += count[p];
        }
        while (assigned < idx.size()) {
            int best = 0;
            for (int p = 1; p < 3; ++p)
                if (frac[p] > frac[best] + 1e-12) best = p;
            ++count[best];
            frac[best] = -1.0;
            ++assigned;
        }
        std::size_t k = 0;
        for (std::size_t i = 0; i < count[0]; ++i) split.train.push_back(idx[k++]);
        for (std::size_t i = 0; i < count[1]; ++i) split.validation.push_back(idx[k++]);
        for (std::size_t i = 0; i < count[2]; ++i) split.test.push_back(idx[k++]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline DatasetSplit stratified_split(const std::vector<GraphSample>& samples, std::uint64_t seed) {
    std::vector<std::string> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label_name);
    return stratified_split(labels, seed);
}

struct TrainConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double dropout_rate = 0.5;
    int epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::size_t workers = 0;  // 0 = SEMJSON_WORKERS / hardware

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0, 1)");
        if (epochs < 0) throw ConfigError("epochs must be non-negative");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
    }
    nn::AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
    std::size_t resolved_workers() const { return workers ? workers : worker_count(); }
};

/// Scaled, float-precision view of a graph ready for the kernels.
struct PreparedGraph {
    Matrix<float> adjacency;  // normalized
    Matrix<float> features;   // scaled node features, row 0 = root
    std::size_t label = 0;
    bool multi_node = false;
};

inline PreparedGraph prepare_graph(const GraphSample& g, const Scaler& scaler) {
    if (g.label_index < 0) throw ContractViolation("prepare_graph: labels not encoded");
    PreparedGraph p;
    p.adjacency = normalize_adjacency(g.adjacency()).cast<float>();
    p.features = Matrix<float>(g.node_count(), kFeatureDim);
    for (std::size_t i = 0; i < g.node_count(); ++i)
        for (std::size_t k = 0; k < kFeatureDim; ++k)
            p.features(i, k) = static_cast<float>(scaler.apply(k, g.node_features(i, k)));
    p.label = static_cast<std::size_t>(g.label_index);
    p.multi_node = g.multi_node();
    return p;
}

inline std::vector<PreparedGraph> prepare_graphs(const std::vector<GraphSample>& samples, const Scaler& scaler) {
    std::vector<PreparedGraph> out(samples.size());
    parallel_chunks(samples.size(), worker_count(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = prepare_graph(samples[i], scaler);
    });
    return out;
}

/// Scaler over the root rows of the training graphs.
inline Scaler fit_scaler_on_split(const std::vector<GraphSample>& samples, const std::vector<std::size_t>& train) {
    std::vector<FeatureVector> rows;
    rows.reserve(train.size());
    for (std::size_t i : train) {
        auto r = samples[i].node_features.row(0);
        rows.emplace_back(std::vector<double>(r.begin(), r.end()));
    }
    return fit_scaler(rows);
}

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double validation_macro_f1 = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& e) {
    return {{"format_version", 1},
            {"epoch", e.epoch},
            {"train_loss", e.train_loss},
            {"validation_loss", e.validation_loss},
            {"validation_macro_f1", e.validation_macro_f1}};
}

/// How the trainer runs one model type on a PreparedGraph.
struct GcnAdapter {
    using Model = GcnModel<float>;
    using Cache = GcnCache<float>;
    static Cache forward(const Model& m, const PreparedGraph& g, bool train, double rate, Rng& rng) {
        return gcn_forward(m, g.adjacency, g.features, train, rate, rng);
    }
    static void backward(const Model& m, const Cache& c, std::size_t label, nn::ThreeLayer<float>& grads, float w) {
        gcn_backward(m, c, label, grads, w);
    }
};

/// The baseline sees only the record's own feature vector (the root row).
struct MlpAdapter {
    using Model = MlpModel<float>;
    using Cache = MlpCache<float>;
    static Cache forward(const Model& m, const PreparedGraph& g, bool train, double rate, Rng& rng) {
        return mlp_forward(m, std::span<const float>(g.features.row(0)), train, rate, rng);
    }
    static void backward(const Model& m, const Cache& c, std::size_t label, nn::ThreeLayer<float>& grads, float w) {
        mlp_backward(m, c, label, grads, w);
    }
};

/// Class probabilities for `indices`, in that order (eval mode).
template <typename Adapter>
std::vector<std::vector<float>> predict_probabilities(const typename Adapter::Model& model,
                                                      const std::vector<PreparedGraph>& data,
                                                      const std::vector<std::size_t>& indices, std::size_t workers) {
    std::vector<std::vector<float>> out(indices.size());
    parallel_chunks(indices.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
        Rng unused(0);
        for (std::size_t i = b; i < e; ++i)
            out[i] = Adapter::forward(model, data[indices[i]], false, 0.0, unused).probs;
    });
    return out;
}

inline std::size_t argmax(const std::vector<float>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

template <typename Adapter>
MetricsReport evaluate_model(const typename Adapter::Model& model, const std::vector<PreparedGraph>& data,
                             const std::vector<std::size_t>& indices, const std::vector<std::string>& class_names,
                             std::size_t workers = 1) {
    if (indices.empty()) throw ContractViolation("evaluate: no samples to evaluate");
    auto probs = predict_probabilities<Adapter>(model, data, indices, workers);
    std::vector<std::size_t> truth, pred;
    std::vector<bool> multi;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        truth.push_back(data[indices[i]].label);
        pred.push_back(argmax(probs[i]));
        multi.push_back(data[indices[i]].multi_node);
    }
    return metrics_from_predictions(truth, pred, class_names, multi, indices);
}

inline MetricsReport evaluate(const GcnModel<float>& model, const std::vector<PreparedGraph>& data,
                              const std::vector<std::size_t>& indices, const std::vector<std::string>& class_names,
                              std::size_t workers = 1) {
    return evaluate_model<GcnAdapter>(model, data, indices, class_names, workers);
}

inline MetricsReport evaluate(const MlpModel<float>& model, const std::vector<PreparedGraph>& data,
                              const std::vector<std::size_t>& indices, const std::vector<std::string>& class_names,
                              std::size_t workers = 1) {
    return evaluate_model<MlpAdapter>(model, data, indices, class_names, workers);
}

template <typename Model>
struct TrainResult {
    Model model;
    std::vector<EpochRecord> history;
    int best_epoch = -1;
};

/// Mini-batch Adam on the training indices. Keeps the parameters of the epoch
/// with the best validation macro-F1 (the final ones when there is no
/// validation data). Samples of a batch are spread over workers; each worker
/// owns a gradient buffer and buffers are summed in worker order, so results
/// are reproducible for a fixed worker count.
template <typename Adapter>
TrainResult<typename Adapter::Model> train_model(typename Adapter::Model model, const std::vector<PreparedGraph>& data,
                                                 const DatasetSplit& split, const TrainConfig& cfg,
                                                 const std::vector<std::string>& class_names) {
    cfg.validate();
    TrainResult<typename Adapter::Model> result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }
    if (split.train.empty()) throw ContractViolation("train: empty training split");
    for (const auto& g : data)
        if (g.label >= model.classes()) throw ContractViolation("train: label index exceeds model classes");

    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.resolved_workers(), cfg.batch_size));
    std::vector<nn::ThreeLayer<float>> grads(workers, model.params.zeros_like());
    std::vector<double> worker_loss(workers);
    nn::AdamState<float> adam;
    const auto adam_cfg = cfg.adam();
    Rng order_rng(mix_seed(cfg.seed ^ 0x6f72646572ULL));
    double best_f1 = -1.0;
    typename Adapter::Model best = model;

    std::vector<std::size_t> order = split.train;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        int batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t count = end - start;
            const float w = 1.0f / static_cast<float>(count);
            const std::size_t used = std::min(workers, count);
            std::fill(worker_loss.begin(), worker_loss.end(), 0.0);
            for (std::size_t k = 0; k < used; ++k) grads[k].zero();
            parallel_chunks(count, workers, [&](std::size_t wk, std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) {
                    const std::size_t idx = order[start + i];
                    Rng rng(mix_seed(cfg.seed ^ mix_seed(static_cast<std::uint64_t>(epoch) << 32 | idx)));
                    auto cache = Adapter::forward(model, data[idx], true, cfg.dropout_rate, rng);
                    worker_loss[wk] += nn::cross_entropy<float>(cache.probs, data[idx].label);
                    Adapter::backward(model, cache, data[idx].label, grads[wk], w);
                }
            });
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < used; ++k) batch_loss += worker_loss[k];
            for (std::size_t k = 1; k < used; ++k) grads[0].add_scaled(grads[k], 1.0f);
            bool finite = std::isfinite(batch_loss);
            for (auto t : grads[0].tensors())
                for (float g : t) finite = finite && std::isfinite(g);
            if (!finite)
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_no),
                                    epoch, batch_no);
            nn::adam_step(model.params, grads[0], adam, adam_cfg);
            epoch_loss += batch_loss;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(order.size());
        if (!split.validation.empty()) {
            auto probs = predict_probabilities<Adapter>(model, data, split.validation, workers);
            double vl = 0.0;
            std::vector<std::size_t> truth, pred;
            std::vector<bool> multi;
            for (std::size_t i = 0; i < probs.size(); ++i) {
                const auto& g = data[split.validation[i]];
                vl += nn::cross_entropy<float>(probs[i], g.label);
                truth.push_back(g.label);
                pred.push_back(argmax(probs[i]));
                multi.push_back(g.multi_node);
            }
            rec.validation_loss = vl / static_cast<double>(probs.size());
            rec.validation_macro_f1 = metrics_from_predictions(truth, pred, class_names, multi, {}).macro.f1;
            if (rec.validation_macro_f1 > best_f1) {
                best_f1 = rec.validation_macro_f1;
                best = model;
                result.best_epoch = epoch;
            }
        } else {
            best = model;
            result.best_epoch = epoch;
        }
        result.history.push_back(rec);
    }
    result.model = std::move(best);
    return result;
}

inline TrainResult<GcnModel<float>> train(GcnModel<float> model, const std::vector<PreparedGraph>& data,
                                          const DatasetSplit& split, const TrainConfig& cfg,
                                          const std::vector<std::string>& class_names) {
    return train_model<GcnAdapter>(std::move(model), data, split, cfg, class_names);
}

/// Baseline training on per-record features with the same split; the report
/// covers the same test indices as the GCN's.
struct MlpBaselineResult {
    TrainResult<MlpModel<float>> training;
    MetricsReport test_report;
};

inline MlpBaselineResult train_mlp_baseline(const std::vector<PreparedGraph>& data, const DatasetSplit& split,
                                            const TrainConfig& cfg, const std::vector<std::string>& class_names) {
    MlpShape shape;
    shape.classes = class_names.size();
    auto model = MlpModel<float>::glorot(shape, cfg.seed ^ 0x6d6c70ULL);
    MlpBaselineResult r;
    r.training = train_model<MlpAdapter>(std::move(model), data, split, cfg, class_names);
    if (!split.test.empty())
        r.test_report = evaluate(r.training.model, data, split.test, class_names, cfg.resolved_workers());
    return r;
}

}  // namespace semjson
