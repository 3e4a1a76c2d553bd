#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "semjson/checkpoint.hpp"
#include "semjson/common.hpp"
#include "semjson/embeddings.hpp"
#include "semjson/features.hpp"
#include "semjson/graph.hpp"
#include "semjson/json_ingest.hpp"
#include "semjson/metrics.hpp"
#include "semjson/pvdbow.hpp"
#include "semjson/synth.hpp"
#include "semjson/training.hpp"

namespace semjson {

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

/// Settings shared by all stages. Values come from defaults, then a JSON
/// config file, then command-line flags.
struct PipelineConfig {
    std::string corpus;        // default: <out>/corpus.jsonl
    std::string annotations;   // default: <out>/annotations.jsonl when present
    std::string embeddings;    // word table; empty = no word embeddings
    std::string paragraph_provider = "hashing";  // hashing | pvdbow
    std::string out = "out";
    std::uint64_t seed = 1;
    TrainConfig train;
    bool baseline = true;
    int pvdbow_epochs = 40;
    std::string checkpoint;           // default: <out>/model.ckpt
    std::string baseline_checkpoint;  // default: <out>/mlp.ckpt when present
    std::string document;             // predict input
    std::size_t top_k = 3;
    SynthSpec synth;

    fs::path out_path(const std::string& name) const { return fs::path(out) / name; }
    std::string corpus_path() const { return corpus.empty() ? out_path("corpus.jsonl").string() : corpus; }
    std::string checkpoint_path() const { return checkpoint.empty() ? out_path("model.ckpt").string() : checkpoint; }

    std::string annotations_path() const {
        if (!annotations.empty()) return annotations;
        auto p = out_path("annotations.jsonl");
        return fs::exists(p) ? p.string() : std::string{};
    }
    std::string baseline_path() const {
        if (!baseline_checkpoint.empty()) return baseline_checkpoint;
        auto p = out_path("mlp.ckpt");
        return fs::exists(p) ? p.string() : std::string{};
    }

    /// Applies the keys of a JSON config object; unknown keys are rejected.
    void apply_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        try {
            for (auto it = j.begin(); it != j.end(); ++it) {
                const std::string& k = it.key();
                const auto& v = *it;
                if (k == "corpus") corpus = v.get<std::string>();
                else if (k == "annotations") annotations = v.get<std::string>();
                else if (k == "embeddings") embeddings = v.get<std::string>();
                else if (k == "paragraph_provider") paragraph_provider = v.get<std::string>();
                else if (k == "out") out = v.get<std::string>();
                else if (k == "seed") seed = v.get<std::uint64_t>();
                else if (k == "epochs") train.epochs = v.get<int>();
                else if (k == "batch_size") train.batch_size = v.get<std::size_t>();
                else if (k == "learning_rate") train.learning_rate = v.get<double>();
                else if (k == "dropout") train.dropout_rate = v.get<double>();
                else if (k == "workers") train.workers = v.get<std::size_t>();
                else if (k == "baseline") baseline = v.get<bool>();
                else if (k == "pvdbow_epochs") pvdbow_epochs = v.get<int>();
                else if (k == "checkpoint") checkpoint = v.get<std::string>();
                else if (k == "baseline_checkpoint") baseline_checkpoint = v.get<std::string>();
                else if (k == "document") document = v.get<std::string>();
                else if (k == "top_k") top_k = v.get<std::size_t>();
                else if (k == "synth") apply_synth_json(v);
                else throw ConfigError("unknown config key '" + k + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config value has the wrong type: ") + e.what());
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        try {
            apply_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
        }
    }

    void validate() const {
        if (paragraph_provider != "hashing" && paragraph_provider != "pvdbow")
            throw ConfigError("paragraph_provider must be 'hashing' or 'pvdbow'");
        if (!embeddings.empty() && !fs::exists(embeddings))
            throw ConfigError("embedding table " + embeddings + " does not exist");
        if (!annotations.empty() && !fs::exists(annotations))
            throw ConfigError("annotation file " + annotations + " does not exist");
        if (pvdbow_epochs < 0) throw ConfigError("pvdbow_epochs must be non-negative");
        if (top_k == 0) throw ConfigError("top_k must be positive");
        train.validate();
    }

    /// Training settings with the pipeline seed applied.
    TrainConfig train_config() const {
        TrainConfig t = train;
        t.seed = seed;
        return t;
    }

private:
    void apply_synth_json(const nlohmann::json& j) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k == "classes") synth.classes = it->get<std::size_t>();
            else if (k == "docs_per_class") synth.docs_per_class = it->get<std::size_t>();
            else if (k == "max_depth") synth.max_depth = it->get<int>();
            else if (k == "noise") synth.noise = it->get<double>();
            else if (k == "profile") synth.profile = parse_profile(it->get<std::string>());
            else throw ConfigError("unknown synth config key '" + k + "'");
        }
    }
};

namespace io {

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

/// Writes to a sibling temporary file and renames it into place, so a failed
/// stage never leaves a partial artifact under the final name.
inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw LoadError("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw LoadError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& rows) {
    std::string text;
    for (const auto& r : rows) text += r.dump() + "\n";
    write_text(path, text);
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(path + ": " + e.what());
    }
}

/// Parses every non-blank line; a bad line is reported with its number.
inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    auto lines = read_lines(path);
    std::vector<nlohmann::json> out(lines.size());
    std::vector<std::string> errors(lines.size());
    parallel_chunks(lines.size(), worker_count(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
            try {
                out[i] = nlohmann::json::parse(lines[i]);
            } catch (const nlohmann::json::parse_error& ex) {
                errors[i] = ex.what();
            }
        }
    });
    std::vector<nlohmann::json> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!errors[i].empty()) throw LoadError(path + ":" + std::to_string(i + 1) + ": " + errors[i]);
        if (!out[i].is_null()) rows.push_back(std::move(out[i]));
    }
    return rows;
}

}  // namespace io

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void write_stage_timing(const PipelineConfig& cfg, const std::string& stage, double seconds) {
    io::write_json(cfg.out_path("timing_" + stage + ".json"),
                   {{"format_version", kFormatVersion}, {"stage", stage}, {"seconds", seconds}});
}

/// Preprocessing stages as reported, in order, with their timing file stems.
inline const std::vector<std::pair<std::string, std::string>>& timing_stages() {
    static const std::vector<std::pair<std::string, std::string>> stages = {
        {"Key-value pair extraction", "extract"}, {"Feature extraction", "featurize"}, {"Graph processing", "graphs"}};
    return stages;
}

struct ExtractResult {
    std::vector<PathRecord> records;
    std::size_t documents = 0;
    std::vector<std::size_t> skipped_lines;  // 1-based
    std::vector<std::string> skip_reasons;
};

/// Extraction over corpus lines. Document ids are 0-based line numbers; blank
/// lines are ignored and malformed ones are skipped and reported.
inline ExtractResult extract_corpus(const std::vector<std::string>& lines, const AnnotationMap& annotations,
                                    std::size_t workers = worker_count()) {
    std::vector<std::vector<PathRecord>> per_line(lines.size());
    std::vector<std::string> errors(lines.size());
    std::vector<char> blank(lines.size(), 0);
    parallel_chunks(lines.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            if (lines[i].find_first_not_of(" \t\r") == std::string::npos) {
                blank[i] = 1;
                continue;
            }
            try {
                per_line[i] = extract_kv_pairs(parse_document(lines[i]), static_cast<std::int64_t>(i), annotations);
            } catch (const Error& ex) {
                errors[i] = ex.what();
            }
        }
    });
    ExtractResult r;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank[i]) continue;
        if (!errors[i].empty()) {
            r.skipped_lines.push_back(i + 1);
            r.skip_reasons.push_back(errors[i]);
            continue;
        }
        ++r.documents;
        for (auto& rec : per_line[i]) r.records.push_back(std::move(rec));
    }
    return r;
}

inline AnnotationMap load_annotations(const PipelineConfig& cfg) {
    const std::string p = cfg.annotations_path();
    return p.empty() ? AnnotationMap{} : AnnotationMap::load(p);
}

/// `extract`: records.jsonl + corpus_stats.json.
inline ExtractResult cmd_extract(const PipelineConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    const std::string corpus = cfg.corpus_path();
    if (!fs::exists(corpus)) throw LoadError("corpus " + corpus + " does not exist");
    auto annotations = load_annotations(cfg);
    auto result = extract_corpus(io::read_lines(corpus), annotations);

    std::vector<nlohmann::json> rows;
    rows.reserve(result.records.size());
    for (const auto& r : result.records) rows.push_back(to_json(r));
    io::write_jsonl(cfg.out_path("records.jsonl"), rows);

    auto stats = to_json(corpus_stats(result.records));
    stats["format_version"] = kFormatVersion;
    stats["n_documents"] = result.documents;
    stats["n_skipped"] = result.skipped_lines.size();
    nlohmann::json skipped = nlohmann::json::array();
    for (std::size_t i = 0; i < result.skipped_lines.size(); ++i)
        skipped.push_back({{"line", result.skipped_lines[i]}, {"error", result.skip_reasons[i]}});
    stats["skipped"] = skipped;
    io::write_json(cfg.out_path("corpus_stats.json"), stats);
    write_stage_timing(cfg, "extract", sw.seconds());
    return result;
}

inline std::vector<PathRecord> load_records(const PipelineConfig& cfg) {
    const auto p = cfg.out_path("records.jsonl").string();
    if (!fs::exists(p)) throw LoadError("record dump " + p + " does not exist; run extract first");
    std::vector<PathRecord> out;
    for (const auto& j : io::read_jsonl(p)) out.push_back(record_from_json(j));
    return out;
}

inline EmbeddingTable load_word_table(const PipelineConfig& cfg) {
    return cfg.embeddings.empty() ? EmbeddingTable(kWordDim) : load_embeddings(cfg.embeddings, kWordDim);
}

/// Paragraph provider for a stage. With pvdbow, `train_texts` non-null trains a
/// fresh model and saves it; otherwise the saved model is loaded.
inline std::unique_ptr<ParagraphProvider> make_provider(const PipelineConfig& cfg,
                                                        const std::vector<std::string>* train_texts) {
    if (cfg.paragraph_provider == "hashing") return std::make_unique<HashingProvider>();
    const auto model_path = cfg.out_path("pvdbow.bin").string();
    std::shared_ptr<PvDbowModel> model;
    if (train_texts) {
        PvDbowConfig pc;
        pc.epochs = cfg.pvdbow_epochs;
        pc.seed = cfg.seed;
        model = std::make_shared<PvDbowModel>(train_pvdbow(*train_texts, pc));
        save_pvdbow(*model, model_path);
    } else {
        if (!fs::exists(model_path)) throw ConfigError("paragraph model " + model_path + " does not exist");
        model = std::make_shared<PvDbowModel>(load_pvdbow(model_path));
    }
    return std::make_unique<PvDbowProvider>(std::move(model));
}

inline std::vector<FeatureVector> featurize_records(const std::vector<PathRecord>& records, const EmbeddingTable& table,
                                                    const ParagraphProvider& provider,
                                                    std::size_t workers = worker_count()) {
    std::vector<FeatureVector> out(records.size());
    parallel_chunks(records.size(), workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = extract_features(records[i], table, provider);
    });
    return out;
}

/// `featurize`: features.jsonl, raw (unscaled) vectors in record order.
inline std::size_t cmd_featurize(const PipelineConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    auto records = load_records(cfg);
    auto table = load_word_table(cfg);
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(join_column(r.column));
    auto provider = make_provider(cfg, &texts);
    auto features = featurize_records(records, table, *provider);

    std::vector<nlohmann::json> rows(records.size());
    parallel_chunks(records.size(), worker_count(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            rows[i] = {{"format_version", kFormatVersion},
                       {"doc_id", records[i].document_id},
                       {"path", records[i].path.str()},
                       {"features", features[i].values()}};
    });
    io::write_jsonl(cfg.out_path("features.jsonl"), rows);
    write_stage_timing(cfg, "featurize", sw.seconds());
    return rows.size();
}

/// Graphs of all documents; records of one document are contiguous.
inline std::vector<GraphSample> graphs_for_corpus(const std::vector<PathRecord>& records,
                                                  const std::vector<FeatureVector>& features) {
    if (records.size() != features.size()) throw BuildError("graphs: record and feature counts differ");
    std::vector<GraphSample> out;
    std::size_t begin = 0;
    while (begin < records.size()) {
        std::size_t end = begin;
        while (end < records.size() && records[end].document_id == records[begin].document_id) ++end;
        std::vector<PathRecord> doc(records.begin() + static_cast<std::ptrdiff_t>(begin),
                                    records.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<const FeatureVector*> fv;
        for (std::size_t i = begin; i < end; ++i) fv.push_back(&features[i]);
        auto g = build_graphs(doc, std::span<const FeatureVector* const>(fv));
        for (auto& s : g) out.push_back(std::move(s));
        begin = end;
    }
    return out;
}

inline std::vector<FeatureVector> load_features(const PipelineConfig& cfg, const std::vector<PathRecord>& records) {
    const auto p = cfg.out_path("features.jsonl").string();
    if (!fs::exists(p)) throw LoadError("feature dump " + p + " does not exist; run featurize first");
    auto rows = io::read_jsonl(p);
    if (rows.size() != records.size())
        throw LoadError("feature dump has " + std::to_string(rows.size()) + " lines for " +
                        std::to_string(records.size()) + " records");
    std::vector<FeatureVector> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].at("path").get<std::string>() != records[i].path.str() ||
            rows[i].at("doc_id").get<std::int64_t>() != records[i].document_id)
            throw LoadError("feature dump line " + std::to_string(i + 1) + " does not match its record");
        out[i] = FeatureVector(rows[i].at("features").get<std::vector<double>>());
    }
    return out;
}

/// `graphs`: graphs.jsonl, one rooted subtree per record.
inline std::size_t cmd_graphs(const PipelineConfig& cfg) {
    cfg.validate();
    Stopwatch sw;
    auto records = load_records(cfg);
    auto features = load_features(cfg, records);
    auto graphs = graphs_for_corpus(records, features);
    std::vector<nlohmann::json> rows(graphs.size());
    parallel_chunks(graphs.size(), worker_count(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) rows[i] = to_json(graphs[i]);
    });
    io::write_jsonl(cfg.out_path("graphs.jsonl"), rows);
    write_stage_timing(cfg, "graphs", sw.seconds());
    return graphs.size();
}

inline std::vector<GraphSample> load_graphs(const PipelineConfig& cfg) {
    const auto p = cfg.out_path("graphs.jsonl").string();
    if (!fs::exists(p)) throw LoadError("graph dump " + p + " does not exist; run graphs first");
    auto rows = io::read_jsonl(p);
    std::vector<GraphSample> out(rows.size());
    parallel_chunks(rows.size(), worker_count(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = graph_from_json(rows[i]);
    });
    return out;
}

inline nlohmann::json split_json(const DatasetSplit& s) {
    return {{"train", s.train.size()}, {"validation", s.validation.size()}, {"test", s.test.size()}};
}

inline std::vector<nlohmann::json> history_rows(const std::vector<EpochRecord>& h) {
    std::vector<nlohmann::json> rows;
    for (const auto& e : h) rows.push_back(to_json(e));
    return rows;
}

struct TrainOutcome {
    std::vector<std::string> classes;
    DatasetSplit split;
    TrainResult<GcnModel<float>> gcn;
    std::optional<MlpBaselineResult> mlp;
    MetricsReport gcn_test;
    double training_seconds = 0.0;
    std::uintmax_t model_size_bytes = 0;
};

/// `train`: scaler.json, model.ckpt, history.jsonl, train_summary.json and the
/// timing report; with the baseline enabled also mlp.ckpt and mlp_history.jsonl.
inline TrainOutcome cmd_train(const PipelineConfig& cfg) {
    cfg.validate();
    auto graphs = load_graphs(cfg);
    if (graphs.empty()) throw ContractViolation("train: graph dump is empty");
    Stopwatch sw;
    TrainOutcome o;
    o.classes = encode_labels(graphs).names();
    if (o.classes.size() < 2) throw ContractViolation("train: at least two labels are required");
    o.split = stratified_split(graphs, cfg.seed);
    Scaler scaler = fit_scaler_on_split(graphs, o.split.train);
    io::write_json(cfg.out_path("scaler.json"), scaler.to_json());
    auto data = prepare_graphs(graphs, scaler);

    const TrainConfig tc = cfg.train_config();
    GcnShape shape;
    shape.classes = o.classes.size();
    o.gcn = train(GcnModel<float>::glorot(shape, cfg.seed), data, o.split, tc, o.classes);
    const auto ckpt = cfg.checkpoint_path();
    save_model({o.gcn.model, o.classes, "scaler.json"}, ckpt);
    o.training_seconds = sw.seconds();
    o.model_size_bytes = fs::file_size(ckpt);
    io::write_jsonl(cfg.out_path("history.jsonl"), history_rows(o.gcn.history));

    nlohmann::json summary = {{"format_version", kFormatVersion},
                              {"classes", o.classes},
                              {"n_graphs", graphs.size()},
                              {"split", split_json(o.split)},
                              {"epochs", tc.epochs},
                              {"best_epoch", o.gcn.best_epoch},
                              {"parameter_count", o.gcn.model.parameter_count()}};
    if (!o.split.test.empty()) {
        o.gcn_test = evaluate(o.gcn.model, data, o.split.test, o.classes, tc.resolved_workers());
        summary["test"] = {{"overall_accuracy", o.gcn_test.overall_accuracy}, {"macro_f1", o.gcn_test.macro.f1}};
    }
    if (cfg.baseline) {
        o.mlp = train_mlp_baseline(data, o.split, tc, o.classes);
        save_mlp({o.mlp->training.model, o.classes, "scaler.json"}, cfg.out_path("mlp.ckpt").string());
        io::write_jsonl(cfg.out_path("mlp_history.jsonl"), history_rows(o.mlp->training.history));
        summary["baseline"] = {{"best_epoch", o.mlp->training.best_epoch},
                               {"parameter_count", o.mlp->training.model.parameter_count()}};
        if (!o.split.test.empty())
            summary["baseline"]["test"] = {{"overall_accuracy", o.mlp->test_report.overall_accuracy},
                                           {"macro_f1", o.mlp->test_report.macro.f1}};
    }
    io::write_json(cfg.out_path("train_summary.json"), summary);

    nlohmann::json stages = nlohmann::json::array();
    double preprocessing = 0.0;
    for (const auto& [label, stem] : timing_stages()) {
        const auto p = cfg.out_path("timing_" + stem + ".json");
        double secs = 0.0;
        bool measured = fs::exists(p);
        if (measured) secs = io::read_json(p.string()).at("seconds").get<double>();
        preprocessing += secs;
        stages.push_back({{"stage", label}, {"seconds", secs}, {"measured", measured}});
    }
    io::write_json(cfg.out_path("timing_report.json"),
                   {{"format_version", kFormatVersion},
                    {"preprocessing", stages},
                    {"preprocessing_total_seconds", preprocessing},
                    {"training", {{"seconds", o.training_seconds}, {"model_size_bytes", o.model_size_bytes}}},
                    {"total_seconds", preprocessing + o.training_seconds}});
    return o;
}

inline Scaler load_scaler_for(const std::string& checkpoint_path, const std::string& ref) {
    fs::path p = fs::path(checkpoint_path).parent_path() / ref;
    return Scaler::from_json(io::read_json(p.string()));
}

struct EvaluateOutcome {
    MetricsReport gcn;
    std::optional<MetricsReport> mlp;
    std::optional<ComparisonTable> comparison;
};

/// `evaluate`: metrics.json on the test split reproduced from the seed; with a
/// baseline checkpoint also mlp_metrics.json and comparison.json/.txt.
inline EvaluateOutcome cmd_evaluate(const PipelineConfig& cfg) {
    cfg.validate();
    const auto ckpt_path = cfg.checkpoint_path();
    if (!fs::exists(ckpt_path)) throw LoadError("checkpoint " + ckpt_path + " does not exist");
    auto ck = load_model(ckpt_path);
    auto graphs = load_graphs(cfg);
    if (graphs.empty()) throw EvaluationError("evaluate: graph dump is empty");
    LabelEncoder enc(ck.class_names);
    if (enc.names() != ck.class_names) throw EvaluationError("checkpoint class names are not in canonical order");
    apply_labels(graphs, enc);
    auto split = stratified_split(graphs, cfg.seed);
    if (split.test.empty()) throw EvaluationError("evaluate: empty test split");
    auto data = prepare_graphs(graphs, load_scaler_for(ckpt_path, ck.scaler_ref));
    const std::size_t workers = cfg.train_config().resolved_workers();

    EvaluateOutcome o;
    o.gcn = evaluate(ck.model, data, split.test, ck.class_names, workers);
    io::write_json(cfg.out_path("metrics.json"), to_json(o.gcn));

    const auto mlp_path = cfg.baseline_path();
    if (!mlp_path.empty()) {
        auto mk = load_mlp(mlp_path);
        if (mk.class_names != ck.class_names) throw EvaluationError("baseline checkpoint has a different class set");
        o.mlp = evaluate(mk.model, data, split.test, mk.class_names, workers);
        o.comparison = compare_models(o.gcn, *o.mlp);
        io::write_json(cfg.out_path("mlp_metrics.json"), to_json(*o.mlp));
        io::write_json(cfg.out_path("comparison.json"), to_json(*o.comparison));
        io::write_text(cfg.out_path("comparison.txt"), render_comparison(*o.comparison));
    }
    return o;
}

struct Prediction {
    std::string path;
    std::string label;
    std::vector<std::pair<std::string, double>> top;  // descending probability
    double probability_sum = 0.0;
};

struct PredictOutcome {
    std::vector<Prediction> predictions;
    std::vector<std::pair<std::string, std::string>> errors;  // (path, message)
};

inline nlohmann::json to_json(const PredictOutcome& p) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& pr : p.predictions) {
        nlohmann::json top = nlohmann::json::array();
        for (const auto& [l, v] : pr.top) top.push_back({{"label", l}, {"probability", v}});
        preds.push_back({{"path", pr.path}, {"label", pr.label}, {"top", top}, {"probability_sum", pr.probability_sum}});
    }
    nlohmann::json errs = nlohmann::json::array();
    for (const auto& [path, msg] : p.errors) errs.push_back({{"path", path}, {"error", msg}});
    return {{"format_version", kFormatVersion}, {"predictions", preds}, {"n_errors", p.errors.size()}, {"errors", errs}};
}

/// Predicts a label for every key-value pair of one JSON document.
inline PredictOutcome predict_document(const GcnCheckpoint& ck, const Scaler& scaler, const JsonTree& doc,
                                       const AnnotationMap& annotations, const EmbeddingTable& table,
                                       const ParagraphProvider& provider, std::size_t top_k) {
    PredictOutcome out;
    auto records = extract_kv_pairs(doc, 0, annotations);
    std::vector<FeatureVector> features(records.size());
    std::vector<const FeatureVector*> ptrs(records.size(), nullptr);
    std::vector<std::string> feature_error(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            features[i] = extract_features(records[i], table, provider);
            ptrs[i] = &features[i];
        } catch (const Error& e) {
            feature_error[i] = e.what();
        }
    }
    // a record whose own features failed, or whose subtree holds one, gets an error entry
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (feature_error[i].empty()) keep.push_back(i);
        else out.errors.emplace_back(records[i].path.str(), feature_error[i]);
    }
    for (std::size_t i : keep) {
        const std::string p = records[i].path.str();
        std::vector<PathRecord> sub;
        std::vector<const FeatureVector*> sub_f;
        bool broken = false;
        for (std::size_t j = 0; j < records.size(); ++j) {
            const std::string q = records[j].path.str();
            const bool inside = q == p || (q.size() > p.size() && q.compare(0, p.size(), p) == 0 &&
                                           (q[p.size()] == '.' || q[p.size()] == '['));
            if (!inside) continue;
            if (!ptrs[j]) broken = true;
            sub.push_back(records[j]);
            sub_f.push_back(ptrs[j]);
        }
        if (broken) {
            out.errors.emplace_back(p, "subtree contains a record without features");
            continue;
        }
        auto graphs = build_graphs(sub, std::span<const FeatureVector* const>(sub_f));
        GraphSample& g = graphs.front();
        g.label_index = 0;
        auto prepared = prepare_graph(g, scaler);
        Rng unused(0);
        auto probs = GcnAdapter::forward(ck.model, prepared, false, 0.0, unused).probs;
        Prediction pr;
        pr.path = p;
        std::vector<std::size_t> order(probs.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
        pr.label = ck.class_names[order[0]];
        for (std::size_t k = 0; k < order.size() && k < top_k; ++k)
            pr.top.emplace_back(ck.class_names[order[k]], static_cast<double>(probs[order[k]]));
        for (float v : probs) pr.probability_sum += static_cast<double>(v);
        out.predictions.push_back(std::move(pr));
    }
    return out;
}

/// `predict`: predictions.json for cfg.document.
inline PredictOutcome cmd_predict(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.document.empty()) throw ConfigError("predict: no document given");
    const auto ckpt_path = cfg.checkpoint_path();
    if (!fs::exists(ckpt_path)) throw LoadError("checkpoint " + ckpt_path + " does not exist");
    auto ck = load_model(ckpt_path);
    auto scaler = load_scaler_for(ckpt_path, ck.scaler_ref);
    std::ifstream in(cfg.document, std::ios::binary);
    if (!in) throw LoadError("cannot open document " + cfg.document);
    std::stringstream buf;
    buf << in.rdbuf();
    auto doc = parse_document(buf.str());
    auto table = load_word_table(cfg);
    auto provider = make_provider(cfg, nullptr);
    auto result = predict_document(ck, scaler, doc, load_annotations(cfg), table, *provider, cfg.top_k);
    io::write_json(cfg.out_path("predictions.json"), to_json(result));
    return result;
}

/// `synth`: corpus.jsonl + annotations.jsonl.
inline SynthCorpus cmd_synth(const PipelineConfig& cfg) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    auto corpus = generate_synthetic_corpus(spec);
    io::write_text(cfg.out_path("annotations.jsonl"), corpus.annotation_text());
    io::write_text(cfg.out_path("corpus.jsonl"), corpus.corpus_text());
    return corpus;
}

}  // namespace semjson
