// Command-line front end for the pipeline stages.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "semjson/semjson.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> corpus, annotations, embeddings, paragraph;
    std::optional<int> epochs, pvdbow_epochs;
    std::optional<std::size_t> batch_size, workers, top_k;
    std::optional<double> lr, dropout;
    bool no_baseline = false;
    std::optional<std::string> checkpoint, baseline, document;
    std::optional<std::size_t> classes, docs_per_class;
    std::optional<int> max_depth;
    std::optional<double> noise;
    std::optional<std::string> profile;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file");
    cmd->add_option("--seed", f.seed, "seed for every stochastic step");
    cmd->add_option("--out", f.out, "output directory");
}

void add_featurize(CLI::App* cmd, Flags& f) {
    cmd->add_option("--embeddings", f.embeddings, "word embedding table (token + 50 values per line)");
    cmd->add_option("--paragraph", f.paragraph, "paragraph provider: hashing | pvdbow");
    cmd->add_option("--pvdbow-epochs", f.pvdbow_epochs, "training epochs of the paragraph model");
}

semjson::PipelineConfig resolve(const Flags& f) {
    semjson::PipelineConfig cfg;
    if (!f.config.empty()) cfg.load_file(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out = *f.out;
    if (f.corpus) cfg.corpus = *f.corpus;
    if (f.annotations) cfg.annotations = *f.annotations;
    if (f.embeddings) cfg.embeddings = *f.embeddings;
    if (f.paragraph) cfg.paragraph_provider = *f.paragraph;
    if (f.pvdbow_epochs) cfg.pvdbow_epochs = *f.pvdbow_epochs;
    if (f.epochs) cfg.train.epochs = *f.epochs;
    if (f.batch_size) cfg.train.batch_size = *f.batch_size;
    if (f.workers) cfg.train.workers = *f.workers;
    if (f.lr) cfg.train.learning_rate = *f.lr;
    if (f.dropout) cfg.train.dropout_rate = *f.dropout;
    if (f.no_baseline) cfg.baseline = false;
    if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
    if (f.baseline) cfg.baseline_checkpoint = *f.baseline;
    if (f.document) cfg.document = *f.document;
    if (f.top_k) cfg.top_k = *f.top_k;
    if (f.classes) cfg.synth.classes = *f.classes;
    if (f.docs_per_class) cfg.synth.docs_per_class = *f.docs_per_class;
    if (f.max_depth) cfg.synth.max_depth = *f.max_depth;
    if (f.noise) cfg.synth.noise = *f.noise;
    if (f.profile) cfg.synth.profile = semjson::parse_profile(*f.profile);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic type detection for JSON key-value pairs"};
    app.require_subcommand(1);
    Flags f;

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus and annotation map");
    add_common(synth, f);
    synth->add_option("--classes", f.classes, "number of classes");
    synth->add_option("--docs-per-class", f.docs_per_class, "documents per class");
    synth->add_option("--max-depth", f.max_depth, "maximum nesting depth");
    synth->add_option("--noise", f.noise, "probability of drawing a value from another class");
    synth->add_option("--profile", f.profile, "separable | joint");

    auto* extract = app.add_subcommand("extract", "extract key-value records from a JSON Lines corpus");
    add_common(extract, f);
    extract->add_option("--corpus", f.corpus, "JSON Lines corpus");
    extract->add_option("--annotations", f.annotations, "annotation rules (JSON Lines)");

    auto* featurize = app.add_subcommand("featurize", "compute feature vectors for extracted records");
    add_common(featurize, f);
    add_featurize(featurize, f);

    auto* graphs = app.add_subcommand("graphs", "build one graph per record");
    add_common(graphs, f);

    auto* train = app.add_subcommand("train", "train the GCN and the baseline");
    add_common(train, f);
    train->add_option("--epochs", f.epochs, "training epochs");
    train->add_option("--batch-size", f.batch_size, "mini-batch size");
    train->add_option("--learning-rate", f.lr, "Adam learning rate");
    train->add_option("--dropout", f.dropout, "dropout rate");
    train->add_option("--workers", f.workers, "worker threads (default from SEMJSON_WORKERS)");
    train->add_flag("--no-baseline", f.no_baseline, "skip the MLP baseline");
    train->add_option("--checkpoint", f.checkpoint, "checkpoint output path");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    add_common(evaluate, f);
    evaluate->add_option("--checkpoint", f.checkpoint, "GCN checkpoint");
    evaluate->add_option("--baseline", f.baseline, "MLP checkpoint for the comparison table");

    auto* predict = app.add_subcommand("predict", "label every key-value pair of one document");
    add_common(predict, f);
    add_featurize(predict, f);
    predict->add_option("--checkpoint", f.checkpoint, "GCN checkpoint");
    predict->add_option("--document", f.document, "JSON document");
    predict->add_option("--annotations", f.annotations, "annotation rules (JSON Lines)");
    predict->add_option("--top-k", f.top_k, "probabilities to report per pair");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = resolve(f);
        if (synth->parsed()) {
            auto c = semjson::cmd_synth(cfg);
            std::printf("synth: %zu documents, %zu annotation rules -> %s\n", c.lines.size(),
                        c.annotations.rules().size(), cfg.out.c_str());
        } else if (extract->parsed()) {
            auto r = semjson::cmd_extract(cfg);
            std::printf("extract: %zu documents, %zu records, %zu skipped\n", r.documents, r.records.size(),
                        r.skipped_lines.size());
            for (std::size_t i = 0; i < r.skipped_lines.size(); ++i)
                std::fprintf(stderr, "  line %zu: %s\n", r.skipped_lines[i], r.skip_reasons[i].c_str());
        } else if (featurize->parsed()) {
            std::printf("featurize: %zu feature vectors\n", semjson::cmd_featurize(cfg));
        } else if (graphs->parsed()) {
            std::printf("graphs: %zu graphs\n", semjson::cmd_graphs(cfg));
        } else if (train->parsed()) {
            auto o = semjson::cmd_train(cfg);
            std::printf("train: %zu classes, split %zu/%zu/%zu, best epoch %d, %.2f s, model %ju bytes\n",
                        o.classes.size(), o.split.train.size(), o.split.validation.size(), o.split.test.size(),
                        o.gcn.best_epoch, o.training_seconds, o.model_size_bytes);
            if (!o.split.test.empty()) std::printf("  GCN test macro-F1 %.4f\n", o.gcn_test.macro.f1);
            if (o.mlp && !o.split.test.empty()) std::printf("  MLP test macro-F1 %.4f\n", o.mlp->test_report.macro.f1);
        } else if (evaluate->parsed()) {
            auto o = semjson::cmd_evaluate(cfg);
            std::printf("evaluate: %zu samples, accuracy %.4f, macro-F1 %.4f\n", o.gcn.total(), o.gcn.overall_accuracy,
                        o.gcn.macro.f1);
            if (o.comparison) std::cout << semjson::render_comparison(*o.comparison);
        } else if (predict->parsed()) {
            auto o = semjson::cmd_predict(cfg);
            std::printf("predict: %zu predictions, %zu errors\n", o.predictions.size(), o.errors.size());
            for (const auto& p : o.predictions) std::printf("  %s -> %s\n", p.path.c_str(), p.label.c_str());
            for (const auto& [path, msg] : o.errors) std::fprintf(stderr, "  %s: %s\n", path.c_str(), msg.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
