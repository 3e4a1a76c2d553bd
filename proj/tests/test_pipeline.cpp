#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "semjson/pipeline.hpp"

using namespace semjson;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("semjson_pipe_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
    std::size_t n = 0;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) n += !l.empty();
    return n;
}

PipelineConfig tiny_config(const std::string& name, int epochs = 2) {
    PipelineConfig cfg;
    cfg.out = fresh_dir(name).string();
    cfg.synth = SynthSpec{3, 13, 3, 0.0, 1, SynthProfile::joint};
    cfg.train.epochs = epochs;
    cfg.train.workers = 1;
    return cfg;
}

void run_until_train(const PipelineConfig& cfg) {
    cmd_synth(cfg);
    cmd_extract(cfg);
    cmd_featurize(cfg);
    cmd_graphs(cfg);
    cmd_train(cfg);
}

}  // namespace

TEST(PipelineConfig, FileValuesOverrideDefaultsAndRejectUnknownKeys) {
    auto dir = fresh_dir("cfg");
    write_file(dir / "c.json", R"({"seed": 9, "epochs": 3, "synth": {"classes": 4, "profile": "separable"}})");
    PipelineConfig cfg;
    cfg.load_file((dir / "c.json").string());
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.train.epochs, 3);
    EXPECT_EQ(cfg.synth.classes, 4u);
    EXPECT_EQ(cfg.synth.profile, SynthProfile::separable);
    EXPECT_EQ(cfg.train_config().seed, 9u);
    EXPECT_EQ(cfg.paragraph_provider, "hashing");

    write_file(dir / "bad.json", R"({"epoch": 3})");
    EXPECT_THROW(cfg.load_file((dir / "bad.json").string()), ConfigError);
    write_file(dir / "type.json", R"({"epochs": "many"})");
    EXPECT_THROW(cfg.load_file((dir / "type.json").string()), ConfigError);
    EXPECT_THROW(cfg.load_file((dir / "missing.json").string()), ConfigError);

    PipelineConfig v;
    v.paragraph_provider = "bert";
    EXPECT_THROW(v.validate(), ConfigError);
}

TEST(Annotations, LoadFromFile) {
    auto dir = fresh_dir("ann");
    write_file(dir / "a.jsonl", "{\"pattern\":\"$.user\",\"label\":\"account\"}\n\n{\"pattern\":\"$.user.*\",\"label\":\"field\"}\n");
    auto map = AnnotationMap::load((dir / "a.jsonl").string());
    ASSERT_EQ(map.rules().size(), 2u);
    EXPECT_EQ(*map.lookup("$.user"), "account");
    EXPECT_EQ(*map.lookup("$.user.name"), "field");
    EXPECT_EQ(map.lookup("$.user.a.b"), nullptr);
    write_file(dir / "b.jsonl", "{\"pattern\":\"$.x\"}\n");
    EXPECT_THROW(AnnotationMap::load((dir / "b.jsonl").string()), LoadError);
}

TEST(Extract, UserDocumentGivesFourRecords) {
    PipelineConfig cfg;
    cfg.out = fresh_dir("extract").string();
    cfg.corpus = (fs::path(cfg.out) / "c.jsonl").string();
    write_file(cfg.corpus, R"({"user":{"id":9171087,"id_str":"9171087","name":"ud83c"}})" "\n");
    auto r = cmd_extract(cfg);
    EXPECT_EQ(r.records.size(), 4u);
    EXPECT_EQ(line_count(cfg.out_path("records.jsonl")), 4u);
    auto stats = io::read_json(cfg.out_path("corpus_stats.json").string());
    EXPECT_EQ(stats["n_documents"], 1);
    EXPECT_EQ(stats["n_skipped"], 0);
}

TEST(Extract, EmptyCorpus) {
    PipelineConfig cfg;
    cfg.out = fresh_dir("empty").string();
    cfg.corpus = (fs::path(cfg.out) / "c.jsonl").string();
    write_file(cfg.corpus, "");
    auto r = cmd_extract(cfg);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(slurp(cfg.out_path("records.jsonl")), "");
    EXPECT_EQ(io::read_json(cfg.out_path("corpus_stats.json").string())["n_documents"], 0);
}

TEST(Extract, MalformedLineIsSkippedAndReported) {
    PipelineConfig cfg;
    cfg.out = fresh_dir("malformed").string();
    cfg.corpus = (fs::path(cfg.out) / "c.jsonl").string();
    write_file(cfg.corpus, "{\"a\":1}\n{\"b\":\n{\"c\":\"x\"}\n");
    auto r = cmd_extract(cfg);
    EXPECT_EQ(r.documents, 2u);
    ASSERT_EQ(r.skipped_lines, std::vector<std::size_t>{2});
    auto stats = io::read_json(cfg.out_path("corpus_stats.json").string());
    EXPECT_EQ(stats["n_skipped"], 1);
    EXPECT_EQ(stats["skipped"][0]["line"], 2);
    EXPECT_EQ(r.records[1].document_id, 2);
}

TEST(Extract, MissingCorpusIsLoadError) {
    PipelineConfig cfg;
    cfg.out = fresh_dir("nocorpus").string();
    EXPECT_THROW(cmd_extract(cfg), LoadError);
}

TEST(Featurize, OneFullWidthRowPerRecordAndRepeatable) {
    auto cfg = tiny_config("featurize");
    cmd_synth(cfg);
    auto ex = cmd_extract(cfg);
    const auto n = cmd_featurize(cfg);
    EXPECT_EQ(n, ex.records.size());
    const auto path = cfg.out_path("features.jsonl");
    EXPECT_EQ(line_count(path), ex.records.size());
    for (const auto& row : io::read_jsonl(path.string())) ASSERT_EQ(row["features"].size(), kFeatureDim);
    const auto first = slurp(path);
    cmd_featurize(cfg);
    EXPECT_EQ(slurp(path), first);
}

TEST(Featurize, MissingEmbeddingTableIsConfigError) {
    auto cfg = tiny_config("noemb");
    cfg.embeddings = "/nonexistent/glove.txt";
    EXPECT_THROW(cmd_featurize(cfg), ConfigError);
}

TEST(Featurize, WordTableChangesWordSegment) {
    auto cfg = tiny_config("withemb");
    cfg.corpus = (fs::path(cfg.out) / "c.jsonl").string();
    write_file(cfg.corpus, "{\"text\":\"the people of the world\"}\n");
    cmd_extract(cfg);
    cmd_featurize(cfg);
    auto without = io::read_jsonl(cfg.out_path("features.jsonl").string());
    cfg.embeddings = std::string(SEMJSON_TEST_DATA) + "/glove_fixture.txt";
    cmd_featurize(cfg);
    auto with = io::read_jsonl(cfg.out_path("features.jsonl").string());
    EXPECT_EQ(without[0]["features"][kWordOffset], 0.0);
    EXPECT_NE(with[0]["features"][kWordOffset], 0.0);
}

TEST(EndToEnd, TrainEvaluatePredict) {
    auto cfg = tiny_config("e2e");
    run_until_train(cfg);

    auto graphs = load_graphs(cfg);
    EXPECT_EQ(line_count(cfg.out_path("graphs.jsonl")), graphs.size());
    EXPECT_EQ(line_count(cfg.out_path("history.jsonl")), 2u);
    EXPECT_EQ(line_count(cfg.out_path("mlp_history.jsonl")), 2u);

    auto timing = io::read_json(cfg.out_path("timing_report.json").string());
    ASSERT_EQ(timing["preprocessing"].size(), 3u);
    EXPECT_EQ(timing["preprocessing"][0]["stage"], "Key-value pair extraction");
    EXPECT_EQ(timing["preprocessing"][1]["stage"], "Feature extraction");
    EXPECT_EQ(timing["preprocessing"][2]["stage"], "Graph processing");
    double sum = 0;
    for (const auto& s : timing["preprocessing"]) {
        EXPECT_TRUE(s["measured"].get<bool>());
        EXPECT_GT(s["seconds"].get<double>(), 0.0);
        sum += s["seconds"].get<double>();
    }
    EXPECT_NEAR(timing["preprocessing_total_seconds"].get<double>(), sum, 1e-12);
    EXPECT_GT(timing["training"]["seconds"].get<double>(), 0.0);
    EXPECT_EQ(timing["training"]["model_size_bytes"].get<std::uintmax_t>(), fs::file_size(cfg.checkpoint_path()));

    auto summary = io::read_json(cfg.out_path("train_summary.json").string());
    auto ev = cmd_evaluate(cfg);
    EXPECT_NEAR(ev.gcn.overall_accuracy, summary["test"]["overall_accuracy"].get<double>(), 1e-12);
    ASSERT_TRUE(ev.comparison.has_value());
    auto cmp = io::read_json(cfg.out_path("comparison.json").string());
    EXPECT_EQ(cmp["groups"][0]["name"], "Single-Node");
    EXPECT_EQ(cmp["groups"][1]["name"], "Multi-Node");
    EXPECT_FALSE(cmp["groups"][1]["rows"].empty());
    EXPECT_TRUE(fs::exists(cfg.out_path("comparison.txt")));
    auto metrics = io::read_json(cfg.out_path("metrics.json").string());
    EXPECT_EQ(metrics["overall_accuracy"].get<double>(), ev.gcn.overall_accuracy);

    cfg.document = (fs::path(cfg.out) / "doc.json").string();
    write_file(cfg.document, generate_synthetic_corpus(cfg.synth).lines.front());
    auto pred = cmd_predict(cfg);
    EXPECT_FALSE(pred.predictions.empty());
    EXPECT_TRUE(pred.errors.empty());
    for (const auto& p : pred.predictions) {
        EXPECT_NEAR(p.probability_sum, 1.0, 1e-5);
        EXPECT_EQ(p.top.size(), 3u);
        EXPECT_EQ(p.top.front().first, p.label);
        for (std::size_t k = 1; k < p.top.size(); ++k) EXPECT_GE(p.top[k - 1].second, p.top[k].second);
    }
    EXPECT_TRUE(fs::exists(cfg.out_path("predictions.json")));

    write_file(cfg.document, "{}");
    EXPECT_TRUE(cmd_predict(cfg).predictions.empty());
}

TEST(EndToEnd, ZeroEpochCheckpointMatchesInitialization) {
    auto cfg = tiny_config("zero", 0);
    cfg.baseline = false;
    run_until_train(cfg);
    auto ck = load_model(cfg.checkpoint_path());
    GcnShape shape;
    shape.classes = ck.class_names.size();
    EXPECT_EQ(ck.model, GcnModel<float>::glorot(shape, cfg.seed));
    EXPECT_EQ(line_count(cfg.out_path("history.jsonl")), 0u);
    EXPECT_FALSE(fs::exists(cfg.out_path("mlp.ckpt")));
    auto ev = cmd_evaluate(cfg);
    EXPECT_FALSE(ev.comparison.has_value());
}

TEST(EndToEnd, MissingArtifactsNameTheProblem) {
    auto cfg = tiny_config("missing");
    EXPECT_THROW(cmd_featurize(cfg), LoadError);
    EXPECT_THROW(cmd_graphs(cfg), LoadError);
    EXPECT_THROW(cmd_evaluate(cfg), LoadError);
    cfg.document = "doc.json";
    try {
        cmd_predict(cfg);
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("model.ckpt"), std::string::npos);
    }
}
