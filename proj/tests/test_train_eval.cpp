#include <gtest/gtest.h>

#include <set>

#include "semjson/metrics.hpp"
#include "semjson/synth.hpp"
#include "semjson/training.hpp"

using namespace semjson;

namespace {

// Single-node graphs whose class shows up as a shifted block of features.
std::vector<PreparedGraph> separable_data(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PreparedGraph> out;
    for (std::size_t i = 0; i < per_class; ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            PreparedGraph g;
            g.adjacency = Matrix<float>(1, 1, 1.0f);
            g.features = Matrix<float>(1, kFeatureDim);
            for (auto& x : g.features.storage()) x = static_cast<float>(rng.uniform(-0.3, 0.3));
            for (std::size_t k = 0; k < 20; ++k) g.features(0, c * 20 + k) += 2.0f;
            g.label = c;
            out.push_back(std::move(g));
        }
    return out;
}

std::vector<std::string> class_names(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("c" + std::to_string(i));
    return v;
}

DatasetSplit labels_split(const std::vector<PreparedGraph>& data, std::uint64_t seed) {
    std::vector<std::string> labels;
    for (const auto& g : data) labels.push_back("c" + std::to_string(g.label));
    return stratified_split(labels, seed);
}

}  // namespace

TEST(StratifiedSplit, ThirteenSamplesOneClass) {
    auto s = stratified_split(std::vector<std::string>(13, "a"), 1);
    EXPECT_EQ(s.train.size(), 7u);
    EXPECT_EQ(s.validation.size(), 3u);
    EXPECT_EQ(s.test.size(), 3u);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), 13u);
}

TEST(StratifiedSplit, PerClassProportions) {
    std::vector<std::string> labels;
    for (int i = 0; i < 13; ++i) labels.insert(labels.end(), {"x", "y"});
    auto s = stratified_split(labels, 3);
    EXPECT_EQ(s.train.size(), 14u);
    EXPECT_EQ(s.validation.size(), 6u);
    EXPECT_EQ(s.test.size(), 6u);
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        std::size_t x = 0;
        for (auto i : *part) x += labels[i] == "x";
        EXPECT_EQ(2 * x, part->size());
    }
}

TEST(StratifiedSplit, DeterministicPerSeed) {
    std::vector<std::string> labels;
    for (int i = 0; i < 100; ++i) labels.push_back("k" + std::to_string(i % 4));
    auto a = stratified_split(labels, 5);
    auto b = stratified_split(labels, 5);
    auto c = stratified_split(labels, 6);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.train, c.train);
}

TEST(StratifiedSplit, SingletonClassRejected) {
    EXPECT_THROW(stratified_split(std::vector<std::string>{"a", "a", "b"}, 1), SplitError);
}

TEST(Metrics, HandComputedTwoClassExample) {
    auto r = metrics_from_confusion({{2, 1}, {0, 3}}, {"a", "b"});
    EXPECT_DOUBLE_EQ(r.per_class[0].precision, 1.0);
    EXPECT_DOUBLE_EQ(r.per_class[0].recall, 2.0 / 3.0);
    EXPECT_NEAR(r.per_class[0].f1, 0.8, 1e-12);
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.75);
    EXPECT_DOUBLE_EQ(r.per_class[1].recall, 1.0);
    EXPECT_NEAR(r.per_class[1].f1, 6.0 / 7.0, 1e-12);
    EXPECT_NEAR(r.macro.f1, (0.8 + 6.0 / 7.0) / 2, 1e-12);
    EXPECT_DOUBLE_EQ(r.overall_accuracy, 5.0 / 6.0);
    EXPECT_EQ(r.total(), 6u);
}

TEST(Metrics, AllCorrectGivesOnes) {
    auto r = metrics_from_predictions({0, 1, 2, 1}, {0, 1, 2, 1}, {"a", "b", "c"}, {false, true, false, true}, {});
    for (const auto& m : r.per_class) {
        EXPECT_EQ(m.precision, 1.0);
        EXPECT_EQ(m.recall, 1.0);
        EXPECT_EQ(m.f1, 1.0);
    }
    EXPECT_EQ(r.macro.f1, 1.0);
    EXPECT_EQ(r.overall_accuracy, 1.0);
    EXPECT_EQ(r.multi_node.classes, std::vector<std::string>{"b"});
    EXPECT_EQ(r.single_node.classes, (std::vector<std::string>{"a", "c"}));
}

TEST(Metrics, MacroSkipsClassesAbsentFromTruthAndPrediction) {
    auto r = metrics_from_predictions({0, 0}, {0, 0}, {"a", "b"}, {false, false}, {});
    EXPECT_EQ(r.macro.f1, 1.0);
    EXPECT_EQ(r.per_class[1].support, 0u);
}

TEST(Metrics, WeightedRecallEqualsAccuracy) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::size_t> truth, pred;
        for (int i = 0; i < 50; ++i) {
            truth.push_back(rng.below(5));
            pred.push_back(rng.below(5));
        }
        auto r = metrics_from_predictions(truth, pred, class_names(5), std::vector<bool>(50, false), {});
        double weighted = 0;
        for (const auto& m : r.per_class) weighted += static_cast<double>(m.support) / 50.0 * m.recall;
        EXPECT_NEAR(weighted, r.overall_accuracy, 1e-12);
        EXPECT_NEAR(r.weighted.recall, r.overall_accuracy, 1e-12);
    }
}

TEST(CompareModels, DeltasAndLayout) {
    auto base = metrics_from_predictions({0, 1, 1}, {0, 1, 0}, {"a", "b"}, {false, true, true}, {4, 5, 6});
    auto same = compare_models(base, base);
    for (const auto* rows : {&same.single_node, &same.multi_node})
        for (const auto& r : *rows) {
            EXPECT_EQ(r.delta_f1(), 0.0);
            EXPECT_EQ(r.delta_accuracy(), 0.0);
        }
    ASSERT_EQ(same.single_node.size(), 1u);
    ASSERT_EQ(same.multi_node.size(), 1u);

    auto proposed = base;
    proposed.macro.f1 = 0.85;
    auto baseline = base;
    baseline.macro.f1 = 0.82;
    EXPECT_NEAR(compare_models(proposed, baseline).average.delta_f1(), 0.03, 1e-12);

    auto j = to_json(same);
    ASSERT_EQ(j["groups"].size(), 2u);
    EXPECT_EQ(j["groups"][0]["name"], "Single-Node");
    EXPECT_EQ(j["groups"][1]["name"], "Multi-Node");
    EXPECT_EQ(j["groups"][0]["rows"][0]["label"], "a");
    EXPECT_TRUE(j["average"].contains("delta"));
    auto text = render_comparison(same);
    EXPECT_LT(text.find("Single-Node"), text.find("Multi-Node"));
    EXPECT_NE(text.find("Average"), std::string::npos);

    auto other = base;
    other.sample_indices = {4, 5, 7};
    EXPECT_THROW(compare_models(base, other), ContractViolation);
}

TEST(Training, ConfigValidation) {
    TrainConfig cfg;
    cfg.validate();
    cfg.learning_rate = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epochs = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.dropout_rate = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Training, GcnFitsSeparableData) {
    auto data = separable_data(3, 13, 2);
    auto split = labels_split(data, 1);
    GcnShape shape;
    shape.classes = 3;
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    auto r = train(GcnModel<float>::glorot(shape, 1), data, split, cfg, class_names(3));
    ASSERT_EQ(r.history.size(), 50u);
    EXPECT_LT(r.history.back().train_loss, 0.1);
    EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
    auto report = evaluate(r.model, data, split.test, class_names(3));
    EXPECT_EQ(report.overall_accuracy, 1.0);
}

TEST(Training, ZeroEpochsLeavesModelUntouched) {
    auto data = separable_data(2, 13, 3);
    auto split = labels_split(data, 1);
    auto model = GcnModel<float>::glorot(GcnShape{}, 4);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto r = train(model, data, split, cfg, class_names(2));
    EXPECT_EQ(r.model, model);
    EXPECT_TRUE(r.history.empty());
}

TEST(Training, SeededRunsRepeatExactly) {
    auto data = separable_data(2, 13, 5);
    auto split = labels_split(data, 1);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.workers = 2;
    auto a = train(GcnModel<float>::glorot(GcnShape{}, 9), data, split, cfg, class_names(2));
    auto b = train(GcnModel<float>::glorot(GcnShape{}, 9), data, split, cfg, class_names(2));
    EXPECT_EQ(a.model, b.model);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
}

TEST(Training, BaselineFitsSeparableData) {
    auto data = separable_data(3, 26, 8);
    auto split = labels_split(data, 2);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 8;
    auto r = train_mlp_baseline(data, split, cfg, class_names(3));
    EXPECT_GE(r.test_report.overall_accuracy, 0.95);
    EXPECT_EQ(r.test_report.sample_indices, split.test);
}

TEST(Training, LabelBeyondHeadRejected) {
    auto data = separable_data(3, 13, 1);
    auto split = labels_split(data, 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train(GcnModel<float>::glorot(GcnShape{}, 1), data, split, cfg, class_names(2)), ContractViolation);
}

TEST(Synth, JointCorpusLabels) {
    SynthSpec spec{5, 200, 3, 0.1, 1, SynthProfile::joint};
    auto corpus = generate_synthetic_corpus(spec);
    EXPECT_EQ(corpus.lines.size(), 400u);
    std::set<std::string> labels;
    for (std::size_t d = 0; d < corpus.lines.size(); ++d)
        for (const auto& r : extract_kv_pairs(parse_document(corpus.lines[d]), static_cast<std::int64_t>(d),
                                              corpus.annotations))
            labels.insert(r.label);
    EXPECT_GE(labels.size(), 5u);
    EXPECT_TRUE(labels.count("payload"));
    EXPECT_TRUE(labels.count("screen_name"));
}

TEST(Synth, DeterministicAndSeedSensitive) {
    SynthSpec spec;
    spec.docs_per_class = 20;
    EXPECT_EQ(generate_synthetic_corpus(spec).corpus_text(), generate_synthetic_corpus(spec).corpus_text());
    auto other = spec;
    other.seed = 2;
    EXPECT_NE(generate_synthetic_corpus(spec).corpus_text(), generate_synthetic_corpus(other).corpus_text());
}

TEST(Synth, NoiseFreePairsAreCleanlyGrouped) {
    SynthSpec spec{2, 30, 3, 0.0, 4, SynthProfile::joint};
    auto corpus = generate_synthetic_corpus(spec);
    for (const auto& line : corpus.lines) {
        auto doc = parse_document(line);
        for (const auto& [key, value] : doc.items()) {
            const auto& left = value["entities"]["primary"];
            const bool pure_letters = std::all_of(left.begin(), left.end(),
                                                  [](const auto& t) { return std::isalpha(t.template get<std::string>()[0]); });
            EXPECT_EQ(pure_letters, key == "user_mentions") << line;
        }
    }
}

TEST(Synth, InvalidSpecs) {
    SynthSpec spec;
    spec.classes = 1;
    EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
    spec = {};
    spec.max_depth = 2;
    EXPECT_THROW(generate_synthetic_corpus(spec), ConfigError);
    EXPECT_THROW(parse_profile("flat"), ConfigError);
}
