#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "semjson/checkpoint.hpp"
#include "semjson/gcn.hpp"
#include "semjson/graph.hpp"
#include "semjson/mlp.hpp"

using namespace semjson;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("semjson_nn_" + name)).string();
}

Matrix<double> star_adjacency(std::size_t leaves) {
    Matrix<double> a(leaves + 1, leaves + 1, 0.0);
    for (std::size_t i = 1; i <= leaves; ++i) a(0, i) = a(i, 0) = 1.0;
    return a;
}

// Naive double-precision recomputation of the forward formula.
std::vector<double> reference_forward(const nn::ThreeLayer<double>& p, const Matrix<double>& a01,
                                      const Matrix<double>& h) {
    const std::size_t n = h.rows();
    std::vector<double> deg(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += a01(i, j);
    auto ahat = [&](std::size_t i, std::size_t j) {
        return ((i == j ? 1.0 : 0.0) + a01(i, j)) / std::sqrt(deg[i] * deg[j]);
    };
    auto layer = [&](const std::vector<std::vector<double>>& x, const nn::Dense<double>& d) {
        std::vector<std::vector<double>> out(n, std::vector<double>(d.out(), 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < d.out(); ++o) {
                double s = d.bias[o];
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t k = 0; k < d.in(); ++k) s += ahat(i, j) * x[j][k] * d.weight(k, o);
                out[i][o] = std::max(0.0, s);
            }
        return out;
    };
    std::vector<std::vector<double>> x(n, std::vector<double>(h.cols()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < h.cols(); ++k) x[i][k] = h(i, k);
    auto h2 = layer(layer(x, p.first), p.second);
    std::vector<double> logits(p.head.out());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        double s = p.head.bias[c];
        for (std::size_t k = 0; k < p.head.in(); ++k) {
            double pooled = 0.0;
            for (std::size_t i = 0; i < n; ++i) pooled += h2[i][k];
            s += pooled / static_cast<double>(n) * p.head.weight(k, c);
        }
        logits[c] = s;
    }
    double mx = *std::max_element(logits.begin(), logits.end()), z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (double& l : logits) l /= z;
    return logits;
}

}  // namespace

TEST(GcnForward, SingleNodeReducesToDenseStack) {
    GcnShape shape{12, 8, 6, 3};
    auto m = GcnModel<double>::glorot(shape, 3);
    Rng rng(1);
    Matrix<double> h(1, 12);
    for (auto& x : h.storage()) x = rng.uniform(-1, 1);
    auto c = gcn_forward_with_mask(m, Matrix<double>(1, 1, 1.0), h, {});
    ASSERT_EQ(c.probs.size(), 3u);
    auto ref = reference_forward(m.params, Matrix<double>(1, 1, 0.0), h);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(c.probs[k], ref[k], 1e-12);
}

TEST(GcnForward, ZeroParametersGiveUniform) {
    GcnModel<float> m(GcnShape{20, 8, 4, 5});
    Matrix<float> h(3, 20, 0.7f);
    auto adj = normalize_adjacency(star_adjacency(2)).cast<float>();
    auto c = gcn_forward_with_mask(m, adj, h, {});
    for (float p : c.probs) EXPECT_NEAR(p, 0.2f, 1e-7);
}

TEST(GcnForward, StarGraphMatchesIndependentRecomputation) {
    GcnShape shape;
    shape.classes = 5;
    auto m = GcnModel<float>::glorot(shape, 7);
    Rng rng(7);
    Matrix<double> h(4, shape.input);
    for (auto& x : h.storage()) x = rng.uniform(-1, 1);
    auto star = star_adjacency(3);
    auto c = gcn_forward_with_mask(m, normalize_adjacency(star).cast<float>(), h.cast<float>(), {});
    auto ref = reference_forward(m.params.cast<double>(), star, h.cast<float>().cast<double>());
    double sum = 0;
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(c.probs[k], ref[k], 1e-6);
        sum += c.probs[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(GcnForward, NodePermutationInvariance) {
    GcnShape shape{10, 8, 6, 3};
    auto m = GcnModel<double>::glorot(shape, 5);
    Rng rng(5);
    Matrix<double> a(4, 4, 0.0);
    a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = a(0, 3) = a(3, 0) = 1.0;
    Matrix<double> h(4, 10);
    for (auto& x : h.storage()) x = rng.uniform(-1, 1);
    const std::size_t perm[] = {2, 0, 3, 1};
    Matrix<double> pa(4, 4), ph(4, 10);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) pa(i, j) = a(perm[i], perm[j]);
        for (std::size_t k = 0; k < 10; ++k) ph(i, k) = h(perm[i], k);
    }
    auto c1 = gcn_forward_with_mask(m, normalize_adjacency(a), h, {});
    auto c2 = gcn_forward_with_mask(m, normalize_adjacency(pa), ph, {});
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(c1.probs[k], c2.probs[k], 1e-12);
}

TEST(GcnForward, ShapeMismatchRejected) {
    GcnModel<float> m(GcnShape{10, 4, 4, 2});
    Rng rng(1);
    EXPECT_THROW(gcn_forward(m, Matrix<float>(2, 2, 0.5f), Matrix<float>(3, 10), false, 0.5, rng), ContractViolation);
    EXPECT_THROW(gcn_forward(m, Matrix<float>(1, 1, 1.0f), Matrix<float>(1, 9), false, 0.5, rng), ContractViolation);
    EXPECT_THROW(GcnModel<float>(GcnShape{10, 4, 4, 1}), ContractViolation);
}

TEST(CrossEntropy, Examples) {
    std::vector<double> uniform(4, 0.25);
    EXPECT_NEAR(nn::cross_entropy<double>(uniform, 2), std::log(4.0), 1e-12);
    EXPECT_NEAR(nn::cross_entropy<double>(uniform, 0), 1.3863, 1e-4);
    std::vector<double> sure = {0.0, 1.0};
    EXPECT_EQ(nn::cross_entropy<double>(sure, 1), 0.0);
    std::vector<double> half = {0.5, 0.5};
    EXPECT_NEAR(nn::cross_entropy<double>(half, 0), 0.6931, 1e-4);
    EXPECT_NEAR(nn::cross_entropy<double>(sure, 0), -std::log(1e-12), 1e-9);
    std::vector<float> onehot = {0.0f, 1.0f};
    EXPECT_EQ(nn::cross_entropy<double>(sure, std::span<const float>(onehot)), 0.0);
}

TEST(Backward, GcnMatchesFiniteDifferences) {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        auto r = gradcheck::gcn_instance(s);
        EXPECT_LT(r.max_relative_error, 1e-4) << "instance " << s;
        EXPECT_GT(r.entries, 0u);
    }
}

TEST(Backward, MlpMatchesFiniteDifferences) {
    for (std::uint64_t s = 1; s <= 10; ++s) EXPECT_LT(gradcheck::mlp_instance(s).max_relative_error, 1e-4) << s;
}

TEST(Backward, SaturatedCorrectPredictionHasTinyGradient) {
    GcnShape shape{6, 4, 3, 2};
    GcnModel<double> m(shape);
    for (auto& w : m.params.first.weight.storage()) w = 0.5;
    for (auto& w : m.params.second.weight.storage()) w = 0.5;
    m.params.head.bias = {60.0, -60.0};
    Matrix<double> h(1, 6, 1.0);
    auto c = gcn_forward_with_mask(m, Matrix<double>(1, 1, 1.0), h, {});
    auto g = m.params.zeros_like();
    gcn_backward(m, c, 0, g);
    double norm = 0;
    for (auto t : g.tensors())
        for (double x : t) norm += x * x;
    EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(Backward, StaleCacheRejected) {
    GcnModel<double> m(GcnShape{6, 4, 3, 2});
    auto g = m.params.zeros_like();
    EXPECT_THROW(gcn_backward(m, GcnCache<double>{}, 0, g), ContractViolation);
    MlpModel<double> mm(MlpShape{6, 4, 3, 2});
    auto gm = mm.params.zeros_like();
    EXPECT_THROW(mlp_backward(mm, MlpCache<double>{}, 0, gm), ContractViolation);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    nn::ThreeLayer<float> p(3, 2, 2, 2);
    p.glorot(1);
    auto before = p;
    nn::AdamState<float> st;
    nn::adam_step(p, p.zeros_like(), st, nn::AdamConfig{});
    EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> param = {1.0};
    std::vector<double> grad = {1.0};
    nn::AdamState<double> st;
    nn::adam_step<double>({std::span<double>(param)}, {std::span<const double>(grad)}, st, nn::AdamConfig{});
    // m_hat = g and v_hat = g^2 after bias correction
    EXPECT_NEAR(param[0] - 1.0, -2e-4 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, DeterministicOverTenSteps) {
    auto run = [] {
        nn::ThreeLayer<float> p(5, 4, 3, 2);
        p.glorot(9);
        nn::AdamState<float> st;
        Rng rng(3);
        for (int s = 0; s < 10; ++s) {
            auto g = p.zeros_like();
            for (auto t : g.tensors())
                for (auto& x : t) x = static_cast<float>(rng.uniform(-1, 1));
            nn::adam_step(p, g, st, nn::AdamConfig{});
        }
        return p;
    };
    EXPECT_EQ(run(), run());
}

TEST(Dropout, IdentityCases) {
    Rng rng(1);
    Matrix<float> h(3, 4, 2.0f);
    auto m0 = nn::dropout(h, 0.0, rng, true);
    EXPECT_EQ(h, Matrix<float>(3, 4, 2.0f));
    auto me = nn::dropout(h, 0.7, rng, false);
    EXPECT_EQ(h, Matrix<float>(3, 4, 2.0f));
    EXPECT_EQ(me, Matrix<float>(3, 4, 1.0f));
    EXPECT_THROW(nn::dropout(h, 1.0, rng, true), ContractViolation);
    EXPECT_THROW(nn::dropout(h, -0.1, rng, true), ContractViolation);
}

TEST(Dropout, LawOfLargeNumbers) {
    Rng rng(42);
    Matrix<double> h(1000, 1000, 1.0);
    nn::dropout(h, 0.5, rng, true);
    std::size_t kept = 0;
    double sum = 0;
    for (double x : h.storage()) {
        kept += x != 0.0;
        sum += x;
    }
    EXPECT_NEAR(static_cast<double>(kept) / 1e6, 0.5, 0.01);
    EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

TEST(Checkpoint, RoundTripGivesIdenticalForward) {
    GcnShape shape;
    shape.classes = 3;
    GcnCheckpoint ck{GcnModel<float>::glorot(shape, 11), {"a", "b", "c"}, "scaler.json"};
    const auto path = temp_path("rt.ckpt");
    save_model(ck, path);
    auto back = load_model(path);
    EXPECT_EQ(back.model, ck.model);
    EXPECT_EQ(back.class_names, ck.class_names);
    EXPECT_EQ(back.scaler_ref, "scaler.json");
    Rng rng(2);
    Matrix<float> h(2, shape.input);
    for (auto& x : h.storage()) x = static_cast<float>(rng.uniform(-1, 1));
    Matrix<double> a(2, 2, 0.0);
    a(0, 1) = a(1, 0) = 1.0;
    auto adj = normalize_adjacency(a).cast<float>();
    EXPECT_EQ(gcn_forward_with_mask(ck.model, adj, h, {}).probs, gcn_forward_with_mask(back.model, adj, h, {}).probs);
}

TEST(Checkpoint, TruncatedAndForeignFilesRejected) {
    GcnCheckpoint ck{GcnModel<float>::glorot(GcnShape{}, 1), {"a", "b"}, "scaler.json"};
    const auto path = temp_path("trunc.ckpt");
    save_model(ck, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
    EXPECT_THROW(load_model(path), LoadError);

    MlpCheckpoint mk{MlpModel<float>::glorot(MlpShape{}, 1), {"a", "b"}, "scaler.json"};
    const auto mpath = temp_path("mlp.ckpt");
    save_mlp(mk, mpath);
    EXPECT_EQ(load_mlp(mpath).model, mk.model);
    try {
        load_model(mpath);
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
    }
    EXPECT_THROW(load_model(temp_path("does_not_exist.ckpt")), LoadError);
}

TEST(Checkpoint, FortyThreeClassSize) {
    GcnShape shape;
    shape.classes = 43;
    GcnModel<float> m(shape);
    EXPECT_EQ(m.parameter_count(), 1587u * 256 + 256 + 256 * 64 + 64 + 64 * 43 + 43);
    const auto path = temp_path("c43.ckpt");
    std::vector<std::string> names;
    for (int i = 0; i < 43; ++i) names.push_back("c" + std::to_string(i));
    save_model({m, names, "scaler.json"}, path);
    const auto bytes = std::filesystem::file_size(path);
    EXPECT_GE(bytes, 1500000u);
    EXPECT_LE(bytes, 2500000u);
    EXPECT_GE(bytes, m.parameter_count() * 4);
}

TEST(Checkpoint, ClassNameCountMustMatchHead) {
    GcnCheckpoint ck{GcnModel<float>(GcnShape{4, 2, 2, 2}), {"only_one"}, ""};
    EXPECT_THROW(save_model(ck, temp_path("bad.ckpt")), ContractViolation);
}
