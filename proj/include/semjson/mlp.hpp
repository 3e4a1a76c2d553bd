#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semjson/common.hpp"
#include "semjson/matrix.hpp"
#include "semjson/nn.hpp"
#include "semjson/random.hpp"

namespace semjson {

struct MlpShape {
    std::size_t input = 1587;
    std::size_t hidden1 = 300;
    std::size_t hidden2 = 200;
    std::size_t classes = 2;

    friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Single-column baseline: dense(300) -> dropout -> dense(200) -> dropout ->
/// softmax, ReLU on the hidden layers. Consumes one feature vector.
template <typename T>
struct MlpModel {
    nn::ThreeLayer<T> params;
    std::uint64_t seed = 0;

    MlpModel() = default;
    explicit MlpModel(const MlpShape& s, std::uint64_t seed_ = 0)
        : params(s.input, s.hidden1, s.hidden2, s.classes), seed(seed_) {
        if (s.classes < 2) throw ContractViolation("MlpModel: at least two classes required");
    }

    static MlpModel glorot(const MlpShape& s, std::uint64_t seed_) {
        MlpModel m(s, seed_);
        m.params.glorot(seed_);
        return m;
    }

    MlpShape shape() const { return {params.first.in(), params.first.out(), params.second.out(), params.head.out()}; }
    std::size_t classes() const noexcept { return params.head.out(); }
    std::size_t parameter_count() const noexcept { return params.parameter_count(); }

    template <typename U>
    MlpModel<U> cast() const {
        MlpModel<U> m;
        m.params = params.template cast<U>();
        m.seed = seed;
        return m;
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

template <typename T>
struct MlpCache {
    Matrix<T> x;  // 1 x input
    Matrix<T> z1, h1, mask1;
    Matrix<T> h1d;
    Matrix<T> z2, h2, mask2;
    Matrix<T> h2d;
    std::vector<T> logits;
    std::vector<T> probs;
    bool valid = false;
};

/// Empty masks disable dropout.
template <typename T>
MlpCache<T> mlp_forward_with_masks(const MlpModel<T>& model, std::span<const T> features, Matrix<T> mask1,
                                   Matrix<T> mask2) {
    const auto& p = model.params;
    if (features.size() != p.first.in()) throw ContractViolation("mlp forward: feature width mismatch");
    MlpCache<T> c;
    c.x = Matrix<T>(1, features.size());
    std::copy(features.begin(), features.end(), c.x.row(0).begin());
    matmul(c.x, p.first.weight, c.z1);
    nn::add_bias_relu(c.z1, p.first.bias, c.h1);
    if (mask1.empty()) mask1 = Matrix<T>(1, p.first.out(), T{1});
    if (mask2.empty()) mask2 = Matrix<T>(1, p.second.out(), T{1});
    if (!mask1.same_shape(c.h1) || mask2.cols() != p.second.out()) throw ContractViolation("mlp forward: mask shape mismatch");
    c.h1d = c.h1;
    for (std::size_t i = 0; i < c.h1d.size(); ++i) c.h1d.data()[i] *= mask1.data()[i];
    c.mask1 = std::move(mask1);
    matmul(c.h1d, p.second.weight, c.z2);
    nn::add_bias_relu(c.z2, p.second.bias, c.h2);
    c.h2d = c.h2;
    for (std::size_t i = 0; i < c.h2d.size(); ++i) c.h2d.data()[i] *= mask2.data()[i];
    c.mask2 = std::move(mask2);
    Matrix<T> logits;
    matmul(c.h2d, p.head.weight, logits);
    c.logits.assign(logits.data(), logits.data() + logits.size());
    for (std::size_t j = 0; j < c.logits.size(); ++j) c.logits[j] += p.head.bias[j];
    c.probs = nn::softmax<T>(c.logits);
    c.valid = true;
    return c;
}

template <typename T>
MlpCache<T> mlp_forward(const MlpModel<T>& model, std::span<const T> features, bool train_mode, double dropout_rate,
                        Rng& rng) {
    if (!train_mode || dropout_rate == 0.0) return mlp_forward_with_masks(model, features, Matrix<T>{}, Matrix<T>{});
    Matrix<T> u1(1, model.params.first.out(), T{1});
    Matrix<T> u2(1, model.params.second.out(), T{1});
    auto m1 = nn::dropout(u1, dropout_rate, rng, true);
    auto m2 = nn::dropout(u2, dropout_rate, rng, true);
    return mlp_forward_with_masks(model, features, std::move(m1), std::move(m2));
}

template <typename T>
void mlp_backward(const MlpModel<T>& model, const MlpCache<T>& cache, std::size_t label, nn::ThreeLayer<T>& grads,
                  T weight = T{1}) {
    if (!cache.valid) throw ContractViolation("mlp backward: missing or stale forward cache");
    const auto& p = model.params;
    const std::size_t classes = p.head.out();
    if (label >= classes) throw ContractViolation("mlp backward: label out of range");
    Matrix<T> dlogits(1, classes);
    for (std::size_t j = 0; j < classes; ++j) dlogits(0, j) = (cache.probs[j] - (j == label ? T{1} : T{})) * weight;
    add_transposed_product(cache.h2d, dlogits, grads.head.weight);
    for (std::size_t j = 0; j < classes; ++j) grads.head.bias[j] += dlogits(0, j);

    Matrix<T> dh2d = matmul_transposed(dlogits, p.head.weight);
    Matrix<T> dz2(1, p.second.out());
    for (std::size_t j = 0; j < dz2.cols(); ++j)
        dz2(0, j) = cache.z2(0, j) > T{} ? dh2d(0, j) * cache.mask2(0, j) : T{};
    add_transposed_product(cache.h1d, dz2, grads.second.weight);
    for (std::size_t j = 0; j < dz2.cols(); ++j) grads.second.bias[j] += dz2(0, j);

    Matrix<T> dh1d = matmul_transposed(dz2, p.second.weight);
    Matrix<T> dz1(1, p.first.out());
    for (std::size_t j = 0; j < dz1.cols(); ++j)
        dz1(0, j) = cache.z1(0, j) > T{} ? dh1d(0, j) * cache.mask1(0, j) : T{};
    add_transposed_product(cache.x, dz1, grads.first.weight);
    for (std::size_t j = 0; j < dz1.cols(); ++j) grads.first.bias[j] += dz1(0, j);
}

}  // namespace semjson
