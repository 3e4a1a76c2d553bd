#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semjson/common.hpp"
#include "semjson/matrix.hpp"
#include "semjson/nn.hpp"
#include "semjson/random.hpp"

namespace semjson {

struct GcnShape {
    std::size_t input = 1587;
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 64;
    std::size_t classes = 2;

    friend bool operator==(const GcnShape&, const GcnShape&) = default;
};

/// GCN(hidden1) -> dropout -> GCN(hidden2) -> mean pool -> dense softmax.
template <typename T>
struct GcnModel {
    nn::ThreeLayer<T> params;
    std::uint64_t seed = 0;

    GcnModel() = default;
    explicit GcnModel(const GcnShape& s, std::uint64_t seed_ = 0)
        : params(s.input, s.hidden1, s.hidden2, s.classes), seed(seed_) {
        if (s.classes < 2) throw ContractViolation("GcnModel: at least two classes required");
    }

    static GcnModel glorot(const GcnShape& s, std::uint64_t seed_) {
        GcnModel m(s, seed_);
        m.params.glorot(seed_);
        return m;
    }

    GcnShape shape() const {
        return {params.first.in(), params.first.out(), params.second.out(), params.head.out()};
    }
    std::size_t classes() const noexcept { return params.head.out(); }
    std::size_t parameter_count() const noexcept { return params.parameter_count(); }

    template <typename U>
    GcnModel<U> cast() const {
        GcnModel<U> m;
        m.params = params.template cast<U>();
        m.seed = seed;
        return m;
    }

    friend bool operator==(const GcnModel&, const GcnModel&) = default;
};

/// Activations kept for the backward pass.
template <typename T>
struct GcnCache {
    Matrix<T> adjacency;  // normalized
    Matrix<T> ah;         // A_hat H
    Matrix<T> z1, h1;     // pre/post ReLU
    Matrix<T> mask;       // dropout mask on h1
    Matrix<T> ah1;        // A_hat (h1 * mask)
    Matrix<T> z2, h2;
    std::vector<T> pooled;
    std::vector<T> logits;
    std::vector<T> probs;
    bool valid = false;
};

namespace detail {

template <typename T>
void check_forward_shapes(const GcnModel<T>& model, const Matrix<T>& adj, const Matrix<T>& h) {
    if (h.rows() == 0) throw ContractViolation("gcn forward: graph has no nodes");
    if (adj.rows() != h.rows() || adj.cols() != h.rows())
        throw ContractViolation("gcn forward: adjacency does not match node count");
    if (h.cols() != model.params.first.in()) throw ContractViolation("gcn forward: node feature width mismatch");
}

}  // namespace detail

/// Forward pass with an explicit dropout mask (empty mask = no dropout).
template <typename T>
GcnCache<T> gcn_forward_with_mask(const GcnModel<T>& model, const Matrix<T>& adj, const Matrix<T>& h, Matrix<T> mask) {
    detail::check_forward_shapes(model, adj, h);
    const auto& p = model.params;
    const std::size_t n = h.rows();
    GcnCache<T> c;
    c.adjacency = adj;
    matmul(adj, h, c.ah);
    matmul(c.ah, p.first.weight, c.z1);
    nn::add_bias_relu(c.z1, p.first.bias, c.h1);
    Matrix<T> h1d = c.h1;
    if (mask.empty()) mask = Matrix<T>(n, p.first.out(), T{1});
    if (!mask.same_shape(c.h1)) throw ContractViolation("gcn forward: dropout mask shape mismatch");
    for (std::size_t i = 0; i < h1d.size(); ++i) h1d.data()[i] *= mask.data()[i];
    c.mask = std::move(mask);
    matmul(adj, h1d, c.ah1);
    matmul(c.ah1, p.second.weight, c.z2);
    nn::add_bias_relu(c.z2, p.second.bias, c.h2);

    c.pooled.assign(p.second.out(), T{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c.pooled.size(); ++j) c.pooled[j] += c.h2(i, j);
    for (auto& x : c.pooled) x /= static_cast<T>(n);

    c.logits.assign(p.head.bias.begin(), p.head.bias.end());
    for (std::size_t k = 0; k < c.pooled.size(); ++k) {
        const T g = c.pooled[k];
        const T* w = p.head.weight.row(k).data();
        for (std::size_t j = 0; j < c.logits.size(); ++j) c.logits[j] += g * w[j];
    }
    c.probs = nn::softmax<T>(c.logits);
    c.valid = true;
    return c;
}

/// In train mode a fresh dropout mask is drawn from `rng`.
template <typename T>
GcnCache<T> gcn_forward(const GcnModel<T>& model, const Matrix<T>& adj, const Matrix<T>& h, bool train_mode,
                        double dropout_rate, Rng& rng) {
    if (!train_mode || dropout_rate == 0.0) return gcn_forward_with_mask(model, adj, h, Matrix<T>{});
    Matrix<T> unit(h.rows(), model.params.first.out(), T{1});
    Matrix<T> mask = nn::dropout(unit, dropout_rate, rng, true);
    return gcn_forward_with_mask(model, adj, h, std::move(mask));
}

/// Accumulates dloss/dparams into `grads` (same shapes as model.params).
template <typename T>
void gcn_backward(const GcnModel<T>& model, const GcnCache<T>& cache, std::size_t label, nn::ThreeLayer<T>& grads,
                  T weight = T{1}) {
    if (!cache.valid) throw ContractViolation("gcn backward: missing or stale forward cache");
    const auto& p = model.params;
    const std::size_t n = cache.h2.rows();
    const std::size_t classes = p.head.out();
    if (label >= classes) throw ContractViolation("gcn backward: label out of range");

    std::vector<T> dlogits(cache.probs);
    dlogits[label] -= T{1};
    for (auto& x : dlogits) x *= weight;

    for (std::size_t k = 0; k < cache.pooled.size(); ++k) {
        T* gw = grads.head.weight.row(k).data();
        for (std::size_t j = 0; j < classes; ++j) gw[j] += cache.pooled[k] * dlogits[j];
    }
    for (std::size_t j = 0; j < classes; ++j) grads.head.bias[j] += dlogits[j];

    std::vector<T> dpooled(cache.pooled.size(), T{});
    for (std::size_t k = 0; k < cache.pooled.size(); ++k) {
        const T* w = p.head.weight.row(k).data();
        T s{};
        for (std::size_t j = 0; j < classes; ++j) s += w[j] * dlogits[j];
        dpooled[k] = s / static_cast<T>(n);
    }

    // mean pooling spreads the gradient evenly over the rows of h2
    Matrix<T> dz2(n, p.second.out());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz2.cols(); ++j) dz2(i, j) = cache.z2(i, j) > T{} ? dpooled[j] : T{};
    add_transposed_product(cache.ah1, dz2, grads.second.weight);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz2.cols(); ++j) grads.second.bias[j] += dz2(i, j);

    Matrix<T> dah1 = matmul_transposed(dz2, p.second.weight);  // n x hidden1
    Matrix<T> dh1;
    matmul(cache.adjacency, dah1, dh1);  // A_hat is symmetric
    Matrix<T> dz1(n, p.first.out());
    for (std::size_t i = 0; i < dz1.size(); ++i)
        dz1.data()[i] = cache.z1.data()[i] > T{} ? dh1.data()[i] * cache.mask.data()[i] : T{};
    add_transposed_product(cache.ah, dz1, grads.first.weight);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz1.cols(); ++j) grads.first.bias[j] += dz1(i, j);
}

}  // namespace semjson
