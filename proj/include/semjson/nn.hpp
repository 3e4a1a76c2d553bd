#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "semjson/common.hpp"
#include "semjson/matrix.hpp"
#include "semjson/random.hpp"

namespace semjson::nn {

/// Affine layer parameters: y = x W + b with W of shape (in, out).
template <typename T>
struct Dense {
    Matrix<T> weight;
    std::vector<T> bias;

    Dense() = default;
    Dense(std::size_t in, std::size_t out) : weight(in, out, T{}), bias(out, T{}) {}

    std::size_t in() const noexcept { return weight.rows(); }
    std::size_t out() const noexcept { return weight.cols(); }
    std::size_t parameter_count() const noexcept { return weight.size() + bias.size(); }

    /// Glorot-uniform weights, zero bias.
    void glorot(Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in() + out()));
        for (auto& w : weight.storage()) w = static_cast<T>(rng.uniform(-limit, limit));
        std::fill(bias.begin(), bias.end(), T{});
    }

    template <typename U>
    Dense<U> cast() const {
        Dense<U> d;
        d.weight = weight.template cast<U>();
        d.bias.assign(bias.begin(), bias.end());
        return d;
    }

    friend bool operator==(const Dense&, const Dense&) = default;
};

/// Three stacked affine maps; both the GCN and the MLP baseline have this shape.
template <typename T>
struct ThreeLayer {
    Dense<T> first;
    Dense<T> second;
    Dense<T> head;

    ThreeLayer() = default;
    ThreeLayer(std::size_t in, std::size_t h1, std::size_t h2, std::size_t classes)
        : first(in, h1), second(h1, h2), head(h2, classes) {}

    std::size_t parameter_count() const noexcept {
        return first.parameter_count() + second.parameter_count() + head.parameter_count();
    }

    /// Every tensor in fixed order: W1, b1, W2, b2, W_out, b_out.
    std::vector<std::span<T>> tensors() {
        return {first.weight.storage(), first.bias, second.weight.storage(), second.bias, head.weight.storage(),
                head.bias};
    }
    std::vector<std::span<const T>> tensors() const {
        return {first.weight.storage(), first.bias, second.weight.storage(), second.bias, head.weight.storage(),
                head.bias};
    }

    void zero() {
        for (auto t : tensors()) std::fill(t.begin(), t.end(), T{});
    }

    void glorot(std::uint64_t seed) {
        Rng rng(mix_seed(seed));
        first.glorot(rng);
        second.glorot(rng);
        head.glorot(rng);
    }

    ThreeLayer zeros_like() const {
        return ThreeLayer(first.in(), first.out(), second.out(), head.out());
    }

    /// this += scale * other
    void add_scaled(const ThreeLayer& other, T scale) {
        auto dst = tensors();
        auto src = other.tensors();
        for (std::size_t t = 0; t < dst.size(); ++t)
            for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * src[t][i];
    }

    void scale(T s) {
        for (auto t : tensors())
            for (auto& x : t) x *= s;
    }

    template <typename U>
    ThreeLayer<U> cast() const {
        ThreeLayer<U> o;
        o.first = first.template cast<U>();
        o.second = second.template cast<U>();
        o.head = head.template cast<U>();
        return o;
    }

    friend bool operator==(const ThreeLayer&, const ThreeLayer&) = default;
};

template <typename T>
void add_bias_relu(Matrix<T>& z, const std::vector<T>& bias, Matrix<T>& activated) {
    activated = Matrix<T>(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        T* zr = z.row(i).data();
        T* ar = activated.row(i).data();
        for (std::size_t j = 0; j < z.cols(); ++j) {
            zr[j] += bias[j];
            ar[j] = zr[j] > T{} ? zr[j] : T{};
        }
    }
}

/// Numerically stable softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
    std::vector<T> p(logits.size());
    if (logits.empty()) return p;
    T mx = *std::max_element(logits.begin(), logits.end());
    T sum{};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
}

/// Categorical cross-entropy -log p[class], with p clamped to [1e-12, 1].
template <typename T>
double cross_entropy(std::span<const T> probs, std::size_t label) {
    if (label >= probs.size()) throw ContractViolation("cross_entropy: label out of range");
    double p = std::clamp(static_cast<double>(probs[label]), 1e-12, 1.0);
    return -std::log(p);
}

template <typename T>
double cross_entropy(std::span<const T> probs, std::span<const float> onehot) {
    if (onehot.size() != probs.size()) throw ContractViolation("cross_entropy: one-hot length mismatch");
    auto it = std::find(onehot.begin(), onehot.end(), 1.0f);
    if (it == onehot.end()) throw ContractViolation("cross_entropy: label is not one-hot");
    return cross_entropy(probs, static_cast<std::size_t>(it - onehot.begin()));
}

/// Inverted dropout. Returns the mask (0 or 1/(1-rate) per entry); in eval mode
/// or at rate 0 the mask is all ones and `h` is untouched.
template <typename T>
Matrix<T> dropout(Matrix<T>& h, double rate, Rng& rng, bool train_mode) {
    if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout: rate must be in [0, 1)");
    Matrix<T> mask(h.rows(), h.cols(), T{1});
    if (!train_mode || rate == 0.0) return mask;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < h.size(); ++i) {
        T m = rng.uniform() < rate ? T{} : keep_scale;
        mask.data()[i] = m;
        h.data()[i] *= m;
    }
    return mask;
}

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment buffers, one per parameter tensor.
template <typename T>
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update; params and grads are aligned tensor lists.
template <typename T>
void adam_step(std::vector<std::span<T>> params, const std::vector<std::span<const T>>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw ContractViolation("adam_step: parameter/gradient count mismatch");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size() != grads[t].size()) throw ContractViolation("adam_step: tensor size mismatch");
        auto& m = state.m[t];
        auto& v = state.v[t];
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            const double g = static_cast<double>(grads[t][i]);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            params[t][i] = static_cast<T>(static_cast<double>(params[t][i]) - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
}

template <typename T>
void adam_step(ThreeLayer<T>& params, const ThreeLayer<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
    adam_step(params.tensors(), grads.tensors(), state, cfg);
}

}  // namespace semjson::nn
