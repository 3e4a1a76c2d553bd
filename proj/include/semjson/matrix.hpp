#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "semjson/common.hpp"

namespace semjson {

/// Dense row-major matrix. Graphs here have at most a few dozen nodes, so every
/// kernel works on dense storage.
template <typename T>
class Matrix {
public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    const T& operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    Matrix<U> cast() const {
        Matrix<U> out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// out = a * b (out is overwritten).
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
    if (a.cols() != b.rows()) throw ContractViolation("matmul: inner dimensions differ");
    out = Matrix<T>(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T* o = out.row(i).data();
        const T* ar = a.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T s = ar[k];
            if (s == T{}) continue;
            const T* br = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> out;
    matmul(a, b, out);
    return out;
}

/// acc += a^T * b.
template <typename T>
void add_transposed_product(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& acc) {
    if (a.rows() != b.rows() || acc.rows() != a.cols() || acc.cols() != b.cols())
        throw ContractViolation("add_transposed_product: shape mismatch");
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const T* ar = a.row(i).data();
        const T* br = b.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T s = ar[k];
            if (s == T{}) continue;
            T* o = acc.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
}

/// out = a * b^T.
template <typename T>
Matrix<T> matmul_transposed(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.cols()) throw ContractViolation("matmul_transposed: shape mismatch");
    Matrix<T> out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const T* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const T* br = b.row(j).data();
            T s{};
            for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

}  // namespace semjson
