#pragma once

#include <Eigen/Core>
#include <numeric>
#include <vector>

#include "isarxai/common.hpp"

namespace isarxai {

template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), T{});
    }

    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t numel() const { return data.size(); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    void zero() { std::fill(data.begin(), data.end(), T{}); }
};

namespace detail {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// C[m x n] = A[m x k] * B[k x n], all row-major.
template <typename T>
void mat_mul(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    detail::MatMap<T> C(c, m, n);
    detail::ConstMatMap<T> A(a, m, k), B(b, k, n);
    C.noalias() = A * B;
}

// C[m x n] += A[m x k] * B[k x n].
template <typename T>
void mat_mul_add(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    detail::MatMap<T> C(c, m, n);
    detail::ConstMatMap<T> A(a, m, k), B(b, k, n);
    C.noalias() += A * B;
}

// C[m x n] = A^T * B with A stored [k x m] row-major.
template <typename T>
void mat_mul_at_b(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    detail::MatMap<T> C(c, m, n);
    detail::ConstMatMap<T> A(a, k, m), B(b, k, n);
    C.noalias() = A.transpose() * B;
}

// C[m x n] += A * B^T with B stored [n x k] row-major.
template <typename T>
void mat_mul_add_a_bt(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
    detail::MatMap<T> C(c, m, n);
    detail::ConstMatMap<T> A(a, m, k), B(b, n, k);
    C.noalias() += A * B.transpose();
}

}  // namespace isarxai
