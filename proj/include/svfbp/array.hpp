#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "svfbp/error.hpp"

namespace svfbp {

/// Dense row-major 2D array. Rows are the slow dimension.
template <typename T>
class Array2D {
public:
    Array2D() = default;
    Array2D(std::size_t rows, std::size_t cols, T value = T{})
        : rows_(rows), cols_(cols), v_(rows * cols, value) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }
    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T* data() noexcept { return v_.data(); }
    const T* data() const noexcept { return v_.data(); }
    T* row(std::size_t r) noexcept { return v_.data() + r * cols_; }
    const T* row(std::size_t r) const noexcept { return v_.data() + r * cols_; }

    void fill(T value) { std::fill(v_.begin(), v_.end(), value); }

    bool same_shape(const Array2D& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<T> v_;
};

/// Dense row-major 3D array indexed (i, j, k); k is contiguous.
template <typename T>
class Array3D {
public:
    Array3D() = default;
    Array3D(std::size_t n0, std::size_t n1, std::size_t n2, T value = T{})
        : n0_(n0), n1_(n1), n2_(n2), v_(n0 * n1 * n2, value) {}

    std::size_t n0() const noexcept { return n0_; }
    std::size_t n1() const noexcept { return n1_; }
    std::size_t n2() const noexcept { return n2_; }
    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    T& operator()(std::size_t i, std::size_t j, std::size_t k) { return v_[(i * n1_ + j) * n2_ + k]; }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return v_[(i * n1_ + j) * n2_ + k];
    }
    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T* data() noexcept { return v_.data(); }
    const T* data() const noexcept { return v_.data(); }
    /// Pointer to the contiguous (n1 x n2) slab at index i.
    T* slab(std::size_t i) noexcept { return v_.data() + i * n1_ * n2_; }
    const T* slab(std::size_t i) const noexcept { return v_.data() + i * n1_ * n2_; }

    void fill(T value) { std::fill(v_.begin(), v_.end(), value); }

    bool same_shape(const Array3D& o) const noexcept {
        return n0_ == o.n0_ && n1_ == o.n1_ && n2_ == o.n2_;
    }

private:
    std::size_t n0_ = 0, n1_ = 0, n2_ = 0;
    std::vector<T> v_;
};

/// Copy a slab of a 3D stack into a 2D array.
template <typename T>
Array2D<T> slice0(const Array3D<T>& a, std::size_t i) {
    Array2D<T> out(a.n1(), a.n2());
    std::copy(a.slab(i), a.slab(i) + a.n1() * a.n2(), out.data());
    return out;
}

template <typename T>
void set_slice0(Array3D<T>& a, std::size_t i, const Array2D<T>& s) {
    std::copy(s.data(), s.data() + s.size(), a.slab(i));
}

// --- small numeric helpers (double accumulation regardless of T) ---

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

template <typename T>
double dot(const Array2D<T>& a, const Array2D<T>& b) {
    return dot(a.data(), b.data(), a.size());
}

template <typename T>
double dot(const Array3D<T>& a, const Array3D<T>& b) {
    return dot(a.data(), b.data(), a.size());
}

template <typename A>
double norm2(const A& a) {
    return std::sqrt(dot(a, a));
}

template <typename T>
bool all_finite(const T* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(a[i]))) return false;
    return true;
}

template <typename A>
std::pair<double, double> min_max(const A& a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) {
        double v = static_cast<double>(a[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

}  // namespace svfbp
