#pragma once

// Separable moving-window sums used by the SSIM implementation. All in
// double. "Valid" mode: only windows fully inside the array.

#include "svfbp/array.hpp"

namespace svfbp::detail {

/// Extents of the two non-axis dimensions, in index order.
inline void other_dims(int axis, const Array3D<double>& a, std::size_t& na, std::size_t& nb) {
    if (axis == 0) { na = a.n1(); nb = a.n2(); }
    else if (axis == 1) { na = a.n0(); nb = a.n2(); }
    else { na = a.n0(); nb = a.n1(); }
}

inline double get_line(const Array3D<double>& arr, int axis, std::size_t a, std::size_t b,
                       std::size_t t) {
    if (axis == 0) return arr(t, a, b);
    if (axis == 1) return arr(a, t, b);
    return arr(a, b, t);
}

inline void put_line(Array3D<double>& arr, int axis, std::size_t a, std::size_t b, std::size_t t,
                     double v) {
    if (axis == 0) arr(t, a, b) = v;
    else if (axis == 1) arr(a, t, b) = v;
    else arr(a, b, t) = v;
}

/// Valid moving sum of length w along the given axis.
inline Array3D<double> moving_sum_axis(const Array3D<double>& in, int axis, int w) {
    std::size_t n[3] = {in.n0(), in.n1(), in.n2()};
    std::size_t m[3] = {n[0], n[1], n[2]};
    m[axis] = n[axis] - w + 1;
    Array3D<double> out(m[0], m[1], m[2]);
    std::size_t na, nb;
    other_dims(axis, in, na, nb);
    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t b = 0; b < nb; ++b) {
            double s = 0.0;
            for (int t = 0; t < w; ++t) s += get_line(in, axis, a, b, t);
            put_line(out, axis, a, b, 0, s);
            for (std::size_t t = 1; t < m[axis]; ++t) {
                s += get_line(in, axis, a, b, t + w - 1) - get_line(in, axis, a, b, t - 1);
                put_line(out, axis, a, b, t, s);
            }
        }
    }
    return out;
}

/// Valid box sum with per-axis window sizes.
inline Array3D<double> box_sum(const Array3D<double>& in, int wz, int wy, int wx) {
    Array3D<double> a = moving_sum_axis(in, 2, wx);
    a = moving_sum_axis(a, 1, wy);
    return moving_sum_axis(a, 0, wz);
}

/// Adjoint of the valid moving sum: out[j] = sum of in[p] over the windows
/// p that covered position j. Output is w-1 longer along the axis.
inline Array3D<double> spread_sum_axis(const Array3D<double>& in, int axis, int w) {
    std::size_t n[3] = {in.n0(), in.n1(), in.n2()};
    std::size_t m[3] = {n[0], n[1], n[2]};
    m[axis] = n[axis] + w - 1;
    Array3D<double> out(m[0], m[1], m[2], 0.0);
    std::size_t na, nb;
    other_dims(axis, in, na, nb);
    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t b = 0; b < nb; ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < m[axis]; ++j) {
                if (j < n[axis]) s += get_line(in, axis, a, b, j);
                if (j >= static_cast<std::size_t>(w)) s -= get_line(in, axis, a, b, j - w);
                put_line(out, axis, a, b, j, s);
            }
        }
    }
    return out;
}

/// Adjoint of box_sum.
inline Array3D<double> box_spread(const Array3D<double>& in, int wz, int wy, int wx) {
    Array3D<double> a = spread_sum_axis(in, 0, wz);
    a = spread_sum_axis(a, 1, wy);
    return spread_sum_axis(a, 2, wx);
}

}  // namespace svfbp::detail
