#pragma once

// Primitive linear operators of the reconstruction chain. Every operator
// with a non-diagonal matrix comes paired with its exact numerical
// transpose so gradients can be propagated through the 2D chain without
// approximation. The 3D cone-beam forward and backprojectors are
// independent discretizations (ray-driven vs voxel-driven) and are *not*
// exact transposes of each other; cone_backproject_adjoint is the exact
// transpose of cone_backproject.

#include <vector>

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"
#include "svfbp/volume.hpp"

namespace svfbp {

// --- diagonal weights (self-adjoint) ---

/// out(x,y) = in(x,y) * D / sqrt(x^2 + y^2 + D^2)
template <typename T>
Array2D<T> cosine_weight(const Array2D<T>& p, const ConeBeamGeometry& geom);

/// out(mu,s) = in(mu,s) * (s^2 + D^2) / D^2
template <typename T>
Array2D<T> sino_weight(const Array2D<T>& s, const SinogramGrid& grid, const ConeBeamGeometry& geom);

/// out(x,y) = in(x,y) * (x^2 + y^2 + D^2)
template <typename T>
Array2D<T> detector_weight(const Array2D<T>& p, const ConeBeamGeometry& geom);

// --- differentiation along s ---

/// Central differences along s, one-sided at the boundaries.
template <typename T>
Array2D<T> diff_s(const Array2D<T>& sino, double s_spacing);

/// Exact matrix transpose of diff_s (boundary rows included).
template <typename T>
Array2D<T> diff_s_adjoint(const Array2D<T>& sino, double s_spacing);

// --- Gaussian smoothing along s ---

/// Normalized truncated Gaussian, odd size. sigma <= 0 or size <= 1 yields
/// the identity.
struct GaussianKernel {
    std::vector<double> taps;
    int half = 0;

    static GaussianKernel make(double sigma, int kernel_size);
    bool identity() const { return taps.empty(); }
};

/// 1D convolution along s with symmetric (edge-repeating) reflect padding.
template <typename T>
Array2D<T> gaussian_smooth_s(const Array2D<T>& sino, const GaussianKernel& k);

/// Exact transpose of the reflect-padded convolution.
template <typename T>
Array2D<T> gaussian_smooth_s_adjoint(const Array2D<T>& sino, const GaussianKernel& k);

// --- 2D Radon pair (parallel beam over the detector plane) ---

/// Line integrals over v in [-e, +e] of lines {u = s_k} at angles mu_i,
/// bilinear sampling at a step no coarser than the detector pitch.
template <typename T>
Array2D<T> radon_2d(const Array2D<T>& proj, const SinogramGrid& grid, const ConeBeamGeometry& geom);

/// Exact numerical transpose of radon_2d.
template <typename T>
Array2D<T> radon_2d_adjoint(const Array2D<T>& sino, const SinogramGrid& grid,
                            const ConeBeamGeometry& geom);

// --- 3D cone-beam operators ---

/// Ray-driven forward projection: one ray per detector pixel, trilinear
/// sampling at a step of at most half the smallest voxel pitch, scaled by
/// the step length (mm). Output stack is (num_projections, rows, cols).
template <typename T>
Array3D<T> cone_forward(const Volume<T>& vol, const Trajectory& traj, const ConeBeamGeometry& geom);

/// Voxel-driven backprojection with lambda quadrature weights; multiplies
/// by 1/|x - a(lambda)|^2 when weight_by_distance. Voxels outside the
/// support ball are zero.
template <typename T>
Volume<T> cone_backproject(const Array3D<T>& projs, const Trajectory& traj,
                           const ConeBeamGeometry& geom, bool weight_by_distance);

/// Exact transpose of cone_backproject: maps a volume to a projection
/// stack (used to pull volume-domain gradients back to the detector).
template <typename T>
Array3D<T> cone_backproject_adjoint(const Volume<T>& vol_grad, const Trajectory& traj,
                                    const ConeBeamGeometry& geom, bool weight_by_distance);

namespace reference {

// Serial reference implementations of the parallel kernels above, kept
// deliberately simple; the test suite checks the parallel kernels against
// these and the benchmark target compares their speed.

template <typename T>
Array2D<T> radon_2d(const Array2D<T>& proj, const SinogramGrid& grid, const ConeBeamGeometry& geom);

template <typename T>
Array2D<T> radon_2d_adjoint(const Array2D<T>& sino, const SinogramGrid& grid,
                            const ConeBeamGeometry& geom);

template <typename T>
Array3D<T> cone_forward(const Volume<T>& vol, const Trajectory& traj, const ConeBeamGeometry& geom);

template <typename T>
Volume<T> cone_backproject(const Array3D<T>& projs, const Trajectory& traj,
                           const ConeBeamGeometry& geom, bool weight_by_distance);

template <typename T>
Array3D<T> cone_backproject_adjoint(const Volume<T>& vol_grad, const Trajectory& traj,
                                    const ConeBeamGeometry& geom, bool weight_by_distance);

}  // namespace reference

// --- inline definitions of the pointwise operators ---

template <typename T>
Array2D<T> cosine_weight(const Array2D<T>& p, const ConeBeamGeometry& geom) {
    double d2 = geom.source_detector_distance * geom.source_detector_distance;
    Array2D<T> out(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double y = geom.pixel_y(static_cast<int>(r));
        for (std::size_t c = 0; c < p.cols(); ++c) {
            double x = geom.pixel_x(static_cast<int>(c));
            double w = geom.source_detector_distance / std::sqrt(x * x + y * y + d2);
            out(r, c) = static_cast<T>(w * static_cast<double>(p(r, c)));
        }
    }
    return out;
}

template <typename T>
Array2D<T> sino_weight(const Array2D<T>& s, const SinogramGrid& grid, const ConeBeamGeometry& geom) {
    double d2 = geom.source_detector_distance * geom.source_detector_distance;
    Array2D<T> out(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        for (std::size_t k = 0; k < s.cols(); ++k) {
            double sk = grid.s(static_cast<int>(k));
            out(i, k) = static_cast<T>((sk * sk + d2) / d2 * static_cast<double>(s(i, k)));
        }
    }
    return out;
}

template <typename T>
Array2D<T> detector_weight(const Array2D<T>& p, const ConeBeamGeometry& geom) {
    double d2 = geom.source_detector_distance * geom.source_detector_distance;
    Array2D<T> out(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double y = geom.pixel_y(static_cast<int>(r));
        for (std::size_t c = 0; c < p.cols(); ++c) {
            double x = geom.pixel_x(static_cast<int>(c));
            out(r, c) = static_cast<T>((x * x + y * y + d2) * static_cast<double>(p(r, c)));
        }
    }
    return out;
}

template <typename T>
Array2D<T> diff_s(const Array2D<T>& sino, double s_spacing) {
    require(sino.cols() >= 3, "diff_s needs at least 3 s samples");
    std::size_t n = sino.cols();
    double inv2h = 1.0 / (2.0 * s_spacing), invh = 1.0 / s_spacing;
    Array2D<T> out(sino.rows(), n);
    for (std::size_t r = 0; r < sino.rows(); ++r) {
        const T* in = sino.row(r);
        T* o = out.row(r);
        o[0] = static_cast<T>((static_cast<double>(in[1]) - static_cast<double>(in[0])) * invh);
        for (std::size_t k = 1; k + 1 < n; ++k)
            o[k] = static_cast<T>((static_cast<double>(in[k + 1]) - static_cast<double>(in[k - 1])) *
                                  inv2h);
        o[n - 1] =
            static_cast<T>((static_cast<double>(in[n - 1]) - static_cast<double>(in[n - 2])) * invh);
    }
    return out;
}

template <typename T>
Array2D<T> diff_s_adjoint(const Array2D<T>& sino, double s_spacing) {
    require(sino.cols() >= 3, "diff_s_adjoint needs at least 3 s samples");
    std::size_t n = sino.cols();
    double inv2h = 1.0 / (2.0 * s_spacing), invh = 1.0 / s_spacing;
    Array2D<T> out(sino.rows(), n);
    std::vector<double> acc(n);
    for (std::size_t r = 0; r < sino.rows(); ++r) {
        const T* in = sino.row(r);
        std::fill(acc.begin(), acc.end(), 0.0);
        // transpose of the one-sided boundary rows
        acc[0] -= static_cast<double>(in[0]) * invh;
        acc[1] += static_cast<double>(in[0]) * invh;
        acc[n - 2] -= static_cast<double>(in[n - 1]) * invh;
        acc[n - 1] += static_cast<double>(in[n - 1]) * invh;
        // transpose of the central-difference interior
        for (std::size_t k = 1; k + 1 < n; ++k) {
            double v = static_cast<double>(in[k]) * inv2h;
            acc[k + 1] += v;
            acc[k - 1] -= v;
        }
        T* o = out.row(r);
        for (std::size_t k = 0; k < n; ++k) o[k] = static_cast<T>(acc[k]);
    }
    return out;
}

inline GaussianKernel GaussianKernel::make(double sigma, int kernel_size) {
    GaussianKernel k;
    if (sigma <= 0.0 || kernel_size <= 1) return k;
    require(kernel_size % 2 == 1, "Gaussian kernel size must be odd");
    k.half = kernel_size / 2;
    k.taps.resize(kernel_size);
    double sum = 0.0;
    for (int j = -k.half; j <= k.half; ++j) {
        double w = std::exp(-0.5 * (j * j) / (sigma * sigma));
        k.taps[j + k.half] = w;
        sum += w;
    }
    for (auto& w : k.taps) w /= sum;
    return k;
}

namespace detail {
/// Symmetric reflection (edge repeating) of index i into [0, n).
inline std::size_t reflect_index(long i, long n) {
    long period = 2 * n;
    long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - 1 - m;
    return static_cast<std::size_t>(m);
}
}  // namespace detail

template <typename T>
Array2D<T> gaussian_smooth_s(const Array2D<T>& sino, const GaussianKernel& k) {
    if (k.identity()) return sino;
    std::size_t n = sino.cols();
    Array2D<T> out(sino.rows(), n);
    for (std::size_t r = 0; r < sino.rows(); ++r) {
        const T* in = sino.row(r);
        T* o = out.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = -k.half; j <= k.half; ++j) {
                std::size_t idx = detail::reflect_index(static_cast<long>(i) + j, static_cast<long>(n));
                acc += k.taps[j + k.half] * static_cast<double>(in[idx]);
            }
            o[i] = static_cast<T>(acc);
        }
    }
    return out;
}

template <typename T>
Array2D<T> gaussian_smooth_s_adjoint(const Array2D<T>& sino, const GaussianKernel& k) {
    if (k.identity()) return sino;
    std::size_t n = sino.cols();
    Array2D<T> out(sino.rows(), n);
    std::vector<double> acc(n);
    for (std::size_t r = 0; r < sino.rows(); ++r) {
        const T* in = sino.row(r);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double v = static_cast<double>(in[i]);
            for (int j = -k.half; j <= k.half; ++j) {
                std::size_t idx = detail::reflect_index(static_cast<long>(i) + j, static_cast<long>(n));
                acc[idx] += k.taps[j + k.half] * v;
            }
        }
        T* o = out.row(r);
        for (std::size_t i = 0; i < n; ++i) o[i] = static_cast<T>(acc[i]);
    }
    return out;
}

}  // namespace svfbp
