#pragma once

// Sampling helpers shared by the parallel kernels and the serial reference
// implementations. Forward/adjoint pairs must enumerate identical sample
// positions and interpolation weights, so all of that lives here.

#include <cmath>
#include <cstddef>
#include <limits>

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"
#include "svfbp/vec3.hpp"
#include "svfbp/volume.hpp"

namespace svfbp::detail {

/// Bilinear gather at fractional pixel position (px, py); pixels outside
/// the grid contribute zero.
template <typename T>
inline double bilerp(const T* img, int rows, int cols, double px, double py) {
    int ix = static_cast<int>(std::floor(px));
    int iy = static_cast<int>(std::floor(py));
    double fx = px - ix, fy = py - iy;
    if (ix >= 0 && iy >= 0 && ix + 1 < cols && iy + 1 < rows) {
        const T* p0 = img + static_cast<std::size_t>(iy) * cols + ix;
        const T* p1 = p0 + cols;
        return (1 - fy) * ((1 - fx) * static_cast<double>(p0[0]) + fx * static_cast<double>(p0[1])) +
               fy * ((1 - fx) * static_cast<double>(p1[0]) + fx * static_cast<double>(p1[1]));
    }
    double acc = 0.0;
    if (iy >= 0 && iy < rows) {
        if (ix >= 0 && ix < cols)
            acc += (1 - fx) * (1 - fy) * static_cast<double>(img[static_cast<std::size_t>(iy) * cols + ix]);
        if (ix + 1 >= 0 && ix + 1 < cols)
            acc += fx * (1 - fy) * static_cast<double>(img[static_cast<std::size_t>(iy) * cols + ix + 1]);
    }
    if (iy + 1 >= 0 && iy + 1 < rows) {
        if (ix >= 0 && ix < cols)
            acc += (1 - fx) * fy * static_cast<double>(img[static_cast<std::size_t>(iy + 1) * cols + ix]);
        if (ix + 1 >= 0 && ix + 1 < cols)
            acc += fx * fy * static_cast<double>(img[static_cast<std::size_t>(iy + 1) * cols + ix + 1]);
    }
    return acc;
}

template <typename T>
inline double bilerp(const Array2D<T>& img, double px, double py) {
    return bilerp(img.data(), static_cast<int>(img.rows()), static_cast<int>(img.cols()), px, py);
}

/// Transpose of bilerp: scatter value into the four neighbors of (px, py).
inline void bilerp_scatter(double* img, int rows, int cols, double px, double py, double value) {
    int ix = static_cast<int>(std::floor(px));
    int iy = static_cast<int>(std::floor(py));
    double fx = px - ix, fy = py - iy;
    if (iy >= 0 && iy < rows) {
        double* row = img + static_cast<std::size_t>(iy) * cols;
        if (ix >= 0 && ix < cols) row[ix] += (1 - fx) * (1 - fy) * value;
        if (ix + 1 >= 0 && ix + 1 < cols) row[ix + 1] += fx * (1 - fy) * value;
    }
    if (iy + 1 >= 0 && iy + 1 < rows) {
        double* row = img + static_cast<std::size_t>(iy + 1) * cols;
        if (ix >= 0 && ix < cols) row[ix] += (1 - fx) * fy * value;
        if (ix + 1 >= 0 && ix + 1 < cols) row[ix + 1] += fx * fy * value;
    }
}

/// Line sampling lattice of the 2D Radon pair: every line (mu_i, s_k) is
/// sampled at n_steps midpoints over v in [-e, +e].
struct RadonSampling {
    int n_steps;
    double dt;  // actual step, <= the detector pitch

    RadonSampling(const SinogramGrid& grid, const ConeBeamGeometry& geom) {
        double target = geom.min_detector_spacing();
        n_steps = std::max(1, static_cast<int>(std::ceil(2.0 * grid.clip_radius / target)));
        dt = 2.0 * grid.clip_radius / n_steps;
    }

    double v(int j) const { return v0 + (j + 0.5) * dt; }
    double v0 = 0.0;  // set by bind()

    void bind(const SinogramGrid& grid) { v0 = -grid.clip_radius; }
};

/// Pixel-space mapping of Radon sample (s, v) at angle mu.
/// u axis = (cos mu, sin mu), v axis = (-sin mu, cos mu) in detector mm.
struct RadonAngle {
    double cx, cy;  // pixel coordinates of the detector center
    double ux, uy;  // u direction in pixel units
    double vx, vy;  // v direction in pixel units

    RadonAngle(double mu, const ConeBeamGeometry& geom) {
        cx = 0.5 * (geom.detector_cols - 1);
        cy = 0.5 * (geom.detector_rows - 1);
        double c = std::cos(mu), s = std::sin(mu);
        ux = c / geom.detector_spacing_x;
        uy = s / geom.detector_spacing_y;
        vx = -s / geom.detector_spacing_x;
        vy = c / geom.detector_spacing_y;
    }

    void position(double s, double v, double& px, double& py) const {
        px = cx + s * ux + v * vx;
        py = cy + s * uy + v * vy;
    }
};

/// Projection of a voxel center through source a onto the detector plane of
/// frame f, in fractional pixel coordinates. Returns false when the voxel
/// lies outside the support ball or at/behind the source plane.
struct VoxelProjector {
    Vec3 source;
    Vec3 ax, ay, az;
    double d;
    double cx, cy;
    double inv_sx, inv_sy;
    double fov2;

    VoxelProjector(const Vec3& src, const DetectorFrame& f, const ConeBeamGeometry& geom)
        : source(src), ax(f.axis_x), ay(f.axis_y), az(f.axis_z), d(geom.source_detector_distance) {
        cx = 0.5 * (geom.detector_cols - 1);
        cy = 0.5 * (geom.detector_rows - 1);
        inv_sx = 1.0 / geom.detector_spacing_x;
        inv_sy = 1.0 / geom.detector_spacing_y;
        fov2 = geom.fov_radius * geom.fov_radius;
    }

    bool project(double wx, double wy, double wz, double& px, double& py, double& inv_dist2) const {
        if (wx * wx + wy * wy + wz * wz > fov2) return false;
        double dx = wx - source[0], dy = wy - source[1], dz = wz - source[2];
        double denom = dx * az[0] + dy * az[1] + dz * az[2];
        if (denom >= -1e-9) return false;
        double t = -d / denom;
        double u = t * (dx * ax[0] + dy * ax[1] + dz * ax[2]);
        double v = t * (dx * ay[0] + dy * ay[1] + dz * ay[2]);
        px = cx + u * inv_sx;
        py = cy + v * inv_sy;
        inv_dist2 = 1.0 / (dx * dx + dy * dy + dz * dz);
        return true;
    }
};

/// Trilinear gather at fractional voxel index (pz, py, px); out-of-grid
/// corners contribute zero.
template <typename T>
inline double trilerp(const Array3D<T>& v, double pz, double py, double px) {
    int iz = static_cast<int>(std::floor(pz));
    int iy = static_cast<int>(std::floor(py));
    int ix = static_cast<int>(std::floor(px));
    double fz = pz - iz, fy = py - iy, fx = px - ix;
    int nz = static_cast<int>(v.n0()), ny = static_cast<int>(v.n1()), nx = static_cast<int>(v.n2());
    if (iz >= 0 && iy >= 0 && ix >= 0 && iz + 1 < nz && iy + 1 < ny && ix + 1 < nx) {
        std::size_t stride_y = v.n2();
        std::size_t stride_z = v.n1() * v.n2();
        const T* p = v.data() + iz * stride_z + iy * stride_y + ix;
        double c00 = (1 - fx) * static_cast<double>(p[0]) + fx * static_cast<double>(p[1]);
        double c10 = (1 - fx) * static_cast<double>(p[stride_y]) + fx * static_cast<double>(p[stride_y + 1]);
        double c01 = (1 - fx) * static_cast<double>(p[stride_z]) + fx * static_cast<double>(p[stride_z + 1]);
        double c11 = (1 - fx) * static_cast<double>(p[stride_z + stride_y]) +
                     fx * static_cast<double>(p[stride_z + stride_y + 1]);
        return (1 - fz) * ((1 - fy) * c00 + fy * c10) + fz * ((1 - fy) * c01 + fy * c11);
    }
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        int z = iz + dz;
        if (z < 0 || z >= nz) continue;
        double wz = dz ? fz : 1 - fz;
        for (int dy = 0; dy < 2; ++dy) {
            int y = iy + dy;
            if (y < 0 || y >= ny) continue;
            double wzy = wz * (dy ? fy : 1 - fy);
            for (int dx = 0; dx < 2; ++dx) {
                int x = ix + dx;
                if (x < 0 || x >= nx) continue;
                acc += wzy * (dx ? fx : 1 - fx) * static_cast<double>(v(z, y, x));
            }
        }
    }
    return acc;
}

/// Ray/axis-aligned-box clip with t restricted to [0, inf). Returns false
/// when the ray misses the box.
inline bool clip_ray(const Vec3& origin, const Vec3& dir, const Vec3& box_lo, const Vec3& box_hi,
                     double& t0, double& t1) {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(dir[i]) < 1e-12) {
            if (origin[i] < box_lo[i] || origin[i] > box_hi[i]) return false;
            continue;
        }
        double inv = 1.0 / dir[i];
        double a = (box_lo[i] - origin[i]) * inv;
        double b = (box_hi[i] - origin[i]) * inv;
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    return t1 > t0;
}

}  // namespace svfbp::detail
