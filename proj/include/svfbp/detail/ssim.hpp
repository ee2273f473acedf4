#pragma once

// Windowed SSIM statistics shared by the metric and its gradient.
// Uniform (box) windows over fully-inside positions, biased moments,
// C1 = (0.01)^2, C2 = (0.03)^2 for unit dynamic range.

#include "svfbp/detail/boxsum.hpp"

namespace svfbp::detail {

inline constexpr double kSsimC1 = 1e-4;
inline constexpr double kSsimC2 = 9e-4;

struct SsimMaps {
    Array3D<double> mu_x, mu_y;
    Array3D<double> a1, a2, b1, b2;  // A1 A2 / (B1 B2) per window
    Array3D<double> ssim;
    double mean = 0.0;
    std::size_t windows = 0;
    double inv_n = 0.0;  // 1 / window voxel count
};

inline SsimMaps ssim_maps(const Array3D<double>& x, const Array3D<double>& y, int wz, int wy, int wx) {
    Array3D<double> xx(x.n0(), x.n1(), x.n2());
    Array3D<double> yy(x.n0(), x.n1(), x.n2());
    Array3D<double> xy(x.n0(), x.n1(), x.n2());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    SsimMaps m;
    double n = static_cast<double>(wz) * wy * wx;
    m.inv_n = 1.0 / n;
    Array3D<double> sx = box_sum(x, wz, wy, wx);
    Array3D<double> sy = box_sum(y, wz, wy, wx);
    Array3D<double> sxx = box_sum(xx, wz, wy, wx);
    Array3D<double> syy = box_sum(yy, wz, wy, wx);
    Array3D<double> sxy = box_sum(xy, wz, wy, wx);
    m.mu_x = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.mu_y = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.a1 = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.a2 = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.b1 = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.b2 = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.ssim = Array3D<double>(sx.n0(), sx.n1(), sx.n2());
    m.windows = sx.size();
    double total = 0.0;
    for (std::size_t i = 0; i < sx.size(); ++i) {
        double mux = sx[i] * m.inv_n;
        double muy = sy[i] * m.inv_n;
        double var_x = sxx[i] * m.inv_n - mux * mux;
        double var_y = syy[i] * m.inv_n - muy * muy;
        double cov = sxy[i] * m.inv_n - mux * muy;
        double a1 = 2.0 * (mux * muy) + kSsimC1;
        double b1 = mux * mux + muy * muy + kSsimC1;
        double a2 = 2.0 * cov + kSsimC2;
        double b2 = var_x + var_y + kSsimC2;
        double v = (a1 * a2) / (b1 * b2);
        m.mu_x[i] = mux;
        m.mu_y[i] = muy;
        m.a1[i] = a1;
        m.a2[i] = a2;
        m.b1[i] = b1;
        m.b2[i] = b2;
        m.ssim[i] = v;
        total += v;
    }
    m.mean = total / static_cast<double>(m.windows);
    return m;
}

/// Gradient of mean SSIM with respect to x. Window shape must match the
/// one used for the maps.
inline Array3D<double> ssim_mean_grad_x(const SsimMaps& m, const Array3D<double>& x,
                                        const Array3D<double>& y, int wz, int wy, int wx) {
    Array3D<double> c0(m.ssim.n0(), m.ssim.n1(), m.ssim.n2());
    Array3D<double> t2(m.ssim.n0(), m.ssim.n1(), m.ssim.n2());
    Array3D<double> u2(m.ssim.n0(), m.ssim.n1(), m.ssim.n2());
    for (std::size_t i = 0; i < m.ssim.size(); ++i) {
        double inv_b1b2 = 1.0 / (m.b1[i] * m.b2[i]);
        double t1v = m.a2[i] * inv_b1b2;
        double t2v = m.a1[i] * inv_b1b2;
        double u1v = m.ssim[i] / m.b1[i];
        double u2v = m.ssim[i] / m.b2[i];
        c0[i] = m.mu_y[i] * (t1v - t2v) - m.mu_x[i] * (u1v - u2v);
        t2[i] = t2v;
        u2[i] = u2v;
    }
    Array3D<double> s_c0 = box_spread(c0, wz, wy, wx);
    Array3D<double> s_t2 = box_spread(t2, wz, wy, wx);
    Array3D<double> s_u2 = box_spread(u2, wz, wy, wx);
    double scale = 2.0 * m.inv_n / static_cast<double>(m.windows);
    Array3D<double> g(x.n0(), x.n1(), x.n2());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = scale * (s_c0[i] + y[i] * s_t2[i] - x[i] * s_u2[i]);
    return g;
}

}  // namespace svfbp::detail
