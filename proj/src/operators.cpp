#include "svfbp/operators.hpp"

#include <vector>

#include "svfbp/detail/sampling.hpp"

namespace svfbp {

namespace {

void check_projection_shape(std::size_t rows, std::size_t cols, const ConeBeamGeometry& geom) {
    require(rows == static_cast<std::size_t>(geom.detector_rows) &&
                cols == static_cast<std::size_t>(geom.detector_cols),
            "projection shape does not match the detector");
}

// Chunk count for the radon adjoint reduction. Fixed (not tied to the
// thread count) so results do not depend on the number of threads.
constexpr int kAdjointChunks = 8;

}  // namespace

template <typename T>
Array2D<T> radon_2d(const Array2D<T>& proj, const SinogramGrid& grid, const ConeBeamGeometry& geom) {
    grid.validate();
    check_projection_shape(proj.rows(), proj.cols(), geom);
    detail::RadonSampling smp(grid, geom);
    smp.bind(grid);
    const int rows = static_cast<int>(proj.rows()), cols = static_cast<int>(proj.cols());
    Array2D<T> out(grid.num_angles, grid.num_s);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < grid.num_angles; ++i) {
        detail::RadonAngle ang(grid.angle(i), geom);
        T* orow = out.row(i);
        for (int k = 0; k < grid.num_s; ++k) {
            double s = grid.s(k);
            double acc = 0.0;
            for (int j = 0; j < smp.n_steps; ++j) {
                double px, py;
                ang.position(s, smp.v(j), px, py);
                acc += detail::bilerp(proj.data(), rows, cols, px, py);
            }
            orow[k] = static_cast<T>(acc * smp.dt);
        }
    }
    return out;
}

template <typename T>
Array2D<T> radon_2d_adjoint(const Array2D<T>& sino, const SinogramGrid& grid,
                            const ConeBeamGeometry& geom) {
    grid.validate();
    require(sino.rows() == static_cast<std::size_t>(grid.num_angles) &&
                sino.cols() == static_cast<std::size_t>(grid.num_s),
            "sinogram shape does not match the grid");
    detail::RadonSampling smp(grid, geom);
    smp.bind(grid);
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    const int nch = std::min(kAdjointChunks, grid.num_angles);
    const int per = (grid.num_angles + nch - 1) / nch;
    std::vector<std::vector<double>> partial(nch);
#pragma omp parallel for schedule(dynamic, 1)
    for (int ch = 0; ch < nch; ++ch) {
        auto& img = partial[ch];
        img.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        int i_lo = ch * per, i_hi = std::min(grid.num_angles, (ch + 1) * per);
        for (int i = i_lo; i < i_hi; ++i) {
            detail::RadonAngle ang(grid.angle(i), geom);
            const T* srow = sino.row(i);
            for (int k = 0; k < grid.num_s; ++k) {
                double s = grid.s(k);
                double val = static_cast<double>(srow[k]) * smp.dt;
                if (val == 0.0) continue;
                for (int j = 0; j < smp.n_steps; ++j) {
                    double px, py;
                    ang.position(s, smp.v(j), px, py);
                    detail::bilerp_scatter(img.data(), rows, cols, px, py, val);
                }
            }
        }
    }
    Array2D<T> out(rows, cols);
    for (std::size_t p = 0; p < out.size(); ++p) {
        double acc = 0.0;
        for (int ch = 0; ch < nch; ++ch) acc += partial[ch][p];
        out[p] = static_cast<T>(acc);
    }
    return out;
}

namespace {

struct VolumeBox {
    Vec3 lo, hi;
    double inv_sx, inv_sy, inv_sz;
    double ox, oy, oz;  // fractional-index offsets

    template <typename T>
    explicit VolumeBox(const Volume<T>& vol) {
        double ex = 0.5 * (vol.data.n2() - 1) * vol.spacing[2] + vol.spacing[2];
        double ey = 0.5 * (vol.data.n1() - 1) * vol.spacing[1] + vol.spacing[1];
        double ez = 0.5 * (vol.data.n0() - 1) * vol.spacing[0] + vol.spacing[0];
        lo = {-ex, -ey, -ez};
        hi = {ex, ey, ez};
        inv_sx = 1.0 / vol.spacing[2];
        inv_sy = 1.0 / vol.spacing[1];
        inv_sz = 1.0 / vol.spacing[0];
        ox = 0.5 * (vol.data.n2() - 1);
        oy = 0.5 * (vol.data.n1() - 1);
        oz = 0.5 * (vol.data.n0() - 1);
    }
};

/// Integrate one ray through the volume: midpoint rule at a step no larger
/// than max_step, trilinear samples.
template <typename T>
double integrate_ray(const Volume<T>& vol, const VolumeBox& box, const Vec3& source, const Vec3& pixel,
                     double max_step) {
    Vec3 dir = normalized(pixel - source);
    double t0, t1;
    if (!detail::clip_ray(source, dir, box.lo, box.hi, t0, t1)) return 0.0;
    int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / max_step)));
    double dt = (t1 - t0) / n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        double t = t0 + (j + 0.5) * dt;
        double px = (source[0] + t * dir[0]) * box.inv_sx + box.ox;
        double py = (source[1] + t * dir[1]) * box.inv_sy + box.oy;
        double pz = (source[2] + t * dir[2]) * box.inv_sz + box.oz;
        acc += detail::trilerp(vol.data, pz, py, px);
    }
    return acc * dt;
}

}  // namespace

template <typename T>
Array3D<T> cone_forward(const Volume<T>& vol, const Trajectory& traj, const ConeBeamGeometry& geom) {
    require(vol.data.n0() > 0, "cone_forward: empty volume");
    require(traj.size() >= 3, "cone_forward: trajectory too short");
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    VolumeBox box(vol);
    double max_step = 0.5 * vol.spacing[0];
    max_step = std::min(max_step, 0.5 * vol.spacing[1]);
    max_step = std::min(max_step, 0.5 * vol.spacing[2]);
    Array3D<T> out(n, rows, cols);
#pragma omp parallel for schedule(dynamic, 1)
    for (int l = 0; l < n; ++l) {
        const Vec3& src = traj.sources[l];
        const DetectorFrame& f = traj.frames[l];
        T* slab = out.slab(l);
        for (int r = 0; r < rows; ++r) {
            double y = geom.pixel_y(r);
            for (int c = 0; c < cols; ++c) {
                double x = geom.pixel_x(c);
                Vec3 pixel = f.origin + x * f.axis_x + y * f.axis_y;
                slab[static_cast<std::size_t>(r) * cols + c] =
                    static_cast<T>(integrate_ray(vol, box, src, pixel, max_step));
            }
        }
    }
    return out;
}

template <typename T>
Volume<T> cone_backproject(const Array3D<T>& projs, const Trajectory& traj,
                           const ConeBeamGeometry& geom, bool weight_by_distance) {
    require(projs.n0() == traj.size(), "one projection per trajectory entry required");
    check_projection_shape(projs.n1(), projs.n2(), geom);
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    Volume<T> vol = make_volume<T>(geom);
    std::vector<detail::VoxelProjector> vp;
    vp.reserve(n);
    for (int l = 0; l < n; ++l) vp.emplace_back(traj.sources[l], traj.frames[l], geom);
    const int nz = static_cast<int>(vol.data.n0()), ny = static_cast<int>(vol.data.n1()),
              nx = static_cast<int>(vol.data.n2());
#pragma omp parallel for collapse(2) schedule(static)
    for (int iz = 0; iz < nz; ++iz) {
        for (int iy = 0; iy < ny; ++iy) {
            double wz = vol.world_z(iz), wy = vol.world_y(iy);
            T* line = &vol.data(iz, iy, 0);
            for (int ix = 0; ix < nx; ++ix) {
                double wx = vol.world_x(ix);
                double acc = 0.0;
                for (int l = 0; l < n; ++l) {
                    double px, py, inv_d2;
                    if (!vp[l].project(wx, wy, wz, px, py, inv_d2)) continue;
                    double v = detail::bilerp(projs.slab(l), rows, cols, px, py);
                    double w = traj.lambda_weight(l);
                    if (weight_by_distance) w *= inv_d2;
                    acc += w * v;
                }
                line[ix] = static_cast<T>(acc);
            }
        }
    }
    return vol;
}

template <typename T>
Array3D<T> cone_backproject_adjoint(const Volume<T>& vol_grad, const Trajectory& traj,
                                    const ConeBeamGeometry& geom, bool weight_by_distance) {
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    const int nz = static_cast<int>(vol_grad.data.n0()), ny = static_cast<int>(vol_grad.data.n1()),
              nx = static_cast<int>(vol_grad.data.n2());
    Array3D<T> out(n, rows, cols);
#pragma omp parallel for schedule(dynamic, 1)
    for (int l = 0; l < n; ++l) {
        detail::VoxelProjector vp(traj.sources[l], traj.frames[l], geom);
        std::vector<double> acc(static_cast<std::size_t>(rows) * cols, 0.0);
        for (int iz = 0; iz < nz; ++iz) {
            double wz = vol_grad.world_z(iz);
            for (int iy = 0; iy < ny; ++iy) {
                double wy = vol_grad.world_y(iy);
                const T* line = &vol_grad.data(iz, iy, 0);
                for (int ix = 0; ix < nx; ++ix) {
                    double g = static_cast<double>(line[ix]);
                    if (g == 0.0) continue;
                    double px, py, inv_d2;
                    if (!vp.project(vol_grad.world_x(ix), wy, wz, px, py, inv_d2)) continue;
                    double w = traj.lambda_weight(l);
                    if (weight_by_distance) w *= inv_d2;
                    detail::bilerp_scatter(acc.data(), rows, cols, px, py, w * g);
                }
            }
        }
        T* slab = out.slab(l);
        for (std::size_t p = 0; p < acc.size(); ++p) slab[p] = static_cast<T>(acc[p]);
    }
    return out;
}

// --- serial reference implementations ---

namespace reference {

template <typename T>
Array2D<T> radon_2d(const Array2D<T>& proj, const SinogramGrid& grid, const ConeBeamGeometry& geom) {
    grid.validate();
    check_projection_shape(proj.rows(), proj.cols(), geom);
    detail::RadonSampling smp(grid, geom);
    smp.bind(grid);
    const int rows = static_cast<int>(proj.rows()), cols = static_cast<int>(proj.cols());
    Array2D<T> out(grid.num_angles, grid.num_s);
    for (int i = 0; i < grid.num_angles; ++i) {
        detail::RadonAngle ang(grid.angle(i), geom);
        for (int k = 0; k < grid.num_s; ++k) {
            double acc = 0.0;
            for (int j = 0; j < smp.n_steps; ++j) {
                double px, py;
                ang.position(grid.s(k), smp.v(j), px, py);
                acc += detail::bilerp(proj.data(), rows, cols, px, py);
            }
            out(i, k) = static_cast<T>(acc * smp.dt);
        }
    }
    return out;
}

template <typename T>
Array2D<T> radon_2d_adjoint(const Array2D<T>& sino, const SinogramGrid& grid,
                            const ConeBeamGeometry& geom) {
    grid.validate();
    detail::RadonSampling smp(grid, geom);
    smp.bind(grid);
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    std::vector<double> acc(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int i = 0; i < grid.num_angles; ++i) {
        detail::RadonAngle ang(grid.angle(i), geom);
        for (int k = 0; k < grid.num_s; ++k) {
            double val = static_cast<double>(sino(i, k)) * smp.dt;
            for (int j = 0; j < smp.n_steps; ++j) {
                double px, py;
                ang.position(grid.s(k), smp.v(j), px, py);
                detail::bilerp_scatter(acc.data(), rows, cols, px, py, val);
            }
        }
    }
    Array2D<T> out(rows, cols);
    for (std::size_t p = 0; p < acc.size(); ++p) out[p] = static_cast<T>(acc[p]);
    return out;
}

template <typename T>
Array3D<T> cone_forward(const Volume<T>& vol, const Trajectory& traj, const ConeBeamGeometry& geom) {
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    VolumeBox box(vol);
    double max_step = 0.5 * std::min({vol.spacing[0], vol.spacing[1], vol.spacing[2]});
    Array3D<T> out(n, rows, cols);
    for (int l = 0; l < n; ++l) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                Vec3 pixel = traj.frames[l].origin + geom.pixel_x(c) * traj.frames[l].axis_x +
                             geom.pixel_y(r) * traj.frames[l].axis_y;
                out(l, r, c) =
                    static_cast<T>(integrate_ray(vol, box, traj.sources[l], pixel, max_step));
            }
        }
    }
    return out;
}

template <typename T>
Volume<T> cone_backproject(const Array3D<T>& projs, const Trajectory& traj,
                           const ConeBeamGeometry& geom, bool weight_by_distance) {
    require(projs.n0() == traj.size(), "one projection per trajectory entry required");
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    Volume<T> vol = make_volume<T>(geom);
    for (std::size_t iz = 0; iz < vol.data.n0(); ++iz) {
        for (std::size_t iy = 0; iy < vol.data.n1(); ++iy) {
            for (std::size_t ix = 0; ix < vol.data.n2(); ++ix) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l) {
                    detail::VoxelProjector vp(traj.sources[l], traj.frames[l], geom);
                    double px, py, inv_d2;
                    if (!vp.project(vol.world_x(ix), vol.world_y(iy), vol.world_z(iz), px, py, inv_d2))
                        continue;
                    double w = traj.lambda_weight(l);
                    if (weight_by_distance) w *= inv_d2;
                    acc += w * detail::bilerp(projs.slab(l), rows, cols, px, py);
                }
                vol.data(iz, iy, ix) = static_cast<T>(acc);
            }
        }
    }
    return vol;
}

template <typename T>
Array3D<T> cone_backproject_adjoint(const Volume<T>& vol_grad, const Trajectory& traj,
                                    const ConeBeamGeometry& geom, bool weight_by_distance) {
    const int n = static_cast<int>(traj.size());
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    Array3D<T> out(n, rows, cols);
    for (int l = 0; l < n; ++l) {
        detail::VoxelProjector vp(traj.sources[l], traj.frames[l], geom);
        std::vector<double> acc(static_cast<std::size_t>(rows) * cols, 0.0);
        for (std::size_t iz = 0; iz < vol_grad.data.n0(); ++iz) {
            for (std::size_t iy = 0; iy < vol_grad.data.n1(); ++iy) {
                for (std::size_t ix = 0; ix < vol_grad.data.n2(); ++ix) {
                    double g = static_cast<double>(vol_grad.data(iz, iy, ix));
                    if (g == 0.0) continue;
                    double px, py, inv_d2;
                    if (!vp.project(vol_grad.world_x(ix), vol_grad.world_y(iy), vol_grad.world_z(iz),
                                    px, py, inv_d2))
                        continue;
                    double w = traj.lambda_weight(l);
                    if (weight_by_distance) w *= inv_d2;
                    detail::bilerp_scatter(acc.data(), rows, cols, px, py, w * g);
                }
            }
        }
        T* slab = out.slab(l);
        for (std::size_t p = 0; p < acc.size(); ++p) slab[p] = static_cast<T>(acc[p]);
    }
    return out;
}

}  // namespace reference

// explicit instantiations
#define SVFBP_INSTANTIATE_OPERATORS(T)                                                              \
    template Array2D<T> radon_2d<T>(const Array2D<T>&, const SinogramGrid&, const ConeBeamGeometry&); \
    template Array2D<T> radon_2d_adjoint<T>(const Array2D<T>&, const SinogramGrid&,                 \
                                            const ConeBeamGeometry&);                               \
    template Array3D<T> cone_forward<T>(const Volume<T>&, const Trajectory&, const ConeBeamGeometry&); \
    template Volume<T> cone_backproject<T>(const Array3D<T>&, const Trajectory&,                    \
                                           const ConeBeamGeometry&, bool);                          \
    template Array3D<T> cone_backproject_adjoint<T>(const Volume<T>&, const Trajectory&,            \
                                                    const ConeBeamGeometry&, bool);                 \
    template Array2D<T> reference::radon_2d<T>(const Array2D<T>&, const SinogramGrid&,              \
                                               const ConeBeamGeometry&);                            \
    template Array2D<T> reference::radon_2d_adjoint<T>(const Array2D<T>&, const SinogramGrid&,      \
                                                       const ConeBeamGeometry&);                    \
    template Array3D<T> reference::cone_forward<T>(const Volume<T>&, const Trajectory&,             \
                                                   const ConeBeamGeometry&);                        \
    template Volume<T> reference::cone_backproject<T>(const Array3D<T>&, const Trajectory&,         \
                                                      const ConeBeamGeometry&, bool);               \
    template Array3D<T> reference::cone_backproject_adjoint<T>(const Volume<T>&, const Trajectory&, \
                                                               const ConeBeamGeometry&, bool);

SVFBP_INSTANTIATE_OPERATORS(float)
SVFBP_INSTANTIATE_OPERATORS(double)

}  // namespace svfbp
