#pragma once

#include <array>

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"

namespace svfbp {

/// Scalar field on a regular voxel grid centered on the isocenter.
/// data is indexed (z, y, x); spacing is (sz, sy, sx) in mm.
template <typename T>
struct Volume {
    Array3D<T> data;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    double fov_radius = 0.0;  // support radius B

    Volume() = default;
    Volume(std::size_t nz, std::size_t ny, std::size_t nx, std::array<double, 3> sp, double fov)
        : data(nz, ny, nx), spacing(sp), fov_radius(fov) {}

    double world_x(std::size_t ix) const { return (ix - 0.5 * (data.n2() - 1)) * spacing[2]; }
    double world_y(std::size_t iy) const { return (iy - 0.5 * (data.n1() - 1)) * spacing[1]; }
    double world_z(std::size_t iz) const { return (iz - 0.5 * (data.n0() - 1)) * spacing[0]; }
};

template <typename T>
Volume<T> make_volume(const ConeBeamGeometry& geom) {
    return Volume<T>(geom.vol_nz, geom.vol_ny, geom.vol_nx, {geom.vol_sz, geom.vol_sy, geom.vol_sx},
                     geom.fov_radius);
}

}  // namespace svfbp
