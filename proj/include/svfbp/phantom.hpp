#pragma once

// Synthetic phantoms: random geometric objects (ellipsoids, cuboids,
// cylinders) plus axial cylinders along the volume's first dimension, with
// optional Gaussian smoothing. Also the in-memory dataset builder that
// forward-projects phantoms along a trajectory.

#include <cstdint>
#include <vector>

#include "svfbp/geometry.hpp"
#include "svfbp/training.hpp"
#include "svfbp/volume.hpp"

namespace svfbp {

enum class ObjectType { ellipsoid, cuboid, cylinder };

struct PhantomConfig {
    int nz = 64, ny = 64, nx = 64;
    double sz = 1.0, sy = 1.0, sx = 1.0;
    double fov_radius = 32.0;
    int min_objects = 4, max_objects = 10;
    std::vector<ObjectType> object_types{ObjectType::ellipsoid, ObjectType::cuboid,
                                         ObjectType::cylinder};
    int min_axial_cylinders = 1, max_axial_cylinders = 3;
    double intensity_low = 0.2, intensity_high = 1.0;
    double semiaxis_low = 0.12, semiaxis_high = 0.35;  // fraction of fov_radius
    double smooth_sigma = 1.5;                         // voxels
    std::uint64_t seed = 0;

    static PhantomConfig for_geometry(const ConeBeamGeometry& geom, std::uint64_t seed);
    void validate() const;
};

using Rotation = std::array<std::array<double, 3>, 3>;

inline constexpr Rotation kIdentityRotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

/// Add intensity over the rotated solid { sum((R(p-c))_i / semi_i)^2 <= 1 }.
template <typename T>
void add_ellipsoid(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                   double intensity);

/// Axis-aligned-in-local-frame box |R(p-c)|_i <= semi_i.
template <typename T>
void add_cuboid(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                double intensity);

/// Elliptic cylinder along the local z axis, half-length semi_axes[2].
template <typename T>
void add_cylinder(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                  double intensity);

/// Separable Gaussian smoothing, sigma in voxels, truncated at 3 sigma,
/// symmetric boundary handling. No-op for sigma <= 0.
template <typename T>
void smooth_volume(Volume<T>& vol, double sigma);

template <typename T>
Volume<T> generate_phantom(const PhantomConfig& cfg);

/// Deterministic cluster of spheres used as an evaluation phantom.
template <typename T>
Volume<T> sphere_cluster_phantom(const ConeBeamGeometry& geom);

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// First round(train_fraction * n) samples train, rest validation.
DatasetSplit split_dataset(std::size_t n, double train_fraction = 0.8);

/// n phantoms (seeds seed+0 .. seed+n-1) forward-projected along the
/// trajectory.
template <typename T>
std::vector<TrainSample<T>> build_dataset(std::size_t n, const PhantomConfig& cfg,
                                          const Trajectory& traj, const ConeBeamGeometry& geom);

}  // namespace svfbp
