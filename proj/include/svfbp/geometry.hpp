#pragma once

#include <cstdint>
#include <vector>

#include "svfbp/error.hpp"
#include "svfbp/vec3.hpp"

namespace svfbp {

/// Scalar cone-beam scan geometry. Lengths in millimeters. The world frame
/// is centered on the isocenter; the reconstruction grid is centered there
/// as well.
struct ConeBeamGeometry {
    double source_isocenter_distance = 750.0;
    double source_detector_distance = 1200.0;
    int detector_rows = 96, detector_cols = 96;
    double detector_spacing_y = 2.0, detector_spacing_x = 2.0;  // (row, col) pitch
    int vol_nz = 64, vol_ny = 64, vol_nx = 64;
    double vol_sz = 1.0, vol_sy = 1.0, vol_sx = 1.0;
    int num_projections = 100;
    double fov_radius = 32.0;  // support radius B

    void validate() const;

    double detector_width() const { return detector_cols * detector_spacing_x; }
    double detector_height() const { return detector_rows * detector_spacing_y; }
    double min_detector_spacing() const;
    double min_voxel_spacing() const;

    /// Detector x (mm) of a pixel column center, relative to detector center.
    double pixel_x(int c) const { return (c - 0.5 * (detector_cols - 1)) * detector_spacing_x; }
    /// Detector y (mm) of a pixel row center.
    double pixel_y(int r) const { return (r - 0.5 * (detector_rows - 1)) * detector_spacing_y; }

    /// Default support radius: half of the smallest volume extent.
    double default_fov_radius() const;
};

/// Sampling of the per-projection sinogram: line angles mu over [0, pi)
/// (endpoint exclusive) and signed line offsets s centered on zero.
struct SinogramGrid {
    int num_angles = 62;
    double angular_range = M_PI;
    int num_s = 137;
    double s_spacing = 2.0;
    double clip_radius = 96.0;  // line integration bound e

    void validate() const;

    double angle(int i) const { return i * angular_range / num_angles; }
    double s(int k) const { return (k - 0.5 * (num_s - 1)) * s_spacing; }
    double max_abs_s() const { return 0.5 * (num_s - 1) * s_spacing; }

    /// Grid matched to a detector: s pitch equal to the finer detector
    /// pitch, s range covering the detector diagonal, clip radius equal to
    /// the inscribed-circle radius, and an angle count scaled from the
    /// reference 360-angles-per-785-bins sampling ratio.
    static SinogramGrid for_detector(const ConeBeamGeometry& geom);
};

/// Per-projection detector coordinate frame. axis_z points from the
/// detector center toward the source; axis_x/axis_y span the detector
/// plane (columns/rows).
struct DetectorFrame {
    Vec3 origin{};  // detector center
    Vec3 axis_x{}, axis_y{}, axis_z{};
};

/// Discrete source orbit: positions a(lambda), detector frames, and index-
/// parameterized tangents a'(lambda).
struct Trajectory {
    std::vector<Vec3> sources;
    std::vector<DetectorFrame> frames;
    std::vector<Vec3> tangents;
    bool closed = false;

    std::size_t size() const { return sources.size(); }

    /// Quadrature weight of the lambda integral at index i: trapezoidal
    /// endpoint halving for open orbits, uniform for closed ones.
    double lambda_weight(std::size_t i) const {
        if (!closed && (i == 0 || i + 1 == sources.size())) return 0.5;
        return 1.0;
    }

    void validate(const ConeBeamGeometry& geom) const;
};

DetectorFrame detector_frame_for(const Vec3& source, const ConeBeamGeometry& geom);

/// Central differences over the lambda index; wrap-around when closed,
/// one-sided at the ends when open. Requires at least 3 sources.
std::vector<Vec3> tangents_of(const std::vector<Vec3>& sources, bool closed);

/// Equatorial circle, equally spaced angles, closed. Tangents are stored
/// unit-normalized.
Trajectory circular_trajectory(const ConeBeamGeometry& geom);

/// Sinusoidal orbit: gantry angle theta uniform over [-pi, pi), tilt
/// phi = phi_max * cos(freq * theta). Closed (freq is integral).
Trajectory sinusoidal_trajectory(const ConeBeamGeometry& geom, double phi_max, int freq);

/// Orthogonal arc (first ceil(arc_fraction*N) indices, sweeping the x-z
/// plane symmetrically about the equator) followed by the equatorial
/// circle. Open.
Trajectory circle_plus_arc_trajectory(const ConeBeamGeometry& geom, double arc_fraction = 0.125,
                                      double arc_span = 40.0 * M_PI / 180.0);

/// Random points on the sphere band |phi| <= tilt_range, reordered from
/// index 0 by greedy nearest-neighbor chaining. Open.
Trajectory random_nn_trajectory(const ConeBeamGeometry& geom, double tilt_range, std::uint64_t seed);

/// Content hash binding weight files and datasets to an orbit: FNV-1a over
/// the geometry scalars and the full source/frame/tangent coordinate list.
std::uint64_t trajectory_hash(const Trajectory& t, const ConeBeamGeometry& geom);

/// True when every tangent is orthogonal to its source vector and all
/// sources lie on the equator, i.e. the orbit is a circle.
bool is_circular(const Trajectory& t, double tol = 1e-6);

}  // namespace svfbp
