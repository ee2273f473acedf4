#include "svfbp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "svfbp/rng.hpp"

namespace svfbp {

void ConeBeamGeometry::validate() const {
    require(source_isocenter_distance > 0.0, "source_isocenter_distance must be > 0");
    require(source_detector_distance > source_isocenter_distance,
            "source_detector_distance must exceed source_isocenter_distance");
    require(fov_radius > 0.0 && fov_radius <= source_isocenter_distance,
            "fov_radius must be in (0, source_isocenter_distance]");
    require(detector_rows >= 2 && detector_cols >= 2, "detector shape must be >= 2 per dimension");
    require(vol_nz >= 2 && vol_ny >= 2 && vol_nx >= 2, "volume shape must be >= 2 per dimension");
    require(detector_spacing_x > 0.0 && detector_spacing_y > 0.0, "detector spacing must be > 0");
    require(vol_sx > 0.0 && vol_sy > 0.0 && vol_sz > 0.0, "voxel spacing must be > 0");
    require(num_projections >= 3, "num_projections must be >= 3");
}

double ConeBeamGeometry::min_detector_spacing() const {
    return std::min(detector_spacing_x, detector_spacing_y);
}

double ConeBeamGeometry::min_voxel_spacing() const { return std::min({vol_sx, vol_sy, vol_sz}); }

double ConeBeamGeometry::default_fov_radius() const {
    return 0.5 * std::min({vol_nz * vol_sz, vol_ny * vol_sy, vol_nx * vol_sx});
}

void SinogramGrid::validate() const {
    require(num_angles >= 2, "num_angles must be >= 2");
    require(num_s >= 3, "num_s must be >= 3");
    require(s_spacing > 0.0, "s_spacing must be > 0");
    require(angular_range > 0.0, "angular_range must be > 0");
    require(clip_radius > 0.0 && clip_radius <= max_abs_s() + 1e-9,
            "clip_radius must lie inside the s grid");
}

SinogramGrid SinogramGrid::for_detector(const ConeBeamGeometry& geom) {
    SinogramGrid g;
    g.s_spacing = geom.min_detector_spacing();
    double diag = std::hypot(geom.detector_width(), geom.detector_height());
    int n = static_cast<int>(std::ceil(diag / g.s_spacing));
    if (n % 2 == 0) ++n;  // odd count keeps a bin centered on s = 0
    g.num_s = n;
    g.num_angles = std::max(16, 2 * static_cast<int>(std::lround(n * 180.0 / 785.0)));
    g.angular_range = M_PI;
    g.clip_radius = 0.5 * std::min(geom.detector_width(), geom.detector_height());
    return g;
}

void Trajectory::validate(const ConeBeamGeometry& geom) const {
    require(sources.size() == frames.size() && sources.size() == tangents.size(),
            "trajectory arrays must have identical length");
    require(sources.size() >= 3, "trajectory needs at least 3 source positions");
    double sid = geom.source_isocenter_distance;
    for (const auto& s : sources) {
        require(std::abs(norm3(s) - sid) <= 1e-6 * sid, "source positions must lie on the orbit sphere");
    }
}

DetectorFrame detector_frame_for(const Vec3& source, const ConeBeamGeometry& geom) {
    double r = norm3(source);
    require(r > 0.0, "source position must not coincide with the isocenter");
    double d = geom.source_detector_distance;
    DetectorFrame f;
    f.origin = (1.0 - d / r) * source;
    f.axis_z = normalized(source - f.origin);
    // Up-vector convention: axis_y is world z projected onto the detector
    // plane; fall back to world x when looking along z.
    Vec3 up{0.0, 0.0, 1.0};
    if (std::abs(dot3(up, f.axis_z)) > 1.0 - 1e-9) up = Vec3{1.0, 0.0, 0.0};
    f.axis_y = normalized(up - dot3(up, f.axis_z) * f.axis_z);
    f.axis_x = cross3(f.axis_y, f.axis_z);
    return f;
}

std::vector<Vec3> tangents_of(const std::vector<Vec3>& sources, bool closed) {
    require(sources.size() >= 3, "tangents_of needs at least 3 sources");
    std::size_t n = sources.size();
    std::vector<Vec3> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (closed) {
            const Vec3& prev = sources[(i + n - 1) % n];
            const Vec3& next = sources[(i + 1) % n];
            t[i] = 0.5 * (next - prev);
        } else if (i == 0) {
            t[i] = sources[1] - sources[0];
        } else if (i + 1 == n) {
            t[i] = sources[n - 1] - sources[n - 2];
        } else {
            t[i] = 0.5 * (sources[i + 1] - sources[i - 1]);
        }
    }
    return t;
}

namespace {

Trajectory assemble(std::vector<Vec3> sources, bool closed, const ConeBeamGeometry& geom) {
    Trajectory t;
    t.sources = std::move(sources);
    t.closed = closed;
    t.tangents = tangents_of(t.sources, closed);
    t.frames.reserve(t.sources.size());
    for (const auto& s : t.sources) t.frames.push_back(detector_frame_for(s, geom));
    return t;
}

}  // namespace

Trajectory circular_trajectory(const ConeBeamGeometry& geom) {
    geom.validate();
    int n = geom.num_projections;
    double sid = geom.source_isocenter_distance;
    std::vector<Vec3> sources(n);
    for (int i = 0; i < n; ++i) {
        double a = 2.0 * M_PI * i / n;
        sources[i] = {sid * std::cos(a), sid * std::sin(a), 0.0};
    }
    Trajectory t = assemble(std::move(sources), true, geom);
    for (auto& v : t.tangents) v = normalized(v);
    return t;
}

Trajectory sinusoidal_trajectory(const ConeBeamGeometry& geom, double phi_max, int freq) {
    geom.validate();
    require(phi_max > 0.0 && phi_max < M_PI / 2.0, "phi_max must be in (0, pi/2)");
    require(freq >= 1, "freq must be >= 1");
    int n = geom.num_projections;
    double sid = geom.source_isocenter_distance;
    std::vector<Vec3> sources(n);
    for (int i = 0; i < n; ++i) {
        double theta = -M_PI + 2.0 * M_PI * i / n;
        double phi = phi_max * std::cos(freq * theta);
        sources[i] = {sid * std::cos(phi) * std::cos(theta), sid * std::cos(phi) * std::sin(theta),
                      sid * std::sin(phi)};
    }
    return assemble(std::move(sources), true, geom);
}

Trajectory circle_plus_arc_trajectory(const ConeBeamGeometry& geom, double arc_fraction,
                                      double arc_span) {
    geom.validate();
    require(arc_fraction > 0.0 && arc_fraction < 1.0, "arc_fraction must be in (0, 1)");
    require(arc_span > 0.0 && arc_span <= M_PI / 2.0, "arc_span must be in (0, pi/2]");
    int n = geom.num_projections;
    int n_arc = static_cast<int>(std::ceil(arc_fraction * n));
    int n_circ = n - n_arc;
    require(n_arc >= 2 && n_circ >= 2, "both arc and circle segments need at least 2 points");
    double sid = geom.source_isocenter_distance;
    std::vector<Vec3> sources;
    sources.reserve(n);
    // Arc in the x-z plane, swept symmetrically through the equator point.
    for (int i = 0; i < n_arc; ++i) {
        double phi = -0.5 * arc_span + arc_span * i / (n_arc - 1);
        sources.push_back({sid * std::cos(phi), 0.0, sid * std::sin(phi)});
    }
    for (int i = 0; i < n_circ; ++i) {
        double a = 2.0 * M_PI * i / n_circ;
        sources.push_back({sid * std::cos(a), sid * std::sin(a), 0.0});
    }
    return assemble(std::move(sources), false, geom);
}

Trajectory random_nn_trajectory(const ConeBeamGeometry& geom, double tilt_range, std::uint64_t seed) {
    geom.validate();
    require(tilt_range > 0.0, "tilt_range must be > 0");
    int n = geom.num_projections;
    double sid = geom.source_isocenter_distance;
    Rng rng(seed);
    std::vector<Vec3> pts(n);
    for (int i = 0; i < n; ++i) {
        double theta = rng.uniform(0.0, 2.0 * M_PI);
        double phi = rng.uniform(-tilt_range, tilt_range);
        pts[i] = {sid * std::cos(phi) * std::cos(theta), sid * std::cos(phi) * std::sin(theta),
                  sid * std::sin(phi)};
    }
    // Greedy nearest-neighbor chain on chord distance, seeded at the first
    // draw. Ties resolve to the lowest index.
    std::vector<Vec3> ordered;
    ordered.reserve(n);
    std::vector<bool> used(n, false);
    std::size_t cur = 0;
    used[0] = true;
    ordered.push_back(pts[0]);
    for (int step = 1; step < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (used[j]) continue;
            double d = norm3(pts[j] - pts[cur]);
            if (d < best) {
                best = d;
                best_i = j;
            }
        }
        used[best_i] = true;
        ordered.push_back(pts[best_i]);
        cur = best_i;
    }
    return assemble(std::move(ordered), false, geom);
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
}

void fnv_double(std::uint64_t& h, double v) { fnv_bytes(h, &v, sizeof(v)); }

void fnv_vec(std::uint64_t& h, const Vec3& v) {
    fnv_double(h, v[0]);
    fnv_double(h, v[1]);
    fnv_double(h, v[2]);
}

}  // namespace

std::uint64_t trajectory_hash(const Trajectory& t, const ConeBeamGeometry& geom) {
    std::uint64_t h = 1469598103934665603ull;
    fnv_double(h, geom.source_isocenter_distance);
    fnv_double(h, geom.source_detector_distance);
    fnv_double(h, geom.detector_rows);
    fnv_double(h, geom.detector_cols);
    fnv_double(h, geom.detector_spacing_y);
    fnv_double(h, geom.detector_spacing_x);
    fnv_double(h, static_cast<double>(t.sources.size()));
    fnv_double(h, t.closed ? 1.0 : 0.0);
    for (std::size_t i = 0; i < t.sources.size(); ++i) {
        fnv_vec(h, t.sources[i]);
        fnv_vec(h, t.tangents[i]);
        fnv_vec(h, t.frames[i].origin);
        fnv_vec(h, t.frames[i].axis_x);
        fnv_vec(h, t.frames[i].axis_y);
        fnv_vec(h, t.frames[i].axis_z);
    }
    return h;
}

bool is_circular(const Trajectory& t, double tol) {
    for (std::size_t i = 0; i < t.sources.size(); ++i) {
        double r = norm3(t.sources[i]);
        if (std::abs(t.sources[i][2]) > tol * r) return false;
        double tn = norm3(t.tangents[i]);
        if (tn == 0.0) return false;
        if (std::abs(dot3(t.sources[i], t.tangents[i])) > tol * r * tn) return false;
    }
    return t.closed;
}

}  // namespace svfbp
