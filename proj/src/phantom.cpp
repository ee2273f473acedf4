#include "svfbp/phantom.hpp"

#include <cmath>

#include "svfbp/operators.hpp"
#include "svfbp/rng.hpp"

namespace svfbp {

PhantomConfig PhantomConfig::for_geometry(const ConeBeamGeometry& geom, std::uint64_t seed) {
    PhantomConfig c;
    c.nz = geom.vol_nz;
    c.ny = geom.vol_ny;
    c.nx = geom.vol_nx;
    c.sz = geom.vol_sz;
    c.sy = geom.vol_sy;
    c.sx = geom.vol_sx;
    c.fov_radius = geom.fov_radius;
    c.seed = seed;
    return c;
}

void PhantomConfig::validate() const {
    require(nz >= 2 && ny >= 2 && nx >= 2, "phantom volume shape must be >= 2 per dimension");
    require(min_objects >= 0 && max_objects >= min_objects, "bad object count range");
    require(min_axial_cylinders >= 0 && max_axial_cylinders >= min_axial_cylinders,
            "bad axial cylinder count range");
    require(intensity_low <= intensity_high, "bad intensity range");
    require(semiaxis_low > 0.0 && semiaxis_low <= semiaxis_high, "bad semi-axis range");
    require(smooth_sigma >= 0.0, "smooth_sigma must be >= 0");
    require(!object_types.empty() || max_objects == 0, "object_types must not be empty");
    require(fov_radius > 0.0, "fov_radius must be > 0");
}

namespace {

/// Apply fn(local_coords) over the voxel grid; adds intensity where fn
/// reports inside. Local coords are R * (p - c).
template <typename T, typename Inside>
void add_solid(Volume<T>& vol, const Vec3& center, const Rotation& rot, double intensity,
               Inside inside) {
    for (std::size_t iz = 0; iz < vol.data.n0(); ++iz) {
        double pz = vol.world_z(iz) - center[2];
        for (std::size_t iy = 0; iy < vol.data.n1(); ++iy) {
            double py = vol.world_y(iy) - center[1];
            for (std::size_t ix = 0; ix < vol.data.n2(); ++ix) {
                double px = vol.world_x(ix) - center[0];
                double lx = rot[0][0] * px + rot[0][1] * py + rot[0][2] * pz;
                double ly = rot[1][0] * px + rot[1][1] * py + rot[1][2] * pz;
                double lz = rot[2][0] * px + rot[2][1] * py + rot[2][2] * pz;
                if (inside(lx, ly, lz))
                    vol.data(iz, iy, ix) = static_cast<T>(static_cast<double>(vol.data(iz, iy, ix)) + intensity);
            }
        }
    }
}

}  // namespace

template <typename T>
void add_ellipsoid(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                   double intensity) {
    add_solid(vol, center, rot, intensity, [&](double x, double y, double z) {
        double a = x / semi_axes[0], b = y / semi_axes[1], c = z / semi_axes[2];
        return a * a + b * b + c * c <= 1.0;
    });
}

template <typename T>
void add_cuboid(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                double intensity) {
    add_solid(vol, center, rot, intensity, [&](double x, double y, double z) {
        return std::abs(x) <= semi_axes[0] && std::abs(y) <= semi_axes[1] && std::abs(z) <= semi_axes[2];
    });
}

template <typename T>
void add_cylinder(Volume<T>& vol, const Vec3& center, const Vec3& semi_axes, const Rotation& rot,
                  double intensity) {
    add_solid(vol, center, rot, intensity, [&](double x, double y, double z) {
        double a = x / semi_axes[0], b = y / semi_axes[1];
        return a * a + b * b <= 1.0 && std::abs(z) <= semi_axes[2];
    });
}

template <typename T>
void smooth_volume(Volume<T>& vol, double sigma) {
    if (sigma <= 0.0) return;
    int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * half + 1);
    double sum = 0.0;
    for (int j = -half; j <= half; ++j) {
        taps[j + half] = std::exp(-0.5 * j * j / (sigma * sigma));
        sum += taps[j + half];
    }
    for (auto& t : taps) t /= sum;

    auto reflect = [](long i, long n) {
        long p = 2 * n;
        long m = i % p;
        if (m < 0) m += p;
        return static_cast<std::size_t>(m < n ? m : p - 1 - m);
    };

    const long n0 = static_cast<long>(vol.data.n0());
    const long n1 = static_cast<long>(vol.data.n1());
    const long n2 = static_cast<long>(vol.data.n2());
    Array3D<T>& d = vol.data;
    Array3D<T> tmp(d.n0(), d.n1(), d.n2());
    // axis 2
    for (long z = 0; z < n0; ++z)
        for (long y = 0; y < n1; ++y)
            for (long x = 0; x < n2; ++x) {
                double acc = 0.0;
                for (int j = -half; j <= half; ++j)
                    acc += taps[j + half] * static_cast<double>(d(z, y, reflect(x + j, n2)));
                tmp(z, y, x) = static_cast<T>(acc);
            }
    // axis 1
    for (long z = 0; z < n0; ++z)
        for (long y = 0; y < n1; ++y)
            for (long x = 0; x < n2; ++x) {
                double acc = 0.0;
                for (int j = -half; j <= half; ++j)
                    acc += taps[j + half] * static_cast<double>(tmp(z, reflect(y + j, n1), x));
                d(z, y, x) = static_cast<T>(acc);
            }
    // axis 0
    for (long z = 0; z < n0; ++z)
        for (long y = 0; y < n1; ++y)
            for (long x = 0; x < n2; ++x) {
                double acc = 0.0;
                for (int j = -half; j <= half; ++j)
                    acc += taps[j + half] * static_cast<double>(d(reflect(z + j, n0), y, x));
                tmp(z, y, x) = static_cast<T>(acc);
            }
    d = std::move(tmp);
}

template <typename T>
Volume<T> generate_phantom(const PhantomConfig& cfg) {
    cfg.validate();
    Volume<T> vol(cfg.nz, cfg.ny, cfg.nx, {cfg.sz, cfg.sy, cfg.sx}, cfg.fov_radius);
    Rng rng(cfg.seed);
    double b = cfg.fov_radius;

    auto center_in_ball = [&](double radius) {
        while (true) {
            Vec3 c{rng.uniform(-radius, radius), rng.uniform(-radius, radius),
                   rng.uniform(-radius, radius)};
            if (norm3(c) <= radius) return c;
        }
    };

    long n_obj = rng.uniform_int(cfg.min_objects, cfg.max_objects);
    for (long o = 0; o < n_obj; ++o) {
        ObjectType type = cfg.object_types[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(cfg.object_types.size()) - 1))];
        Vec3 c = center_in_ball(0.8 * b);
        Rotation rot = rng.rotation_matrix();
        Vec3 semi{rng.uniform(cfg.semiaxis_low * b, cfg.semiaxis_high * b),
                  rng.uniform(cfg.semiaxis_low * b, cfg.semiaxis_high * b),
                  rng.uniform(cfg.semiaxis_low * b, cfg.semiaxis_high * b)};
        double intensity = rng.uniform(cfg.intensity_low, cfg.intensity_high);
        switch (type) {
            case ObjectType::ellipsoid: add_ellipsoid(vol, c, semi, rot, intensity); break;
            case ObjectType::cuboid: add_cuboid(vol, c, semi, rot, intensity); break;
            case ObjectType::cylinder: add_cylinder(vol, c, semi, rot, intensity); break;
        }
    }

    // full-length cylinders along the first (z) dimension
    long n_ax = rng.uniform_int(cfg.min_axial_cylinders, cfg.max_axial_cylinders);
    double zlen = cfg.nz * cfg.sz;
    for (long o = 0; o < n_ax; ++o) {
        double r;
        Vec3 c{0, 0, 0};
        while (true) {
            c[0] = rng.uniform(-0.8 * b, 0.8 * b);
            c[1] = rng.uniform(-0.8 * b, 0.8 * b);
            if (std::hypot(c[0], c[1]) <= 0.8 * b) break;
        }
        r = rng.uniform(0.08 * b, 0.18 * b);
        double intensity = rng.uniform(cfg.intensity_low, cfg.intensity_high);
        add_cylinder(vol, c, Vec3{r, r, zlen}, kIdentityRotation, intensity);
    }

    smooth_volume(vol, cfg.smooth_sigma);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        if (vol.data[i] < T{}) vol.data[i] = T{};
    return vol;
}

template <typename T>
Volume<T> sphere_cluster_phantom(const ConeBeamGeometry& geom) {
    Volume<T> vol = make_volume<T>(geom);
    double b = geom.fov_radius;
    struct Sphere {
        double x, y, z, r, v;
    };
    const Sphere spheres[] = {
        {0.00, 0.00, 0.00, 0.45, 0.8}, {0.40, 0.15, 0.10, 0.18, 0.6}, {-0.35, 0.30, -0.15, 0.22, 1.0},
        {0.10, -0.42, 0.25, 0.15, 0.9}, {-0.15, -0.20, -0.38, 0.20, 0.5}, {0.30, 0.38, -0.30, 0.12, 0.7},
    };
    for (const auto& s : spheres) {
        Vec3 c{s.x * b, s.y * b, s.z * b};
        double r = s.r * b;
        add_ellipsoid(vol, c, Vec3{r, r, r}, kIdentityRotation, s.v);
    }
    smooth_volume(vol, 1.5);
    return vol;
}

DatasetSplit split_dataset(std::size_t n, double train_fraction) {
    require(n >= 1, "dataset must have at least one sample");
    require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
    std::size_t n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
    n_train = std::min(std::max<std::size_t>(n_train, 1), n - 1);
    DatasetSplit s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) s.train.push_back(i);
        else s.val.push_back(i);
    }
    return s;
}

template <typename T>
std::vector<TrainSample<T>> build_dataset(std::size_t n, const PhantomConfig& cfg,
                                          const Trajectory& traj, const ConeBeamGeometry& geom) {
    require(n >= 1, "build_dataset: n must be >= 1");
    std::vector<TrainSample<T>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        PhantomConfig c = cfg;
        c.seed = cfg.seed + i;
        out[i].gt = generate_phantom<T>(c);
        out[i].projections = cone_forward(out[i].gt, traj, geom);
    }
    return out;
}

#define SVFBP_INSTANTIATE_PHANTOM(T)                                                              \
    template void add_ellipsoid<T>(Volume<T>&, const Vec3&, const Vec3&, const Rotation&, double); \
    template void add_cuboid<T>(Volume<T>&, const Vec3&, const Vec3&, const Rotation&, double);   \
    template void add_cylinder<T>(Volume<T>&, const Vec3&, const Vec3&, const Rotation&, double); \
    template void smooth_volume<T>(Volume<T>&, double);                                           \
    template Volume<T> generate_phantom<T>(const PhantomConfig&);                                 \
    template Volume<T> sphere_cluster_phantom<T>(const ConeBeamGeometry&);                        \
    template std::vector<TrainSample<T>> build_dataset<T>(std::size_t, const PhantomConfig&,      \
                                                          const Trajectory&, const ConeBeamGeometry&);

SVFBP_INSTANTIATE_PHANTOM(float)
SVFBP_INSTANTIATE_PHANTOM(double)

}  // namespace svfbp
