#include "svfbp/pipeline.hpp"

#include <cmath>

namespace svfbp {

SmoothingConfig SmoothingConfig::scaled_for(int num_s) {
    SmoothingConfig s;
    s.sigma = 20.0 * num_s / 785.0;
    int k = static_cast<int>(std::lround(121.0 * num_s / 785.0));
    if (k % 2 == 0) ++k;
    s.kernel_size = std::max(3, k);
    return s;
}

void PipelineConfig::validate() const {
    geom.validate();
    grid.validate();
    if (smoothing.sigma > 0.0) require(smoothing.kernel_size % 2 == 1, "smoothing kernel size must be odd");
}

PipelineConfig make_pipeline_config(const ConeBeamGeometry& geom, bool nonneg) {
    PipelineConfig cfg;
    cfg.geom = geom;
    cfg.grid = SinogramGrid::for_detector(geom);
    cfg.smoothing = SmoothingConfig::scaled_for(cfg.grid.num_s);
    cfg.nonneg = nonneg;
    cfg.validate();
    return cfg;
}

template <typename T>
Array2D<T> grangeat_intermediate(const Array2D<T>& proj, const PipelineConfig& cfg) {
    Array2D<T> weighted = cosine_weight(proj, cfg.geom);
    Array2D<T> sino = radon_2d(weighted, cfg.grid, cfg.geom);
    Array2D<T> dsino = diff_s(sino, cfg.grid.s_spacing);
    return sino_weight(dsino, cfg.grid, cfg.geom);
}

template <typename T>
Array3D<T> grangeat_intermediate_stack(const Array3D<T>& projs, const PipelineConfig& cfg) {
    const int n = static_cast<int>(projs.n0());
    Array3D<T> out(n, cfg.grid.num_angles, cfg.grid.num_s);
#pragma omp parallel for schedule(dynamic, 1)
    for (int l = 0; l < n; ++l) {
        Array2D<T> p(projs.n1(), projs.n2());
        std::copy(projs.slab(l), projs.slab(l) + p.size(), p.data());
        set_slice0(out, l, grangeat_intermediate(p, cfg));
    }
    return out;
}

namespace {

template <typename T>
Array2D<T> filter_slice(const Array2D<T>& S, const T* w, const GaussianKernel& kernel,
                        const PipelineConfig& cfg) {
    Array2D<T> y(S.rows(), S.cols());
    for (std::size_t i = 0; i < S.size(); ++i)
        y[i] = static_cast<T>(static_cast<double>(w[i]) * static_cast<double>(S[i]));
    if (!kernel.identity()) y = gaussian_smooth_s(y, kernel);
    Array2D<T> dy = diff_s(y, cfg.grid.s_spacing);
    Array2D<T> back = radon_2d_adjoint(dy, cfg.grid, cfg.geom);
    return detector_weight(back, cfg.geom);
}

}  // namespace

template <typename T>
Array2D<T> shift_variant_filter(const Array2D<T>& S, const Array2D<T>& w_slice,
                                const PipelineConfig& cfg) {
    require(S.same_shape(w_slice), "weight slice shape must match the intermediate function");
    return filter_slice(S, w_slice.data(), cfg.kernel(), cfg);
}

namespace {

template <typename T>
Array3D<T> filtered_stack(const Array3D<T>& S_stack, const Array3D<T>& weights,
                          const PipelineConfig& cfg) {
    require(S_stack.same_shape(weights), "weights shape must match the intermediate stack");
    const int n = static_cast<int>(S_stack.n0());
    GaussianKernel kernel = cfg.kernel();
    Array3D<T> out(n, cfg.geom.detector_rows, cfg.geom.detector_cols);
#pragma omp parallel for schedule(dynamic, 1)
    for (int l = 0; l < n; ++l) {
        Array2D<T> S = slice0(S_stack, l);
        set_slice0(out, l, filter_slice(S, weights.slab(l), kernel, cfg));
    }
    return out;
}

}  // namespace

template <typename T>
ForwardResult<T> reconstruct_from_intermediate(const Array3D<T>& S_stack, const Array3D<T>& weights,
                                               const Trajectory& traj, const PipelineConfig& cfg) {
    require(S_stack.n0() == traj.size(), "one intermediate function per trajectory entry required");
    Array3D<T> filtered = filtered_stack(S_stack, weights, cfg);
    ForwardResult<T> res;
    res.pre_clamp = cone_backproject(filtered, traj, cfg.geom, /*weight_by_distance=*/true);
    if (cfg.nonneg) {
        res.recon = res.pre_clamp;
        for (std::size_t i = 0; i < res.recon.data.size(); ++i)
            if (res.recon.data[i] < T{}) res.recon.data[i] = T{};
    } else {
        res.recon = res.pre_clamp;
    }
    return res;
}

template <typename T>
Volume<T> reconstruct(const Array3D<T>& projs, const Array3D<T>& weights, const Trajectory& traj,
                      const PipelineConfig& cfg) {
    require(projs.n0() == traj.size() && weights.n0() == traj.size(),
            "projections, weights and trajectory must have matching length");
    Array3D<T> S = grangeat_intermediate_stack(projs, cfg);
    return reconstruct_from_intermediate(S, weights, traj, cfg).recon;
}

template <typename T>
Array3D<T> analytic_circular_weights(const Trajectory& traj, const PipelineConfig& cfg) {
    require(is_circular(traj), "analytic weights are only defined for circular trajectories");
    const int n = static_cast<int>(traj.size());
    const int na = cfg.grid.num_angles, ns = cfg.grid.num_s;
    double d = cfg.geom.source_detector_distance;
    double d2 = d * d;
    Array2D<T> slice(na, ns);
    for (int i = 0; i < na; ++i) {
        double c = std::abs(std::cos(cfg.grid.angle(i)));
        for (int k = 0; k < ns; ++k) {
            double s = cfg.grid.s(k);
            slice(i, k) = static_cast<T>(-1.0 / (8.0 * M_PI * M_PI) * d2 * c / (s * s + d2));
        }
    }
    Array3D<T> out(n, na, ns);
    for (int l = 0; l < n; ++l) set_slice0(out, l, slice);
    return out;
}

#define SVFBP_INSTANTIATE_PIPELINE(T)                                                            \
    template Array2D<T> grangeat_intermediate<T>(const Array2D<T>&, const PipelineConfig&);      \
    template Array3D<T> grangeat_intermediate_stack<T>(const Array3D<T>&, const PipelineConfig&); \
    template Array2D<T> shift_variant_filter<T>(const Array2D<T>&, const Array2D<T>&,            \
                                                const PipelineConfig&);                          \
    template ForwardResult<T> reconstruct_from_intermediate<T>(const Array3D<T>&, const Array3D<T>&, \
                                                               const Trajectory&,                \
                                                               const PipelineConfig&);           \
    template Volume<T> reconstruct<T>(const Array3D<T>&, const Array3D<T>&, const Trajectory&,   \
                                      const PipelineConfig&);                                    \
    template Array3D<T> analytic_circular_weights<T>(const Trajectory&, const PipelineConfig&);

SVFBP_INSTANTIATE_PIPELINE(float)
SVFBP_INSTANTIATE_PIPELINE(double)

}  // namespace svfbp
