#pragma once

// Shift-variant filtered backprojection pipeline: per-projection
// intermediate function, redundancy-weighted filtering, and cone-beam
// backprojection. The redundancy weight tensor is the only tunable part
// of the chain; everything else is a fixed linear operator.

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"
#include "svfbp/operators.hpp"
#include "svfbp/volume.hpp"

namespace svfbp {

struct SmoothingConfig {
    double sigma = 0.0;   // in s bins; <= 0 disables the layer
    int kernel_size = 1;  // odd

    /// Bandwidth-preserving rescale of the reference full-scale setting
    /// (sigma 20, kernel 121 at 785 s bins).
    static SmoothingConfig scaled_for(int num_s);
};

struct PipelineConfig {
    ConeBeamGeometry geom;
    SinogramGrid grid;
    SmoothingConfig smoothing;
    bool nonneg = true;  // final clamp to >= 0

    GaussianKernel kernel() const { return GaussianKernel::make(smoothing.sigma, smoothing.kernel_size); }
    void validate() const;
};

/// Geometry, grid and smoothing defaults wired together for a given scan
/// geometry.
PipelineConfig make_pipeline_config(const ConeBeamGeometry& geom, bool nonneg = true);

/// Intermediate function of one projection:
/// S = sino_weight . diff_s . radon_2d . cosine_weight.
template <typename T>
Array2D<T> grangeat_intermediate(const Array2D<T>& proj, const PipelineConfig& cfg);

/// Intermediate functions of a projection stack, evaluated in parallel
/// over projections. Output is (num_projections, num_angles, num_s).
template <typename T>
Array3D<T> grangeat_intermediate_stack(const Array3D<T>& projs, const PipelineConfig& cfg);

/// Filtered projection of one intermediate function under one redundancy
/// weight slice: gF = detector_weight . radon_2d_adjoint . diff_s .
/// gaussian_smooth_s . (w .* S).
template <typename T>
Array2D<T> shift_variant_filter(const Array2D<T>& S, const Array2D<T>& w_slice,
                                const PipelineConfig& cfg);

/// Full reconstruction from projections: intermediate function and filter
/// per projection, distance-weighted backprojection, optional clamp.
template <typename T>
Volume<T> reconstruct(const Array3D<T>& projs, const Array3D<T>& weights, const Trajectory& traj,
                      const PipelineConfig& cfg);

/// Forward pass used by training: starts from cached intermediate
/// functions and also returns the pre-clamp volume so the clamp can be
/// differentiated.
template <typename T>
struct ForwardResult {
    Volume<T> recon;        // after the optional clamp
    Volume<T> pre_clamp;    // before it (same array when nonneg is off)
};

template <typename T>
ForwardResult<T> reconstruct_from_intermediate(const Array3D<T>& S_stack, const Array3D<T>& weights,
                                               const Trajectory& traj, const PipelineConfig& cfg);

/// Closed-form redundancy weights of the circular orbit:
/// w(lambda, mu, s) = -1/(8 pi^2) * D^2 |cos mu| / (s^2 + D^2),
/// identical for every lambda. Rejects non-circular trajectories.
template <typename T>
Array3D<T> analytic_circular_weights(const Trajectory& traj, const PipelineConfig& cfg);

}  // namespace svfbp
