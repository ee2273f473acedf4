#pragma once

// Evaluation suite: histogram matching, MSE / PSNR / SSIM, the algebraic
// iterative baseline, and a small wall-clock helper.

#include <chrono>
#include <utility>
#include <vector>

#include "svfbp/array.hpp"
#include "svfbp/geometry.hpp"
#include "svfbp/volume.hpp"

namespace svfbp {

/// Reported when MSE is exactly zero (PSNR has no finite value); keeps
/// JSON reports free of infinities.
inline constexpr double kPsnrSentinelDb = 999.0;

struct SampleMetrics {
    double mse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double time_s = -1.0;  // < 0 means not timed
};

struct MetricsSummary {
    double mean = 0.0;
    double stddev = 0.0;
};

MetricsSummary summarize(const std::vector<double>& values);

/// Min-max normalization to [0, 1] in place. Fails on zero dynamic range.
template <typename T>
void normalize_minmax(Array3D<T>& a);

double psnr_from_mse(double mse, double peak = 1.0);

template <typename T>
double mse_mean(const Array3D<T>& a, const Array3D<T>& b);

/// Mean SSIM over all fully-inside cubic windows (uniform window, biased
/// moments, K1 = 0.01, K2 = 0.03, dynamic range 1).
template <typename T>
double ssim_mean_3d(const Array3D<T>& x, const Array3D<T>& y, int window = 7);

/// Slice-level variant with the conventional 11x11 window.
template <typename T>
double ssim_mean_2d(const Array2D<T>& x, const Array2D<T>& y, int window = 11);

/// Monotone intensity remap of recon so its empirical CDF matches ref's
/// (quantile mapping, linear interpolation within bins).
template <typename T>
Volume<T> histogram_match(const Volume<T>& recon, const Volume<T>& ref, int bins = 4096);

/// Histogram-match recon to gt, normalize both to [0, 1], compute MSE,
/// PSNR (peak 1) and mean 3D SSIM.
template <typename T>
SampleMetrics evaluate(const Volume<T>& recon, const Volume<T>& gt, int ssim_window = 7);

/// Per-slice evaluation along axis 0, averaged (2D SSIM window 11).
template <typename T>
SampleMetrics evaluate_per_slice(const Volume<T>& recon, const Volume<T>& gt);

// --- algebraic iterative baseline ---

struct AirConfig {
    int iterations = 300;
    double relaxation = 1.0;
    bool nonneg = true;

    void validate() const;
};

/// SIRT-style iteration v <- v + relax * C Bt R (p - A v) with inverse
/// row/column sums R, C (zeroed where the sums vanish), starting from
/// v = 0, optional nonnegativity projection each iteration.
template <typename T>
Volume<T> air_reconstruct(const Array3D<T>& projs, const Trajectory& traj,
                          const ConeBeamGeometry& geom, const AirConfig& cfg,
                          std::vector<double>* residual_norms = nullptr);

/// Monotonic wall clock around a callable; returns (result, seconds).
template <typename F>
auto timed(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    auto result = std::forward<F>(f)();
    auto t1 = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(t1 - t0).count();
    return std::make_pair(std::move(result), s);
}

}  // namespace svfbp
