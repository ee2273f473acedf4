#include "svfbp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "svfbp/detail/ssim.hpp"
#include "svfbp/operators.hpp"

namespace svfbp {

MetricsSummary summarize(const std::vector<double>& values) {
    MetricsSummary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return s;
}

template <typename T>
void normalize_minmax(Array3D<T>& a) {
    auto [lo, hi] = min_max(a);
    require(hi > lo, "cannot normalize a zero-dynamic-range volume");
    double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = static_cast<T>((static_cast<double>(a[i]) - lo) * inv);
}

double psnr_from_mse(double mse, double peak) {
    if (mse <= 0.0) return kPsnrSentinelDb;
    return 10.0 * std::log10(peak * peak / mse);
}

template <typename T>
double mse_mean(const Array3D<T>& a, const Array3D<T>& b) {
    require(a.same_shape(b), "mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

namespace {

template <typename T>
Array3D<double> to_double(const Array3D<T>& a) {
    Array3D<double> out(a.n0(), a.n1(), a.n2());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i]);
    return out;
}

}  // namespace

template <typename T>
double ssim_mean_3d(const Array3D<T>& x, const Array3D<T>& y, int window) {
    require(x.same_shape(y), "ssim: shape mismatch");
    require(x.n0() >= static_cast<std::size_t>(window) && x.n1() >= static_cast<std::size_t>(window) &&
                x.n2() >= static_cast<std::size_t>(window),
            "ssim: volume smaller than the window");
    auto m = detail::ssim_maps(to_double(x), to_double(y), window, window, window);
    return m.mean;
}

template <typename T>
double ssim_mean_2d(const Array2D<T>& x, const Array2D<T>& y, int window) {
    require(x.same_shape(y), "ssim: shape mismatch");
    Array3D<double> a(1, x.rows(), x.cols()), b(1, x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        a[i] = static_cast<double>(x[i]);
        b[i] = static_cast<double>(y[i]);
    }
    auto m = detail::ssim_maps(a, b, 1, window, window);
    return m.mean;
}

template <typename T>
Volume<T> histogram_match(const Volume<T>& recon, const Volume<T>& ref, int bins) {
    require(recon.data.size() > 0 && ref.data.size() > 0, "histogram_match: empty input");
    require(bins >= 2, "histogram_match: bins must be >= 2");
    auto [rlo, rhi] = min_max(recon.data);
    require(rhi > rlo, "histogram_match: zero-dynamic-range reconstruction");
    auto [flo, fhi] = min_max(ref.data);

    Volume<T> out = recon;
    if (fhi <= flo) {
        out.data.fill(static_cast<T>(flo));
        return out;
    }

    // rank of every reconstruction voxel (value order, ties by index)
    const std::size_t n = recon.data.size();
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (recon.data[a] != recon.data[b]) return recon.data[a] < recon.data[b];
        return a < b;
    });

    if (ref.data.size() == n) {
        // equal sizes: assign the reference order statistics directly
        std::vector<T> sorted_ref(ref.data.data(), ref.data.data() + n);
        std::sort(sorted_ref.begin(), sorted_ref.end());
        for (std::size_t r = 0; r < n; ++r) out.data[order[r]] = sorted_ref[r];
        return out;
    }

    // general case: interpolated inverse-CDF table of the reference
    std::vector<T> sorted_ref(ref.data.data(), ref.data.data() + ref.data.size());
    std::sort(sorted_ref.begin(), sorted_ref.end());
    std::vector<double> table(bins + 1);
    for (int t = 0; t <= bins; ++t) {
        double pos = static_cast<double>(t) / bins * (static_cast<double>(sorted_ref.size()) - 1.0);
        std::size_t j = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(j);
        double a = static_cast<double>(sorted_ref[j]);
        double b = static_cast<double>(sorted_ref[std::min(j + 1, sorted_ref.size() - 1)]);
        table[t] = a + (b - a) * frac;
    }
    for (std::size_t r = 0; r < n; ++r) {
        double q = (static_cast<double>(r) + 0.5) / static_cast<double>(n) * bins;
        int t = std::clamp(static_cast<int>(q), 0, bins - 1);
        double frac = q - t;
        out.data[order[r]] = static_cast<T>(table[t] + (table[t + 1] - table[t]) * frac);
    }
    return out;
}

template <typename T>
SampleMetrics evaluate(const Volume<T>& recon, const Volume<T>& gt, int ssim_window) {
    require(recon.data.same_shape(gt.data), "evaluate: volume shapes do not match");
    Volume<T> matched = histogram_match(recon, gt);
    Array3D<T> a = matched.data;
    Array3D<T> b = gt.data;
    normalize_minmax(a);
    normalize_minmax(b);
    SampleMetrics m;
    m.mse = mse_mean(a, b);
    m.psnr_db = psnr_from_mse(m.mse, 1.0);
    m.ssim = ssim_mean_3d(a, b, ssim_window);
    return m;
}

template <typename T>
SampleMetrics evaluate_per_slice(const Volume<T>& recon, const Volume<T>& gt) {
    require(recon.data.same_shape(gt.data), "evaluate: volume shapes do not match");
    Volume<T> matched = histogram_match(recon, gt);
    Array3D<T> a = matched.data;
    Array3D<T> b = gt.data;
    normalize_minmax(a);
    normalize_minmax(b);
    SampleMetrics m;
    m.mse = mse_mean(a, b);
    m.psnr_db = psnr_from_mse(m.mse, 1.0);
    double acc = 0.0;
    for (std::size_t z = 0; z < a.n0(); ++z) {
        Array2D<T> sa = slice0(a, z), sb = slice0(b, z);
        acc += ssim_mean_2d(sa, sb, 11);
    }
    m.ssim = acc / static_cast<double>(a.n0());
    return m;
}

void AirConfig::validate() const {
    require(iterations >= 1, "AIR iterations must be >= 1");
    require(relaxation > 0.0 && relaxation <= 2.0, "AIR relaxation must be in (0, 2]");
}

template <typename T>
Volume<T> air_reconstruct(const Array3D<T>& projs, const Trajectory& traj,
                          const ConeBeamGeometry& geom, const AirConfig& cfg,
                          std::vector<double>* residual_norms) {
    cfg.validate();
    require(projs.n0() == traj.size(), "one projection per trajectory entry required");

    Volume<T> ones_vol = make_volume<T>(geom);
    ones_vol.data.fill(T{1});
    Array3D<T> row_sum = cone_forward(ones_vol, traj, geom);
    Array3D<T> ones_proj(projs.n0(), projs.n1(), projs.n2(), T{1});
    Volume<T> col_sum = cone_backproject(ones_proj, traj, geom, /*weight_by_distance=*/false);

    auto [rlo, rhi] = min_max(row_sum);
    auto [clo, chi] = min_max(col_sum.data);
    (void)rlo;
    (void)clo;
    double row_eps = 1e-10 * rhi, col_eps = 1e-10 * chi;

    Array3D<T> r_inv(row_sum.n0(), row_sum.n1(), row_sum.n2());
    for (std::size_t i = 0; i < row_sum.size(); ++i)
        r_inv[i] = static_cast<double>(row_sum[i]) > row_eps
                       ? static_cast<T>(1.0 / static_cast<double>(row_sum[i]))
                       : T{};
    Array3D<T> c_inv(col_sum.data.n0(), col_sum.data.n1(), col_sum.data.n2());
    for (std::size_t i = 0; i < col_sum.data.size(); ++i)
        c_inv[i] = static_cast<double>(col_sum.data[i]) > col_eps
                       ? static_cast<T>(1.0 / static_cast<double>(col_sum.data[i]))
                       : T{};

    Volume<T> v = make_volume<T>(geom);
    Array3D<T> residual(projs.n0(), projs.n1(), projs.n2());
    for (int it = 0; it < cfg.iterations; ++it) {
        Array3D<T> fwd = cone_forward(v, traj, geom);
        double rn = 0.0;
        for (std::size_t i = 0; i < residual.size(); ++i) {
            double d = static_cast<double>(projs[i]) - static_cast<double>(fwd[i]);
            residual[i] = static_cast<T>(d * static_cast<double>(r_inv[i]));
            rn += d * d;
        }
        if (!std::isfinite(rn)) fail_numerical("AIR diverged: non-finite residual");
        if (residual_norms) residual_norms->push_back(std::sqrt(rn));
        Volume<T> upd = cone_backproject(residual, traj, geom, /*weight_by_distance=*/false);
        for (std::size_t i = 0; i < v.data.size(); ++i) {
            double nv = static_cast<double>(v.data[i]) +
                        cfg.relaxation * static_cast<double>(c_inv[i]) * static_cast<double>(upd.data[i]);
            if (cfg.nonneg && nv < 0.0) nv = 0.0;
            v.data[i] = static_cast<T>(nv);
        }
    }
    return v;
}

#define SVFBP_INSTANTIATE_METRICS(T)                                                           \
    template void normalize_minmax<T>(Array3D<T>&);                                           \
    template double mse_mean<T>(const Array3D<T>&, const Array3D<T>&);                        \
    template double ssim_mean_3d<T>(const Array3D<T>&, const Array3D<T>&, int);               \
    template double ssim_mean_2d<T>(const Array2D<T>&, const Array2D<T>&, int);               \
    template Volume<T> histogram_match<T>(const Volume<T>&, const Volume<T>&, int);           \
    template SampleMetrics evaluate<T>(const Volume<T>&, const Volume<T>&, int);              \
    template SampleMetrics evaluate_per_slice<T>(const Volume<T>&, const Volume<T>&);         \
    template Volume<T> air_reconstruct<T>(const Array3D<T>&, const Trajectory&,               \
                                          const ConeBeamGeometry&, const AirConfig&,          \
                                          std::vector<double>*);

SVFBP_INSTANTIATE_METRICS(float)
SVFBP_INSTANTIATE_METRICS(double)

}  // namespace svfbp
