#include "svfbp/training.hpp"

#include <cmath>

#include "svfbp/detail/ssim.hpp"
#include "svfbp/metrics.hpp"
#include "svfbp/rng.hpp"

namespace svfbp {

void TrainConfig::validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(lr_min > 0.0 && lr_max >= lr_min, "need 0 < lr_min <= lr_max");
    require(init_low < init_high && init_high <= 0.0, "init range must satisfy low < high <= 0");
    require(gamma >= 0.0, "gamma must be >= 0");
    require(ssim_window >= 3 && ssim_window % 2 == 1, "ssim window must be odd and >= 3");
}

double onecycle_lr(int epoch, int total, double lr_min, double lr_max) {
    require(total >= 1 && epoch >= 0 && epoch < total, "epoch out of range");
    int peak = std::max(1, static_cast<int>(std::floor(0.3 * total)));
    if (epoch <= peak) return lr_min + (lr_max - lr_min) * (static_cast<double>(epoch) / peak);
    double lr_end = 0.01 * lr_min;
    int span = std::max(1, total - 1 - peak);
    double t = static_cast<double>(epoch - peak) / span;
    return lr_end + (lr_max - lr_end) * 0.5 * (1.0 + std::cos(M_PI * t));
}

template <typename T>
Array3D<T> init_weights(std::size_t num_projections, std::size_t num_angles, std::size_t num_s,
                        double low, double high, std::uint64_t seed) {
    require(low < high, "init range must satisfy low < high");
    Array3D<T> w(num_projections, num_angles, num_s);
    Rng rng(seed);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(low, high));
    return w;
}

namespace {

template <typename T>
Array3D<double> to_double(const Array3D<T>& a) {
    Array3D<double> out(a.n0(), a.n1(), a.n2());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i]);
    return out;
}

struct NormInfo {
    double lo = 0.0, hi = 1.0;
    std::size_t argmin = 0, argmax = 0;
    std::size_t min_count = 0, max_count = 0;
};

NormInfo normalize_tracked(Array3D<double>& a) {
    NormInfo n;
    n.lo = a[0];
    n.hi = a[0];
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < n.lo) { n.lo = a[i]; n.argmin = i; }
        if (a[i] > n.hi) { n.hi = a[i]; n.argmax = i; }
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == n.lo) ++n.min_count;
        if (a[i] == n.hi) ++n.max_count;
    }
    require(n.hi > n.lo, "cannot normalize a zero-dynamic-range volume");
    double inv = 1.0 / (n.hi - n.lo);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - n.lo) * inv;
    return n;
}

}  // namespace

template <typename T>
std::pair<double, Volume<T>> loss(const Volume<T>& recon, const Volume<T>& gt, double gamma,
                                  int ssim_window) {
    require(recon.data.same_shape(gt.data), "loss: volume shapes do not match");
    if (!all_finite(recon.data.data(), recon.data.size()))
        fail_numerical("loss: reconstruction contains non-finite values");
    Array3D<double> x = to_double(recon.data);
    Array3D<double> y = to_double(gt.data);
    NormInfo nx = normalize_tracked(x);
    normalize_tracked(y);

    const double inv_v = 1.0 / static_cast<double>(x.size());
    double mse = 0.0;
    Array3D<double> ghat(x.n0(), x.n1(), x.n2());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        mse += d * d;
        ghat[i] = 2.0 * d * inv_v;
    }
    mse *= inv_v;

    double total = mse;
    if (gamma > 0.0) {
        auto maps = detail::ssim_maps(x, y, ssim_window, ssim_window, ssim_window);
        total += gamma * (1.0 - maps.mean);
        Array3D<double> gs = detail::ssim_mean_grad_x(maps, x, y, ssim_window, ssim_window, ssim_window);
        for (std::size_t i = 0; i < ghat.size(); ++i) ghat[i] -= gamma * gs[i];
    }

    // chain rule through the min-max normalization of the reconstruction
    double range_inv = 1.0 / (nx.hi - nx.lo);
    double sum_min = 0.0, sum_max = 0.0;
    if (nx.min_count == 1 || nx.max_count == 1) {
        for (std::size_t i = 0; i < ghat.size(); ++i) {
            sum_min += ghat[i] * (x[i] - 1.0);
            sum_max += ghat[i] * x[i];
        }
    }
    Volume<T> grad = recon;
    for (std::size_t i = 0; i < ghat.size(); ++i) grad.data[i] = static_cast<T>(ghat[i] * range_inv);
    // a locally non-unique extremum is constant under single-voxel
    // perturbation, so it carries no gradient
    if (nx.min_count == 1)
        grad.data[nx.argmin] = static_cast<T>((ghat[nx.argmin] + sum_min) * range_inv);
    if (nx.max_count == 1)
        grad.data[nx.argmax] = static_cast<T>((ghat[nx.argmax] - sum_max) * range_inv);
    return {total, grad};
}

template <typename T>
Array3D<T> grad_weights(const Array3D<T>& S_stack, const Trajectory& traj, const PipelineConfig& cfg,
                        const Volume<T>& loss_grad, const Volume<T>& pre_clamp) {
    require(S_stack.n0() == traj.size(), "grad_weights: stack/trajectory length mismatch");
    require(loss_grad.data.same_shape(pre_clamp.data), "grad_weights: volume shape mismatch");

    Volume<T> masked = loss_grad;
    if (cfg.nonneg) {
        for (std::size_t i = 0; i < masked.data.size(); ++i)
            if (!(pre_clamp.data[i] > T{})) masked.data[i] = T{};
    }
    Array3D<T> b = cone_backproject_adjoint(masked, traj, cfg.geom, /*weight_by_distance=*/true);

    const int n = static_cast<int>(S_stack.n0());
    GaussianKernel kernel = cfg.kernel();
    Array3D<T> grad(S_stack.n0(), S_stack.n1(), S_stack.n2());
#pragma omp parallel for schedule(dynamic, 1)
    for (int l = 0; l < n; ++l) {
        Array2D<T> bl(b.n1(), b.n2());
        std::copy(b.slab(l), b.slab(l) + bl.size(), bl.data());
        Array2D<T> gu = detector_weight(bl, cfg.geom);
        Array2D<T> gt = radon_2d(gu, cfg.grid, cfg.geom);
        Array2D<T> gz = diff_s_adjoint(gt, cfg.grid.s_spacing);
        if (!kernel.identity()) gz = gaussian_smooth_s_adjoint(gz, kernel);
        const T* s = S_stack.slab(l);
        T* g = grad.slab(l);
        for (std::size_t i = 0; i < gz.size(); ++i)
            g[i] = static_cast<T>(static_cast<double>(s[i]) * static_cast<double>(gz[i]));
    }
    return grad;
}

template <typename T>
void adamw_step(TrainState<T>& state, const Array3D<T>& grad, double lr, const AdamWConfig& cfg) {
    require(state.weights.same_shape(grad), "adamw_step: gradient shape mismatch");
    state.step += 1;
    double b1 = cfg.beta1, b2 = cfg.beta2;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < state.weights.size(); ++i) {
        double g = static_cast<double>(grad[i]);
        double m = b1 * static_cast<double>(state.first_moment[i]) + (1.0 - b1) * g;
        double v = b2 * static_cast<double>(state.second_moment[i]) + (1.0 - b2) * g * g;
        state.first_moment[i] = static_cast<T>(m);
        state.second_moment[i] = static_cast<T>(v);
        double mhat = m / bc1;
        double vhat = v / bc2;
        double w = static_cast<double>(state.weights[i]);
        w -= lr * (mhat / (std::sqrt(vhat) + cfg.eps)) + lr * cfg.weight_decay * w;
        state.weights[i] = static_cast<T>(w);
    }
}

namespace {

template <typename T>
std::vector<Array3D<T>> cache_intermediates(const std::vector<TrainSample<T>>& samples,
                                            const PipelineConfig& cfg) {
    std::vector<Array3D<T>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(grangeat_intermediate_stack(s.projections, cfg));
    return out;
}

}  // namespace

template <typename T>
void train_continue(TrainState<T>& state, const std::vector<TrainSample<T>>& train_samples,
                    const std::vector<TrainSample<T>>& val_samples, const Trajectory& traj,
                    const TrainConfig& tcfg, const PipelineConfig& pcfg, int start_epoch,
                    const std::function<void(const TrainState<T>&)>& epoch_callback) {
    tcfg.validate();
    require(!train_samples.empty(), "training set must not be empty");
    PipelineConfig cfg = pcfg;
    cfg.nonneg = tcfg.nonneg_in_training;

    auto train_S = cache_intermediates(train_samples, cfg);
    auto val_S = cache_intermediates(val_samples, cfg);

    const double inv_nt = 1.0 / static_cast<double>(train_samples.size());
    int since_best = 0;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
        double lr = onecycle_lr(epoch, tcfg.epochs, tcfg.lr_min, tcfg.lr_max);
        Array3D<T> grad_total(state.weights.n0(), state.weights.n1(), state.weights.n2());
        double train_loss = 0.0;
        for (std::size_t s = 0; s < train_samples.size(); ++s) {
            auto fwd = reconstruct_from_intermediate(train_S[s], state.weights, traj, cfg);
            auto [l, gvol] = loss(fwd.recon, train_samples[s].gt, tcfg.gamma, tcfg.ssim_window);
            train_loss += l;
            Array3D<T> g = grad_weights(train_S[s], traj, cfg, gvol, fwd.pre_clamp);
            for (std::size_t i = 0; i < grad_total.size(); ++i)
                grad_total[i] = static_cast<T>(static_cast<double>(grad_total[i]) +
                                               static_cast<double>(g[i]) * inv_nt);
        }
        train_loss *= inv_nt;
        if (!std::isfinite(train_loss)) fail_numerical("training diverged: non-finite loss");

        double val_loss = 0.0;
        for (std::size_t s = 0; s < val_samples.size(); ++s) {
            auto fwd = reconstruct_from_intermediate(val_S[s], state.weights, traj, cfg);
            val_loss += loss(fwd.recon, val_samples[s].gt, tcfg.gamma, tcfg.ssim_window).first;
        }
        if (!val_samples.empty()) val_loss /= static_cast<double>(val_samples.size());

        adamw_step(state, grad_total, lr, tcfg.opt);
        state.history.push_back(EpochRecord{epoch, lr, train_loss, val_loss});
        if (epoch_callback) epoch_callback(state);

        if (tcfg.early_stop && !val_samples.empty()) {
            if (val_loss < best_val - 1e-12) {
                best_val = val_loss;
                since_best = 0;
            } else if (++since_best >= tcfg.patience) {
                break;
            }
        }
    }
}

template <typename T>
TrainState<T> train(const std::vector<TrainSample<T>>& train_samples,
                    const std::vector<TrainSample<T>>& val_samples, const Trajectory& traj,
                    const TrainConfig& tcfg, const PipelineConfig& pcfg,
                    const std::function<void(const TrainState<T>&)>& epoch_callback) {
    tcfg.validate();
    TrainState<T> state;
    state.weights = init_weights<T>(traj.size(), pcfg.grid.num_angles, pcfg.grid.num_s, tcfg.init_low,
                                    tcfg.init_high, tcfg.seed);
    state.first_moment = Array3D<T>(state.weights.n0(), state.weights.n1(), state.weights.n2());
    state.second_moment = Array3D<T>(state.weights.n0(), state.weights.n1(), state.weights.n2());
    train_continue(state, train_samples, val_samples, traj, tcfg, pcfg, 0, epoch_callback);
    return state;
}

#define SVFBP_INSTANTIATE_TRAINING(T)                                                             \
    template Array3D<T> init_weights<T>(std::size_t, std::size_t, std::size_t, double, double,    \
                                        std::uint64_t);                                           \
    template std::pair<double, Volume<T>> loss<T>(const Volume<T>&, const Volume<T>&, double, int); \
    template Array3D<T> grad_weights<T>(const Array3D<T>&, const Trajectory&, const PipelineConfig&, \
                                        const Volume<T>&, const Volume<T>&);                      \
    template void adamw_step<T>(TrainState<T>&, const Array3D<T>&, double, const AdamWConfig&);   \
    template void train_continue<T>(TrainState<T>&, const std::vector<TrainSample<T>>&,           \
                                    const std::vector<TrainSample<T>>&, const Trajectory&,        \
                                    const TrainConfig&, const PipelineConfig&, int,               \
                                    const std::function<void(const TrainState<T>&)>&);            \
    template TrainState<T> train<T>(const std::vector<TrainSample<T>>&,                           \
                                    const std::vector<TrainSample<T>>&, const Trajectory&,        \
                                    const TrainConfig&, const PipelineConfig&,                    \
                                    const std::function<void(const TrainState<T>&)>&);

SVFBP_INSTANTIATE_TRAINING(float)
SVFBP_INSTANTIATE_TRAINING(double)

}  // namespace svfbp
