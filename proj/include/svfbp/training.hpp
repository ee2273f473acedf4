#pragma once

// Learning of the redundancy weights: composite MSE + SSIM loss with its
// analytic gradient, exact backpropagation through the filter chain,
// decoupled-weight-decay Adam, and a one-cycle learning-rate schedule.

#include <cstdint>
#include <functional>
#include <vector>

#include "svfbp/pipeline.hpp"

namespace svfbp {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct TrainConfig {
    double gamma = 0.1;  // SSIM loss weight
    int epochs = 100;
    double lr_min = 0.001;
    double lr_max = 0.001;
    AdamWConfig opt;
    double init_low = -1.0;
    double init_high = 0.0;
    std::uint64_t seed = 0;
    bool nonneg_in_training = true;
    int ssim_window = 7;
    bool early_stop = false;
    int patience = 50;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

template <typename T>
struct TrainState {
    Array3D<T> weights;
    Array3D<T> first_moment;
    Array3D<T> second_moment;
    long step = 0;
    std::vector<EpochRecord> history;
};

template <typename T>
struct TrainSample {
    Volume<T> gt;
    Array3D<T> projections;
};

/// Single triangular-with-cosine-annealing cycle: linear ramp
/// lr_min -> lr_max over the first 30% of epochs, cosine anneal
/// lr_max -> 0.01 * lr_min over the rest. Endpoints exact.
double onecycle_lr(int epoch, int total, double lr_min, double lr_max);

/// I.i.d. uniform draws in [low, high), deterministic under seed.
template <typename T>
Array3D<T> init_weights(std::size_t num_projections, std::size_t num_angles, std::size_t num_s,
                        double low, double high, std::uint64_t seed);

/// Total loss  L_mse + gamma * (1 - mean SSIM)  between the min-max
/// normalized volumes, and its analytic gradient with respect to the raw
/// reconstruction (normalization chain rule included).
template <typename T>
std::pair<double, Volume<T>> loss(const Volume<T>& recon, const Volume<T>& gt, double gamma,
                                  int ssim_window = 7);

/// Exact gradient of the scalar loss with respect to every redundancy
/// weight bin, given the cached intermediate functions, the volume-domain
/// loss gradient, and the pre-clamp volume (for the clamp derivative).
template <typename T>
Array3D<T> grad_weights(const Array3D<T>& S_stack, const Trajectory& traj, const PipelineConfig& cfg,
                        const Volume<T>& loss_grad, const Volume<T>& pre_clamp);

/// One AdamW update (decoupled weight decay), increments the step count.
template <typename T>
void adamw_step(TrainState<T>& state, const Array3D<T>& grad, double lr, const AdamWConfig& cfg);

/// Full-batch training loop. Caches the intermediate function of every
/// sample once (it does not depend on the weights). The callback, when
/// set, runs after each epoch record is appended.
template <typename T>
TrainState<T> train(const std::vector<TrainSample<T>>& train_samples,
                    const std::vector<TrainSample<T>>& val_samples, const Trajectory& traj,
                    const TrainConfig& tcfg, const PipelineConfig& pcfg,
                    const std::function<void(const TrainState<T>&)>& epoch_callback = {});

/// Resumable variant: continues from an existing state (weights, moments,
/// step and history preserved) for epochs [start_epoch, tcfg.epochs).
template <typename T>
void train_continue(TrainState<T>& state, const std::vector<TrainSample<T>>& train_samples,
                    const std::vector<TrainSample<T>>& val_samples, const Trajectory& traj,
                    const TrainConfig& tcfg, const PipelineConfig& pcfg, int start_epoch,
                    const std::function<void(const TrainState<T>&)>& epoch_callback = {});

}  // namespace svfbp
