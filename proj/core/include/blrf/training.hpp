// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/dataset.hpp>
#include <blrf/metrics.hpp>
#include <blrf/model.hpp>
#include <blrf/renderer.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace blrf {

struct TrainConfig {
    double lambda1 = 0.1;   // density TV weight
    double lambda2 = 0.1;   // color TV weight
    double lambda_hp = 0.0; // high-pass trajectory penalty weight
    int batch_rays = 1024;
    int iters = 5000;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps = 1e-8;
    double lr_tensor_max = 0.02;
    double lr_mlp_max = 0.001;
    int lr_cycle_period = 2000;
    double lr_floor_ratio = 0.1;
    /// Global gradient-norm clip; 0 disables.
    double grad_clip = 0.0;
    /// Uniform time samples used by the high-pass penalty.
    int highpass_samples = 64;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    bool operator==(const AdamState&) const = default;
};

struct LossBreakdown {
    double photometric = 0.0;
    double tv_density = 0.0;
    double tv_color = 0.0;
    double highpass = 0.0;
    double total = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

/// Mean over rays of the squared L2 distance.
double photometric_loss(std::span<const Vec3> pred, std::span<const Vec3> gt);

/// Triangular wave from lr_max (iter 0) down to lr_max * floor_ratio (iter period/2) and back.
double cyclic_lr(std::int64_t iter, double lr_max, int period, double floor_ratio);

/// Bias-corrected Adam update. Throws TrainingError on a non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr, double beta1,
               double beta2, double eps);

/// Adam moments for the four parameter blocks plus the global iteration counter.
struct OptimizerState {
    std::int64_t iteration = 0;
    AdamState density, color, density_basis, color_basis;

    bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer_state(const SceneModel& model);

/// Rounds every value to the nearest float32, the storage precision of checkpoints.
void round_to_storage(std::span<double> values);
void round_to_storage(SceneModel& model);

/// A fixed set of rays with their instants and target colors.
struct RayBatch {
    std::vector<Ray> rays;
    /// Index into `times` per ray.
    std::vector<int> slot;
    std::vector<double> times;
    std::vector<Vec3> targets;
    /// rays.size() * n_samples offsets, or empty for bin midpoints.
    std::vector<double> jitter;
};

/// Draws batch_rays (frame, pixel) pairs uniformly over the training frames and their pixels.
RayBatch draw_batch(const Dataset& data, const TrainConfig& config, const SamplingSpec& sampling, Rng& rng);

/// Total loss of the model on a batch; when `grads` is given it receives d total / d params.
LossBreakdown loss_and_grad(const SceneModel& model, const RayBatch& batch, const TrainConfig& config,
                            const SamplingSpec& sampling, ModelGradients* grads, int threads = 1);

/// Owns the model and optimizer state and performs one optimization step at a time.
class Trainer {
  public:
    Trainer(const Dataset& data, SceneModel model, TrainConfig config, SamplingSpec sampling,
            std::optional<OptimizerState> resume = std::nullopt, int threads = 1);

    /// Draws a batch, evaluates the loss, back-propagates and applies one Adam step per block.
    LossBreakdown step();

    std::int64_t iteration() const { return opt_.iteration; }
    const SceneModel& model() const { return model_; }
    const OptimizerState& optimizer() const { return opt_; }
    const TrainConfig& config() const { return config_; }
    const SamplingSpec& sampling() const { return sampling_; }
    double lr_tensor() const;
    double lr_mlp() const;

  private:
    const Dataset& data_;
    SceneModel model_;
    TrainConfig config_;
    SamplingSpec sampling_;
    OptimizerState opt_;
    int threads_;
    ModelGradients grads_;
};

struct TrainLoopOptions {
    /// Output directory for log.csv, checkpoint.blrf and validation renders; empty writes nothing.
    std::filesystem::path out_dir;
    int log_every = 100;
    /// Render the first test frame every N iterations when a test split exists; 0 disables.
    int validate_every = 0;
    std::ostream* console = nullptr;
    int threads = 1;
    /// Append to an existing log instead of replacing it (used when resuming).
    bool append_log = false;
};

struct TrainLoopResult {
    SceneModel model;
    OptimizerState optimizer;
    std::vector<LossBreakdown> losses;
};

/// Runs until config.iters total iterations have been taken (counting resumed ones).
TrainLoopResult train_loop(const Dataset& data, SceneModel model, const TrainConfig& config,
                           const SamplingSpec& sampling, const TrainLoopOptions& options,
                           std::optional<OptimizerState> resume = std::nullopt);

/// PSNR and SSIM of the model's renders against the given dataset frames.
MetricReport evaluate(const SceneModel& model, const Dataset& data, const SamplingSpec& sampling,
                      const std::vector<int>& frames, int threads = 1);

} // namespace blrf
