// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/checkpoint.hpp>
#include <blrf/metrics.hpp>
#include <blrf/training.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

namespace blrf {

void TrainConfig::validate() const
{
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda_hp >= 0.0)) throw ConfigError("loss weights must be nonnegative");
    if (batch_rays < 1) throw ConfigError("batch_rays must be positive");
    if (iters < 0) throw ConfigError("iters must be nonnegative");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    if (!(lr_tensor_max > 0.0 && lr_mlp_max > 0.0)) throw ConfigError("learning rates must be positive");
    if (lr_cycle_period < 2) throw ConfigError("lr_cycle_period must be >= 2");
    if (!(lr_floor_ratio > 0.0 && lr_floor_ratio <= 1.0)) throw ConfigError("lr_floor_ratio must lie in (0, 1]");
    if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be nonnegative");
    if (highpass_samples < 3) throw ConfigError("highpass_samples must be >= 3");
}

double photometric_loss(std::span<const Vec3> pred, std::span<const Vec3> gt)
{
    if (pred.size() != gt.size()) throw ContractError("prediction and target batch sizes differ");
    if (pred.empty()) throw ContractError("empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Vec3 d = pred[i] - gt[i];
        s += dot(d, d);
    }
    return s / static_cast<double>(pred.size());
}

double cyclic_lr(std::int64_t iter, double lr_max, int period, double floor_ratio)
{
    if (period < 2) throw ContractError("learning-rate period must be >= 2");
    const double phase = static_cast<double>(iter % period) / period;
    const double tri = std::abs(1.0 - 2.0 * phase);
    const double floor = lr_max * floor_ratio;
    return floor + (lr_max - floor) * tri;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr, double beta1,
               double beta2, double eps)
{
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ContractError("Adam buffers are not congruent with the parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw TrainingError("non-finite gradient at Adam step " + std::to_string(state.step + 1) + " (entry " +
                                std::to_string(i) + ")");
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

OptimizerState make_optimizer_state(const SceneModel& model)
{
    OptimizerState s;
    s.density = AdamState(model.density.parameters().size());
    s.color = AdamState(model.color.parameters().size());
    s.density_basis = AdamState(model.density_basis.parameters().size());
    s.color_basis = AdamState(model.color_basis.parameters().size());
    return s;
}

void round_to_storage(std::span<double> values)
{
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

void round_to_storage(SceneModel& model)
{
    round_to_storage(model.density.parameters());
    round_to_storage(model.color.parameters());
    round_to_storage(model.density_basis.parameters());
    round_to_storage(model.color_basis.parameters());
}

RayBatch draw_batch(const Dataset& data, const TrainConfig& config, const SamplingSpec& sampling, Rng& rng)
{
    const auto& train = data.manifest.train_idx;
    if (train.empty()) throw ConfigError("dataset has no training frames");
    const int w = data.manifest.width;
    const auto pixels = static_cast<std::uint64_t>(w) * data.manifest.height;
    RayBatch b;
    b.rays.reserve(config.batch_rays);
    b.slot.reserve(config.batch_rays);
    b.targets.reserve(config.batch_rays);
    if (sampling.perturb) b.jitter.reserve(static_cast<std::size_t>(config.batch_rays) * sampling.n_samples);
    std::map<int, int> slot_of_frame;
    for (int r = 0; r < config.batch_rays; ++r) {
        const int frame = train[rng.below(train.size())];
        const auto p = static_cast<int>(rng.below(pixels));
        const int row = p / w;
        const int col = p % w;
        auto [it, inserted] = slot_of_frame.emplace(frame, static_cast<int>(b.times.size()));
        if (inserted) b.times.push_back(data.manifest.frames[frame].time);
        b.slot.push_back(it->second);
        b.rays.push_back(ray_for_pixel(data.cameras[frame], row, col));
        b.targets.push_back(data.images[frame].pixel(row, col));
        if (sampling.perturb) {
            for (int s = 0; s < sampling.n_samples; ++s) b.jitter.push_back(rng.uniform());
        }
    }
    return b;
}

namespace {

double basis_highpass(const TimeBasis& basis, int samples, double weight, std::span<double> grad)
{
    const BasisSamples s = sample_basis(basis, samples);
    const double value = highpass_penalty(s);
    if (weight > 0.0 && basis.family() == BasisFamily::Neural && !grad.empty()) {
        const auto g = highpass_grad(s);
        std::vector<double> up(s.cols);
        for (int r = 0; r < s.rows; ++r) {
            for (int c = 0; c < s.cols; ++c) up[c] = weight * g[static_cast<std::size_t>(r) * s.cols + c];
            basis.backward(static_cast<double>(r) / (s.rows - 1), up, grad);
        }
    }
    return value;
}

} // namespace

LossBreakdown loss_and_grad(const SceneModel& model, const RayBatch& batch, const TrainConfig& config,
                            const SamplingSpec& sampling, ModelGradients* grads, int threads)
{
    const std::size_t n_rays = batch.rays.size();
    if (n_rays == 0) throw ContractError("empty ray batch");
    if (batch.slot.size() != n_rays || batch.targets.size() != n_rays) throw ContractError("ray batch is ragged");
    const auto n_samples = static_cast<std::size_t>(sampling.n_samples);
    if (!batch.jitter.empty() && batch.jitter.size() != n_rays * n_samples) {
        throw ContractError("ray batch jitter has the wrong length");
    }

    std::vector<TimeContext> contexts;
    contexts.reserve(batch.times.size());
    for (double t : batch.times) contexts.push_back(prepare_time(model, t));

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n_rays)));
    std::vector<double> partial(workers, 0.0);
    std::vector<ModelGradients> extra;
    if (grads) {
        for (int w = 1; w < workers; ++w) extra.emplace_back(model);
    }
    std::vector<std::vector<TimeGradients>> time_grads(workers);
    for (auto& tg : time_grads) tg.assign(contexts.size(), TimeGradients(model));

    const double scale = 2.0 / static_cast<double>(n_rays);
    parallel_chunks(static_cast<int>(n_rays), workers, [&](int w, int begin, int end) {
        ModelGradients* g = grads ? (w == 0 ? grads : &extra[w - 1]) : nullptr;
        RayCache cache;
        double sum = 0.0;
        for (int r = begin; r < end; ++r) {
            const int slot = batch.slot[r];
            const std::span<const double> jitter =
                batch.jitter.empty() ? std::span<const double>{}
                                     : std::span<const double>(batch.jitter).subspan(r * n_samples, n_samples);
            const Vec3 pred = render_ray(model, contexts[slot], batch.rays[r], sampling, jitter, g ? &cache : nullptr);
            const Vec3 diff = pred - batch.targets[r];
            sum += dot(diff, diff);
            if (g) backward_ray(model, contexts[slot], cache, sampling, scale * diff, *g, time_grads[w][slot]);
        }
        partial[w] = sum;
    });

    LossBreakdown loss;
    double sum = 0.0;
    for (double p : partial) sum += p;
    loss.photometric = sum / static_cast<double>(n_rays);

    if (grads) {
        for (auto& e : extra) grads->add(e);
        for (std::size_t s = 0; s < contexts.size(); ++s) {
            TimeGradients total = time_grads[0][s];
            for (int w = 1; w < workers; ++w) {
                for (std::size_t k = 0; k < total.density.size(); ++k) total.density[k] += time_grads[w][s].density[k];
                for (std::size_t k = 0; k < total.color.size(); ++k) total.color[k] += time_grads[w][s].color[k];
            }
            finish_time_backward(model, contexts[s], total, *grads);
        }
    }

    loss.tv_density = tv_penalty(model.density);
    loss.tv_color = tv_penalty(model.color);
    if (grads) {
        tv_backward(model.density, config.lambda1, grads->density);
        tv_backward(model.color, config.lambda2, grads->color);
    }

    loss.highpass = basis_highpass(model.density_basis, config.highpass_samples, config.lambda_hp,
                                   grads ? std::span<double>(grads->density_basis) : std::span<double>{}) +
                    basis_highpass(model.color_basis, config.highpass_samples, config.lambda_hp,
                                   grads ? std::span<double>(grads->color_basis) : std::span<double>{});

    loss.total = loss.photometric + config.lambda1 * loss.tv_density + config.lambda2 * loss.tv_color +
                 config.lambda_hp * loss.highpass;
    return loss;
}

Trainer::Trainer(const Dataset& data, SceneModel model, TrainConfig config, SamplingSpec sampling,
                 std::optional<OptimizerState> resume, int threads)
    : data_(data),
      model_(std::move(model)),
      config_(config),
      sampling_(sampling),
      opt_(resume ? std::move(*resume) : make_optimizer_state(model_)),
      threads_(threads),
      grads_(model_)
{
    config_.validate();
    sampling_.validate();
    model_.validate();
    if (data_.manifest.train_idx.empty()) throw ConfigError("dataset has no training frames");
    const OptimizerState shape = make_optimizer_state(model_);
    if (opt_.density.m.size() != shape.density.m.size() || opt_.color.m.size() != shape.color.m.size() ||
        opt_.density_basis.m.size() != shape.density_basis.m.size() ||
        opt_.color_basis.m.size() != shape.color_basis.m.size()) {
        throw ConfigError("optimizer state does not match the model");
    }
    round_to_storage(model_);
}

double Trainer::lr_tensor() const
{
    return cyclic_lr(opt_.iteration, config_.lr_tensor_max, config_.lr_cycle_period, config_.lr_floor_ratio);
}

double Trainer::lr_mlp() const
{
    return cyclic_lr(opt_.iteration, config_.lr_mlp_max, config_.lr_cycle_period, config_.lr_floor_ratio);
}

LossBreakdown Trainer::step()
{
    const std::int64_t it = opt_.iteration;
    Rng rng(config_.seed, static_cast<std::uint64_t>(it));
    const RayBatch batch = draw_batch(data_, config_, sampling_, rng);
    grads_.zero();
    const LossBreakdown loss = loss_and_grad(model_, batch, config_, sampling_, &grads_, threads_);
    if (!std::isfinite(loss.total)) {
        throw TrainingError("non-finite loss at iteration " + std::to_string(it) +
                            " (photometric=" + std::to_string(loss.photometric) +
                            ", tv_density=" + std::to_string(loss.tv_density) +
                            ", tv_color=" + std::to_string(loss.tv_color) + ")");
    }

    if (config_.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto* v : {&grads_.density, &grads_.color, &grads_.density_basis, &grads_.color_basis}) {
            for (double g : *v) sq += g * g;
        }
        const double gnorm = std::sqrt(sq);
        if (gnorm > config_.grad_clip) {
            const double s = config_.grad_clip / gnorm;
            for (auto* v : {&grads_.density, &grads_.color, &grads_.density_basis, &grads_.color_basis}) {
                for (double& g : *v) g *= s;
            }
        }
    }

    const double lr_t = lr_tensor();
    const double lr_m = lr_mlp();
    auto update = [&](std::span<double> params, const std::vector<double>& g, AdamState& st, double lr) {
        if (params.empty()) return;
        try {
            adam_step(params, g, st, lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps);
        } catch (const TrainingError& e) {
            throw TrainingError("iteration " + std::to_string(it) + ": " + e.what());
        }
        round_to_storage(params);
        round_to_storage(st.m);
        round_to_storage(st.v);
    };
    update(model_.density.parameters(), grads_.density, opt_.density, lr_t);
    update(model_.color.parameters(), grads_.color, opt_.color, lr_t);
    update(model_.density_basis.parameters(), grads_.density_basis, opt_.density_basis, lr_m);
    update(model_.color_basis.parameters(), grads_.color_basis, opt_.color_basis, lr_m);
    opt_.iteration = it + 1;
    return loss;
}

namespace {

std::string log_row(std::int64_t it, const LossBreakdown& l, double lr_t, double lr_m, double seconds)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n", static_cast<long long>(it),
                  l.photometric, l.tv_density, l.tv_color, l.highpass, l.total, lr_t, lr_m, seconds);
    return buf;
}

} // namespace

TrainLoopResult train_loop(const Dataset& data, SceneModel model, const TrainConfig& config,
                           const SamplingSpec& sampling, const TrainLoopOptions& options,
                           std::optional<OptimizerState> resume)
{
    Trainer trainer(data, std::move(model), config, sampling, std::move(resume), options.threads);
    std::ofstream log;
    if (!options.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(options.out_dir, ec);
        if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
        const auto log_path = options.out_dir / "log.csv";
        const bool fresh = !options.append_log || !std::filesystem::exists(log_path);
        log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("cannot open " + log_path.string());
        if (fresh) log << "iter,photometric,tv_density,tv_color,highpass,total,lr_tensor,lr_mlp,seconds\n";
    }

    TrainLoopResult result{trainer.model(), trainer.optimizer(), {}};
    const auto start = std::chrono::steady_clock::now();
    const bool can_validate = options.validate_every > 0 && !data.manifest.test_idx.empty();
    while (trainer.iteration() < config.iters) {
        const std::int64_t it = trainer.iteration();
        const double lr_t = trainer.lr_tensor();
        const double lr_m = trainer.lr_mlp();
        const LossBreakdown loss = trainer.step();
        result.losses.push_back(loss);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (log.is_open()) log << log_row(it, loss, lr_t, lr_m, seconds);
        if (options.console && options.log_every > 0 && (it % options.log_every == 0 || it + 1 == config.iters)) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "iter %6lld  loss %.6f  photo %.6f  psnr %.2f  tv_d %.3g  tv_c %.3g  %.1fs\n",
                          static_cast<long long>(it), loss.total, loss.photometric,
                          -10.0 * std::log10(std::max(loss.photometric / 3.0, 1e-30)), loss.tv_density, loss.tv_color,
                          seconds);
            *options.console << buf << std::flush;
        }
        if (can_validate && (it + 1) % options.validate_every == 0) {
            const int frame = data.manifest.test_idx.front();
            const Image img = render_image(trainer.model(), data.cameras[frame], data.manifest.frames[frame].time,
                                           sampling, options.threads);
            const double p = psnr(img, data.images[frame]);
            if (options.console) *options.console << "  validation frame " << frame << " psnr " << p << " dB\n";
            if (!options.out_dir.empty()) {
                std::filesystem::create_directories(options.out_dir / "renders");
                char name[64];
                std::snprintf(name, sizeof(name), "val_%06lld.png", static_cast<long long>(it + 1));
                write_png(options.out_dir / "renders" / name, img);
            }
        }
    }

    result.model = trainer.model();
    result.optimizer = trainer.optimizer();
    if (!options.out_dir.empty()) {
        save_checkpoint(options.out_dir / "checkpoint.blrf",
                        Checkpoint{result.model, sampling, config, result.optimizer});
    }
    return result;
}

MetricReport evaluate(const SceneModel& model, const Dataset& data, const SamplingSpec& sampling,
                      const std::vector<int>& frames, int threads)
{
    MetricReport report;
    for (int f : frames) {
        if (f < 0 || f >= static_cast<int>(data.images.size())) {
            throw ContractError("evaluate: frame " + std::to_string(f) + " outside the dataset");
        }
        const Image img = render_image(model, data.cameras[f], data.manifest.frames[f].time, sampling, threads);
        report.frames.push_back({f, psnr(img, data.images[f]), ssim(img, data.images[f])});
    }
    return report;
}

} // namespace blrf
