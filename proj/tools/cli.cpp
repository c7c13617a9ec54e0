// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <blrf/checkpoint.hpp>
#include <blrf/config.hpp>
#include <blrf/dataset.hpp>
#include <blrf/gradcheck.hpp>
#include <blrf/metrics.hpp>
#include <blrf/synthetic.hpp>
#include <blrf/training.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>

namespace blrf::cli {

namespace {

namespace fs = std::filesystem;

/// Parses "a:b:n" into n evenly spaced values from a to b inclusive.
std::vector<double> parse_sweep(const std::string& text, const char* flag)
{
    double a = 0.0, b = 0.0;
    int n = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &a, &b, &n, &tail) != 3 || n < 1) {
        throw ConfigError(std::string(flag) + " expects start:end:count, got '" + text + "'");
    }
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    return v;
}

void check_time(double t)
{
    if (!(t >= 0.0 && t <= 1.0)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "time outside [0,1]: %g", t);
        throw ConfigError(buf);
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void make_dirs(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------- make-synthetic

struct SyntheticArgs {
    std::string scene;
    std::string out;
    int frames = 16;
    int size = 64;
    int quad_samples = 1024;
    double span_deg = 360.0;
    double radius = 4.0;
    double height = 1.0;
    int threads = 1;
};

void add_synthetic(CLI::App& app, SyntheticArgs& a)
{
    auto* c = app.add_subcommand("make-synthetic", "Render an analytic blob scene into a dataset directory");
    c->add_option("--scene", a.scene, "Scene preset")
        ->required()
        ->check(CLI::IsMember({"static-blob", "moving-blob", "color-change-blob", "scale-blob"}));
    c->add_option("--out", a.out, "Output dataset directory")->required();
    c->add_option("--frames", a.frames, "Number of frames")->capture_default_str();
    c->add_option("--size", a.size, "Image width and height in pixels")->capture_default_str();
    c->add_option("--quad-samples", a.quad_samples, "Quadrature samples per ground-truth ray")->capture_default_str();
    c->add_option("--orbit-span", a.span_deg, "Orbit angular span in degrees")->capture_default_str();
    c->add_option("--orbit-radius", a.radius, "Orbit radius")->capture_default_str();
    c->add_option("--orbit-height", a.height, "Camera height above the orbit plane")->capture_default_str();
    c->add_option("--threads", a.threads, "Worker threads")->capture_default_str();
}

int cmd_synthetic(const SyntheticArgs& a, std::ostream& out)
{
    const SyntheticSceneSpec spec = SyntheticSceneSpec::preset(scene_kind_from_string(a.scene));
    OrbitSpec orbit;
    orbit.angular_span = a.span_deg * std::numbers::pi / 180.0;
    orbit.radius = a.radius;
    orbit.height = a.height;
    GenerationOptions opt;
    opt.n_frames = a.frames;
    opt.image_size = a.size;
    opt.n_quad_samples = a.quad_samples;
    opt.threads = a.threads;
    if (a.quad_samples < 1) throw ConfigError("--quad-samples must be positive");
    if (a.threads < 1) throw ConfigError("--threads must be positive");
    const GeneratedDataset ds = generate_dataset(spec, orbit, opt, a.out);
    out << "wrote " << ds.images.size() << " frames (" << ds.manifest.train_idx.size() << " train, "
        << ds.manifest.test_idx.size() << " test) to " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::string profile = "paper";
    std::optional<std::string> data, out, basis, sinc, resume;
    std::optional<int> iters, threads, grid_res, components, subdim, batch, samples, log_every, validate_every;
    std::optional<int> embed_freqs, hidden_width;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_tv, lambda_hp, lr_tensor, lr_mlp, grad_clip;
    bool no_perturb = false;
    bool no_eval = false;
};

void add_train(CLI::App& app, TrainArgs& a)
{
    auto* c = app.add_subcommand("train", "Fit a model to a dataset");
    c->add_option("--config", a.config, "JSON config file (flags override its values)");
    c->add_option("--profile", a.profile, "Base profile: paper or desk")->capture_default_str();
    c->add_option("--data", a.data, "Dataset directory or manifest");
    c->add_option("--out", a.out, "Output directory");
    c->add_option("--resume", a.resume, "Continue from a checkpoint (model, optimizer and settings come from it)");
    c->add_option("--iters", a.iters, "Total iterations");
    c->add_option("--seed", a.seed, "Seed for initialization and ray sampling");
    c->add_option("--threads", a.threads, "Worker threads");
    c->add_option("--basis", a.basis, "Time basis for both fields: neural, dct, fourier or bernstein");
    c->add_option("--sinc", a.sinc, "Sinc window: normalized or literal");
    c->add_option("--grid-res", a.grid_res, "Grid nodes per axis (D)");
    c->add_option("--components", a.components, "Spatial components per field (K)");
    c->add_option("--subdim", a.subdim, "Submanifold dimension (W)");
    c->add_option("--embed-freqs", a.embed_freqs, "Positional-embedding octaves of the neural basis");
    c->add_option("--hidden-width", a.hidden_width, "Hidden width of the neural basis");
    c->add_option("--batch", a.batch, "Rays per iteration");
    c->add_option("--samples", a.samples, "Samples per ray");
    c->add_flag("--no-perturb", a.no_perturb, "Use bin midpoints instead of stratified jitter");
    c->add_option("--lambda-tv", a.lambda_tv, "Weight of both TV terms");
    c->add_option("--lambda-hp", a.lambda_hp, "Weight of the high-pass basis penalty");
    c->add_option("--lr-tensor", a.lr_tensor, "Peak learning rate of the field tensors");
    c->add_option("--lr-mlp", a.lr_mlp, "Peak learning rate of the basis networks");
    c->add_option("--grad-clip", a.grad_clip, "Global gradient-norm clip (0 disables)");
    c->add_option("--log-every", a.log_every, "Console log interval in iterations");
    c->add_option("--validate-every", a.validate_every, "Validation render interval (0 disables)");
    c->add_flag("--no-eval", a.no_eval, "Skip the final test-split evaluation");
}

RunConfig resolve_config(const TrainArgs& a)
{
    RunConfig c = profile_by_name(a.profile);
    if (!a.config.empty()) c = apply_config_file(c, a.config);
    if (a.data) c.data = *a.data;
    if (a.out) c.out = *a.out;
    if (a.iters) c.train.iters = *a.iters;
    if (a.seed) c.train.seed = *a.seed;
    if (a.threads) c.threads = *a.threads;
    if (a.basis) c.density_basis = c.color_basis = basis_family_from_string(*a.basis);
    if (a.sinc) c.density.sinc = c.color.sinc = sinc_kind_from_string(*a.sinc);
    for (FieldConfig* f : {&c.density, &c.color}) {
        if (a.grid_res) f->grid_res = *a.grid_res;
        if (a.components) f->num_components = *a.components;
        if (a.subdim) f->submanifold_dim = *a.subdim;
    }
    if (a.embed_freqs) c.basis_shape.embed_freqs = *a.embed_freqs;
    if (a.hidden_width) c.basis_shape.hidden_width = *a.hidden_width;
    if (a.batch) c.train.batch_rays = *a.batch;
    if (a.samples) c.sampling.n_samples = *a.samples;
    if (a.no_perturb) c.sampling.perturb = false;
    if (a.lambda_tv) c.train.lambda1 = c.train.lambda2 = *a.lambda_tv;
    if (a.lambda_hp) c.train.lambda_hp = *a.lambda_hp;
    if (a.lr_tensor) c.train.lr_tensor_max = *a.lr_tensor;
    if (a.lr_mlp) c.train.lr_mlp_max = *a.lr_mlp;
    if (a.grad_clip) c.train.grad_clip = *a.grad_clip;
    if (a.log_every) c.log_every = *a.log_every;
    if (a.validate_every) c.validate_every = *a.validate_every;
    if (c.data.empty()) throw ConfigError("train needs --data (or \"data\" in the config file)");
    if (c.out.empty()) throw ConfigError("train needs --out (or \"out\" in the config file)");
    c.validate();
    return c;
}

int cmd_train(const TrainArgs& a, std::ostream& out)
{
    RunConfig rc = resolve_config(a);
    const Dataset data = load_dataset(rc.data);
    rc.sampling.near = data.manifest.near;
    rc.sampling.far = data.manifest.far;
    rc.sampling.background = data.manifest.background;

    std::optional<Checkpoint> resumed;
    if (a.resume) {
        resumed = load_checkpoint(*a.resume);
        if (resumed->optimizer.iteration > rc.train.iters) {
            throw ConfigError("checkpoint is already past --iters (" + std::to_string(resumed->optimizer.iteration) +
                              " > " + std::to_string(rc.train.iters) + ")");
        }
        // The run continues with the checkpoint's own settings; only the horizon comes from the command line.
        const int iters = rc.train.iters;
        rc.train = resumed->train;
        rc.train.iters = iters;
        rc.sampling = resumed->sampling;
        rc.density = resumed->model.density.config();
        rc.color = resumed->model.color.config();
        rc.density_basis = resumed->model.density_basis.family();
        rc.color_basis = resumed->model.color_basis.family();
        if (rc.density_basis == BasisFamily::Neural) rc.basis_shape = resumed->model.density_basis.shape();
    }

    const fs::path out_dir = rc.out;
    make_dirs(out_dir);
    write_text(out_dir / "config.json", to_json_string(rc));

    TrainLoopOptions lo;
    lo.out_dir = out_dir;
    lo.log_every = rc.log_every;
    lo.validate_every = rc.validate_every;
    lo.console = &out;
    lo.threads = rc.threads;
    lo.append_log = resumed.has_value();
    out << "training " << rc.profile << " profile: D=" << rc.density.grid_res << " K=" << rc.density.num_components
        << " W=" << rc.density.submanifold_dim << " basis=" << to_string(rc.density_basis) << "/"
        << to_string(rc.color_basis) << " iters=" << rc.train.iters << "\n";

    TrainLoopResult result = resumed ? train_loop(data, resumed->model, rc.train, rc.sampling, lo, resumed->optimizer)
                                     : train_loop(data, init_model(rc), rc.train, rc.sampling, lo);

    if (!a.no_eval && !data.manifest.test_idx.empty()) {
        const MetricReport report = evaluate(result.model, data, rc.sampling, data.manifest.test_idx, rc.threads);
        report.write_csv(out_dir / "metrics.csv");
        report.print_table(out);
    }
    out << "checkpoint written to " << (out_dir / "checkpoint.blrf").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
    std::string checkpoint;
    std::string out;
    std::optional<std::string> data;
    std::optional<int> frame;
    std::optional<double> t;
    std::optional<std::string> t_sweep, angle_sweep;
    std::optional<double> angle_deg;
    int size = 64;
    double fov = 0.9;
    double radius = 4.0;
    double height = 1.0;
    int threads = 1;
    bool raw = false;
};

void add_render(CLI::App& app, RenderArgs& a)
{
    auto* c = app.add_subcommand("render", "Render images from a checkpoint");
    c->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
    c->add_option("--out", a.out, "Output directory")->required();
    auto* t = c->add_option("--t", a.t, "Render time in [0,1]");
    auto* ts = c->add_option("--t-sweep", a.t_sweep, "Time sweep start:end:count at a fixed pose");
    t->excludes(ts);
    auto* data = c->add_option("--data", a.data, "Dataset supplying camera poses");
    c->add_option("--frame", a.frame, "Dataset frame whose pose is used (default 0)")->needs(data);
    auto* ang = c->add_option("--orbit-angle", a.angle_deg, "Orbit pose angle in degrees");
    auto* as = c->add_option("--angle-sweep", a.angle_sweep, "Orbit pose sweep start:end:count in degrees at a fixed time");
    ang->excludes(as);
    ang->excludes(data);
    as->excludes(data);
    as->excludes(ts);
    c->add_option("--size", a.size, "Image size for orbit poses")->capture_default_str();
    c->add_option("--fov", a.fov, "Horizontal field of view in radians for orbit poses")->capture_default_str();
    c->add_option("--orbit-radius", a.radius, "Orbit radius")->capture_default_str();
    c->add_option("--orbit-height", a.height, "Orbit camera height")->capture_default_str();
    c->add_option("--threads", a.threads, "Worker threads")->capture_default_str();
    c->add_flag("--raw", a.raw, "Also write float32 .f32 dumps next to each PNG");
}

int cmd_render(const RenderArgs& a, std::ostream& out)
{
    std::vector<double> times;
    if (a.t_sweep) {
        times = parse_sweep(*a.t_sweep, "--t-sweep");
    } else if (a.t) {
        times = {*a.t};
    } else {
        throw ConfigError("render needs --t or --t-sweep");
    }
    for (double t : times) check_time(t);
    if (a.threads < 1) throw ConfigError("--threads must be positive");

    std::vector<Camera> cameras;
    if (a.data) {
        const DatasetManifest m = load_manifest(fs::is_directory(*a.data) ? fs::path(*a.data) / "transforms.json"
                                                                           : fs::path(*a.data));
        const int f = a.frame.value_or(0);
        if (f < 0 || f >= static_cast<int>(m.frames.size())) {
            throw ConfigError("--frame " + std::to_string(f) + " outside the dataset");
        }
        cameras.push_back(m.camera(f));
    } else {
        OrbitSpec orbit;
        orbit.radius = a.radius;
        orbit.height = a.height;
        const std::vector<double> angles =
            a.angle_sweep ? parse_sweep(*a.angle_sweep, "--angle-sweep") : std::vector<double>{a.angle_deg.value_or(0.0)};
        for (double deg : angles) {
            cameras.push_back(Camera::from_fov(a.size, a.size, a.fov, orbit_pose(orbit, deg * std::numbers::pi / 180.0)));
        }
    }

    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    make_dirs(a.out);
    int index = 0;
    for (const Camera& cam : cameras) {
        for (double t : times) {
            const Image img = render_image(ckpt.model, cam, t, ckpt.sampling, a.threads);
            char name[64];
            std::snprintf(name, sizeof(name), "render_%03d", index++);
            const fs::path base = fs::path(a.out) / name;
            write_png(fs::path(base).replace_extension(".png"), img);
            if (a.raw) write_raw(fs::path(base).replace_extension(".f32"), img);
        }
    }
    out << "wrote " << index << " images to " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::optional<std::string> out;
    int threads = 1;
};

void add_eval(CLI::App& app, EvalArgs& a)
{
    auto* c = app.add_subcommand("eval", "Compute PSNR and SSIM of a checkpoint on a dataset split");
    c->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
    c->add_option("--data", a.data, "Dataset directory or manifest")->required();
    c->add_option("--split", a.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    c->add_option("--out", a.out, "Directory receiving metrics.csv");
    c->add_option("--threads", a.threads, "Worker threads")->capture_default_str();
}

int cmd_eval(const EvalArgs& a, std::ostream& out)
{
    if (a.threads < 1) throw ConfigError("--threads must be positive");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const Dataset data = load_dataset(a.data);
    const std::vector<int> frames = data.manifest.split(a.split);
    if (frames.empty()) throw ConfigError("split '" + a.split + "' has no frames");
    SamplingSpec sampling = ckpt.sampling;
    sampling.near = data.manifest.near;
    sampling.far = data.manifest.far;
    sampling.background = data.manifest.background;
    const MetricReport report = evaluate(ckpt.model, data, sampling, frames, a.threads);
    report.print_table(out);
    if (a.out) {
        make_dirs(*a.out);
        report.write_csv(fs::path(*a.out) / "metrics.csv");
    }
    return kExitOk;
}

// ---------------------------------------------------------------- grad-check

struct GradArgs {
    std::string profile = "default";
    std::string fault;
};

void add_grad(CLI::App& app, GradArgs& a)
{
    auto* c = app.add_subcommand("grad-check", "Compare analytic gradients with central finite differences");
    c->add_option("--profile", a.profile, "Check profile (only 'default')")
        ->check(CLI::IsMember({"default"}))
        ->capture_default_str();
    c->add_option("--inject-fault", a.fault, "Deliberately corrupt gradients: sign-flip")
        ->check(CLI::IsMember({"sign-flip"}));
}

int cmd_grad(const GradArgs& a, std::ostream& out)
{
    GradCheckOptions opt = default_gradcheck_options();
    opt.inject_sign_flip = a.fault == "sign-flip";
    const GradCheckReport report = run_gradcheck(opt);
    report.print(out);
    return report.passed() ? kExitOk : kExitUsage;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Band-limited dynamic radiance fields: data generation, training, rendering and evaluation", "blrf"};
    app.require_subcommand(1);
    app.fallthrough(false);

    SyntheticArgs synth;
    TrainArgs train;
    RenderArgs render;
    EvalArgs eval;
    GradArgs grad;
    add_synthetic(app, synth);
    add_train(app, train);
    add_render(app, render);
    add_eval(app, eval);
    add_grad(app, grad);

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        // Usage errors get the help text of the subcommand they concern.
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (app.got_subcommand("make-synthetic")) return cmd_synthetic(synth, out);
        if (app.got_subcommand("train")) return cmd_train(train, out);
        if (app.got_subcommand("render")) return cmd_render(render, out);
        if (app.got_subcommand("eval")) return cmd_eval(eval, out);
        if (app.got_subcommand("grad-check")) return cmd_grad(grad, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace blrf::cli
