// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/synthetic.hpp>

#include <cstdio>

namespace blrf {

std::string to_string(SceneKind kind)
{
    switch (kind) {
    case SceneKind::StaticBlob: return "static-blob";
    case SceneKind::MovingBlob: return "moving-blob";
    case SceneKind::ColorChangeBlob: return "color-change-blob";
    case SceneKind::ScaleBlob: return "scale-blob";
    }
    return "unknown";
}

SceneKind scene_kind_from_string(const std::string& name)
{
    for (SceneKind k : {SceneKind::StaticBlob, SceneKind::MovingBlob, SceneKind::ColorChangeBlob, SceneKind::ScaleBlob}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown scene '" + name + "' (expected static-blob, moving-blob, color-change-blob or scale-blob)");
}

SyntheticSceneSpec SyntheticSceneSpec::preset(SceneKind kind)
{
    SyntheticSceneSpec s;
    s.kind = kind;
    switch (kind) {
    case SceneKind::StaticBlob: break;
    case SceneKind::MovingBlob:
        s.center_start = {-0.4, 0.0, 0.0};
        s.center_end = {0.4, 0.0, 0.0};
        s.radius_start = s.radius_end = 0.22;
        s.color_start = s.color_end = {0.2, 0.5, 0.9};
        break;
    case SceneKind::ColorChangeBlob:
        s.color_start = {1.0, 0.0, 0.0};
        s.color_end = {0.0, 0.0, 1.0};
        break;
    case SceneKind::ScaleBlob:
        s.radius_start = 0.15;
        s.radius_end = 0.4;
        s.color_start = s.color_end = {0.3, 0.8, 0.3};
        break;
    }
    return s;
}

Vec3 SyntheticSceneSpec::center(double t) const { return (1.0 - t) * center_start + t * center_end; }
double SyntheticSceneSpec::radius(double t) const { return (1.0 - t) * radius_start + t * radius_end; }
Vec3 SyntheticSceneSpec::color(double t) const { return (1.0 - t) * color_start + t * color_end; }

PointSample analytic_field_eval(const SyntheticSceneSpec& spec, const Vec3& x, double t)
{
    const Vec3 d = x - spec.center(t);
    const double r = spec.radius(t);
    return {spec.peak_density * std::exp(-dot(d, d) / (2.0 * r * r)), spec.color(t)};
}

std::pair<double, double> near_far_for(const OrbitSpec& orbit)
{
    const double dist = std::sqrt(orbit.radius * orbit.radius + orbit.height * orbit.height);
    const double half_diag = std::sqrt(3.0) * orbit.scene_bound;
    return {std::max(dist - half_diag, 0.05 * dist), dist + half_diag};
}

Mat4 orbit_pose(const OrbitSpec& orbit, double angle)
{
    const Vec3 eye{orbit.radius * std::sin(angle), orbit.height, orbit.radius * std::cos(angle)};
    return look_at(eye, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0});
}

GeneratedDataset generate_frames(const SyntheticSceneSpec& spec, const OrbitSpec& orbit, const GenerationOptions& opt)
{
    if (opt.n_frames < 1) throw ConfigError("n_frames must be >= 1");
    if (opt.image_size < 1) throw ConfigError("image size must be positive");
    if (opt.split_period < 1 || opt.split_train < 1 || opt.split_train > opt.split_period || opt.split_phase < 0) {
        throw ConfigError("invalid train/test interleave");
    }
    GeneratedDataset out;
    DatasetManifest& m = out.manifest;
    m.camera_angle_x = orbit.camera_angle_x;
    m.width = m.height = opt.image_size;
    std::tie(m.near, m.far) = near_far_for(orbit);
    m.background = spec.background;

    SamplingSpec sampling;
    sampling.near = m.near;
    sampling.far = m.far;
    sampling.n_samples = opt.n_quad_samples;
    sampling.background = spec.background;

    const RadianceFn fn = [&spec](const Vec3& x, double t) { return analytic_field_eval(spec, x, t); };
    for (int i = 0; i < opt.n_frames; ++i) {
        const double angle = orbit.angular_span * ((i + 0.5) / opt.n_frames - 0.5);
        FrameRecord f;
        char name[64];
        std::snprintf(name, sizeof(name), "frames/f_%03d.png", i);
        f.file_path = name;
        f.time = opt.n_frames > 1 ? static_cast<double>(i) / (opt.n_frames - 1) : 0.0;
        f.transform_matrix = orbit_pose(orbit, angle);
        m.frames.push_back(f);
        if ((i + opt.split_phase) % opt.split_period < opt.split_train) {
            m.train_idx.push_back(i);
        } else {
            m.test_idx.push_back(i);
        }
        std::vector<double> alpha;
        out.images.push_back(
            render_image_fn(fn, m.camera(i), f.time, sampling, orbit.scene_bound, &alpha, opt.threads));
        out.opacity.push_back(std::move(alpha));
    }
    m.validate();
    return out;
}

GeneratedDataset generate_dataset(const SyntheticSceneSpec& spec, const OrbitSpec& orbit,
                                  const GenerationOptions& opt, const std::filesystem::path& out_dir)
{
    GeneratedDataset out = generate_frames(spec, orbit, opt);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "frames", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "frames").string() + ": " + ec.message());
    for (std::size_t i = 0; i < out.images.size(); ++i) {
        write_png(out_dir / out.manifest.frames[i].file_path, out.images[i]);
    }
    save_manifest(out_dir / "transforms.json", out.manifest);
    return out;
}

} // namespace blrf
