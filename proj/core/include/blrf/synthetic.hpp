// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/dataset.hpp>
#include <blrf/renderer.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace blrf {

enum class SceneKind { StaticBlob, MovingBlob, ColorChangeBlob, ScaleBlob };

std::string to_string(SceneKind kind);
/// Accepts the dashed CLI names: static-blob, moving-blob, color-change-blob, scale-blob.
SceneKind scene_kind_from_string(const std::string& name);

/// Gaussian density blob whose center, radius and color move linearly in time:
/// sigma(x, t) = peak_density * exp(-|x - p(t)|^2 / (2 r(t)^2)).
struct SyntheticSceneSpec {
    SceneKind kind = SceneKind::StaticBlob;
    Vec3 center_start{}, center_end{};
    double radius_start = 0.3, radius_end = 0.3;
    double peak_density = 10.0;
    Vec3 color_start{0.9, 0.45, 0.2}, color_end{0.9, 0.45, 0.2};
    Vec3 background{1.0, 1.0, 1.0};

    static SyntheticSceneSpec preset(SceneKind kind);

    Vec3 center(double t) const;
    double radius(double t) const;
    Vec3 color(double t) const;
};

PointSample analytic_field_eval(const SyntheticSceneSpec& spec, const Vec3& x, double t);

/// Cameras on a circular arc of `radius` at `height` around the y axis, all looking
/// at the origin. Frame i of N sits at angle span * ((i + 0.5) / N - 0.5), so a
/// full-circle span spaces the frames evenly without repeating a pose.
struct OrbitSpec {
    double radius = 4.0;
    double height = 1.0;
    double angular_span = 6.283185307179586;
    double camera_angle_x = 0.9;
    double scene_bound = 1.0;
};

/// Camera-to-world pose on the orbit at `angle` radians, looking at the origin.
Mat4 orbit_pose(const OrbitSpec& orbit, double angle);

struct GenerationOptions {
    int n_frames = 16;
    int image_size = 64;
    int n_quad_samples = 1024;
    /// Frame i trains when (i + split_phase) % split_period < split_train. The default
    /// 3-in-4 pattern holds out frames 2, 6, 10, ... so test times stay inside the
    /// span of training times.
    int split_period = 4;
    int split_train = 3;
    int split_phase = 1;
    int threads = 1;
};

struct GeneratedDataset {
    DatasetManifest manifest;
    std::vector<Image> images;
    /// Per-frame row-major opacity maps of the ground-truth render.
    std::vector<std::vector<double>> opacity;
};

/// Renders the analytic scene on the orbit; deterministic.
GeneratedDataset generate_frames(const SyntheticSceneSpec& spec, const OrbitSpec& orbit, const GenerationOptions& opt);

/// generate_frames plus transforms.json and frames/f_NNN.png written under `out_dir`.
GeneratedDataset generate_dataset(const SyntheticSceneSpec& spec, const OrbitSpec& orbit,
                                  const GenerationOptions& opt, const std::filesystem::path& out_dir);

/// near/far that bracket the scene cube from a camera at distance `dist` from the origin.
std::pair<double, double> near_far_for(const OrbitSpec& orbit);

} // namespace blrf
