// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/common.hpp>
#include <blrf/image.hpp>
#include <blrf/model.hpp>

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace blrf {

/// Pinhole camera. Camera space is right-handed, x right, y up, looking down -z.
struct Camera {
    int width = 1;
    int height = 1;
    double fx = 1.0, fy = 1.0;
    double cx = 0.5, cy = 0.5;
    Mat4 c2w = identity4();

    /// fx = fy = width / (2 tan(angle / 2)), principal point at the image center.
    static Camera from_fov(int width, int height, double camera_angle_x, const Mat4& c2w);

    void validate() const;
    Vec3 origin() const { return {c2w[3], c2w[7], c2w[11]}; }
};

/// Look-at pose: camera at `eye` looking toward `target`, `up` roughly vertical.
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

struct Ray {
    Vec3 origin{};
    Vec3 direction{0.0, 0.0, -1.0};
    int row = 0;
    int col = 0;
};

struct Pixel {
    int row = 0;
    int col = 0;
};

Ray ray_for_pixel(const Camera& camera, int row, int col);
std::vector<Ray> rays_for_pixels(const Camera& camera, std::span<const Pixel> pixels);

struct SamplingSpec {
    double near = 1.0;
    double far = 5.0;
    int n_samples = 64;
    bool perturb = false;
    Vec3 background{1.0, 1.0, 1.0};

    void validate() const;
    bool operator==(const SamplingSpec&) const = default;
};

struct RaySamples {
    std::vector<double> depths;
    std::vector<Vec3> points;
    /// Nonzero where the point falls outside the scene cube.
    std::vector<std::uint8_t> culled;
};

/// Bin midpoints on [near, far], or a uniform draw inside each bin when perturbing.
RaySamples sample_along_ray(const Ray& ray, const SamplingSpec& spec, double scene_bound, Rng* rng);

struct CompositeResult {
    Vec3 rgb{};
    double opacity = 0.0;
    std::vector<double> weights;
    /// T_1..T_{N+1}.
    std::vector<double> transmittance;
};

/// Emission-absorption quadrature with delta_N = far - h_N and background through T_{N+1}.
CompositeResult composite(std::span<const double> sigmas, std::span<const Vec3> colors, std::span<const double> depths,
                          double far, const Vec3& background);

struct CompositeGrad {
    std::vector<double> d_sigma;
    std::vector<Vec3> d_color;
};

CompositeGrad composite_backward(std::span<const double> sigmas, std::span<const Vec3> colors,
                                 std::span<const double> depths, double far, const Vec3& background,
                                 const Vec3& d_rgb);

/// Per-ray forward intermediates needed by backward_ray.
struct RayCache {
    RaySamples samples;
    std::vector<Stencil> stencils;
    std::vector<double> raw_sigma;
    std::vector<Vec3> raw_rgb;
    std::vector<double> sigmas;
    std::vector<Vec3> colors;
};

/// Per-bin jitter offsets in [0, 1) for a perturbed ray (n_samples values).
std::vector<double> draw_jitter(const SamplingSpec& spec, Rng& rng);

/// Renders one ray of the model at the instant described by `ctx`. `jitter`
/// holds per-bin offsets in [0, 1); empty means bin midpoints.
Vec3 render_ray(const SceneModel& model, const TimeContext& ctx, const Ray& ray, const SamplingSpec& spec,
                std::span<const double> jitter = {}, RayCache* cache = nullptr);

/// Reverse pass of render_ray for upstream dL/dpixel. Field gradients go to `grads`,
/// coefficient gradients to `tg` (finish with finish_time_backward).
void backward_ray(const SceneModel& model, const TimeContext& ctx, const RayCache& cache, const SamplingSpec& spec,
                  const Vec3& d_rgb, ModelGradients& grads, TimeGradients& tg);

/// Gradient of sum_r d_rgb[r] . pixel_r over a batch of rays at one instant.
ModelGradients backward_render(const SceneModel& model, double t, std::span<const Ray> rays,
                               std::span<const Vec3> d_rgb, const SamplingSpec& spec);

/// Renders a full image at bin midpoints (perturb is ignored); `threads` > 1 splits rows across workers.
Image render_image(const SceneModel& model, const Camera& camera, double t, const SamplingSpec& spec,
                   int threads = 1);

/// Generic radiance source used for analytic ground-truth scenes.
using RadianceFn = std::function<PointSample(const Vec3& world, double t)>;

Vec3 render_ray_fn(const RadianceFn& fn, double t, const Ray& ray, const SamplingSpec& spec, double scene_bound,
                   std::span<const double> jitter = {}, double* opacity = nullptr);

/// Renders a full image from an analytic source; `opacity`, when given, receives per-pixel opacity.
Image render_image_fn(const RadianceFn& fn, const Camera& camera, double t, const SamplingSpec& spec,
                      double scene_bound, std::vector<double>* opacity = nullptr, int threads = 1);

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads` workers.
void parallel_chunks(int n, int threads, const std::function<void(int, int, int)>& body);

} // namespace blrf
