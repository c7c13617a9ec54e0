// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/renderer.hpp>

#include <thread>

namespace blrf {

Camera Camera::from_fov(int width, int height, double camera_angle_x, const Mat4& c2w)
{
    if (!(camera_angle_x > 0.0 && camera_angle_x < 3.14159)) throw ConfigError("camera_angle_x must be in (0, pi)");
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * camera_angle_x);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.c2w = c2w;
    cam.validate();
    return cam;
}

void Camera::validate() const
{
    if (width < 1 || height < 1) throw ConfigError("camera image size must be positive");
    if (!(fx > 0.0 && fy > 0.0)) throw ConfigError("focal lengths must be positive");
    for (double v : c2w) {
        if (!std::isfinite(v)) throw ConfigError("camera pose has non-finite entries");
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double d = 0.0;
            for (int k = 0; k < 3; ++k) d += c2w[k * 4 + a] * c2w[k * 4 + b];
            if (std::abs(d - (a == b ? 1.0 : 0.0)) > 1e-4) throw ConfigError("camera rotation is not orthonormal");
        }
    }
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up)
{
    // Camera -z points at the target.
    const Vec3 back = normalized(eye - target);
    const Vec3 right = normalized(cross(up, back));
    const Vec3 true_up = cross(back, right);
    return {right[0], true_up[0], back[0], eye[0], right[1], true_up[1], back[1], eye[1],
            right[2], true_up[2], back[2], eye[2], 0.0,      0.0,        0.0,     1.0};
}

Ray ray_for_pixel(const Camera& camera, int row, int col)
{
    if (row < 0 || row >= camera.height || col < 0 || col >= camera.width) {
        throw ContractError("pixel (" + std::to_string(row) + ", " + std::to_string(col) + ") outside the image");
    }
    const Vec3 d_cam{(col + 0.5 - camera.cx) / camera.fx, -(row + 0.5 - camera.cy) / camera.fy, -1.0};
    const Mat4& m = camera.c2w;
    const Vec3 d_world{m[0] * d_cam[0] + m[1] * d_cam[1] + m[2] * d_cam[2],
                       m[4] * d_cam[0] + m[5] * d_cam[1] + m[6] * d_cam[2],
                       m[8] * d_cam[0] + m[9] * d_cam[1] + m[10] * d_cam[2]};
    return {camera.origin(), normalized(d_world), row, col};
}

std::vector<Ray> rays_for_pixels(const Camera& camera, std::span<const Pixel> pixels)
{
    std::vector<Ray> rays;
    rays.reserve(pixels.size());
    for (const Pixel& p : pixels) rays.push_back(ray_for_pixel(camera, p.row, p.col));
    return rays;
}

void SamplingSpec::validate() const
{
    if (!(near > 0.0 && near < far)) throw ConfigError("sampling needs 0 < near < far");
    if (n_samples < 1) throw ConfigError("n_samples must be positive");
    for (double b : background) {
        if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("background must lie in [0,1]^3");
    }
}

namespace {

void sample_into(const Ray& ray, const SamplingSpec& spec, double scene_bound, std::span<const double> jitter,
                 RaySamples& out)
{
    const int n = spec.n_samples;
    out.depths.resize(n);
    out.points.resize(n);
    out.culled.resize(n);
    const double bin = (spec.far - spec.near) / n;
    Vec3 unit;
    for (int i = 0; i < n; ++i) {
        const double offset = jitter.empty() ? 0.5 : jitter[i];
        const double h = spec.near + (i + offset) * bin;
        out.depths[i] = h;
        out.points[i] = ray.origin + h * ray.direction;
        out.culled[i] = world_to_unit(out.points[i], scene_bound, unit) ? 0 : 1;
    }
}

} // namespace

RaySamples sample_along_ray(const Ray& ray, const SamplingSpec& spec, double scene_bound, Rng* rng)
{
    spec.validate();
    RaySamples s;
    std::vector<double> jitter;
    if (spec.perturb && rng) jitter = draw_jitter(spec, *rng);
    sample_into(ray, spec, scene_bound, jitter, s);
    return s;
}

std::vector<double> draw_jitter(const SamplingSpec& spec, Rng& rng)
{
    std::vector<double> j(spec.n_samples);
    for (double& v : j) v = rng.uniform();
    return j;
}

namespace {

void check_composite_inputs(std::span<const double> sigmas, std::span<const Vec3> colors,
                            std::span<const double> depths, double far)
{
    const std::size_t n = sigmas.size();
    if (n == 0 || colors.size() != n || depths.size() != n) {
        throw ContractError("composite inputs must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigmas[i] >= 0.0)) throw ContractError("negative density in compositing");
        const double next = i + 1 < n ? depths[i + 1] : far;
        if (!(next - depths[i] >= 0.0)) throw ContractError("negative sample interval in compositing");
    }
}

inline double interval(std::span<const double> depths, std::size_t i, double far)
{
    return (i + 1 < depths.size() ? depths[i + 1] : far) - depths[i];
}

} // namespace

CompositeResult composite(std::span<const double> sigmas, std::span<const Vec3> colors, std::span<const double> depths,
                          double far, const Vec3& background)
{
    check_composite_inputs(sigmas, colors, depths, far);
    const std::size_t n = sigmas.size();
    CompositeResult r;
    r.weights.resize(n);
    r.transmittance.resize(n + 1);
    double trans = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        r.transmittance[i] = trans;
        const double e = std::exp(-sigmas[i] * interval(depths, i, far));
        const double w = trans * (1.0 - e);
        r.weights[i] = w;
        r.opacity += w;
        for (int k = 0; k < 3; ++k) r.rgb[k] += w * colors[i][k];
        trans *= e;
    }
    r.transmittance[n] = trans;
    for (int k = 0; k < 3; ++k) r.rgb[k] += trans * background[k];
    return r;
}

CompositeGrad composite_backward(std::span<const double> sigmas, std::span<const Vec3> colors,
                                 std::span<const double> depths, double far, const Vec3& background,
                                 const Vec3& d_rgb)
{
    const CompositeResult fwd = composite(sigmas, colors, depths, far, background);
    const std::size_t n = sigmas.size();
    CompositeGrad g;
    g.d_sigma.resize(n);
    g.d_color.resize(n);
    // Suffix of everything composited behind sample i, projected on d_rgb.
    double behind = fwd.transmittance[n] * dot(background, d_rgb);
    for (std::size_t i = n; i-- > 0;) {
        const double ci = dot(colors[i], d_rgb);
        g.d_sigma[i] = interval(depths, i, far) * (fwd.transmittance[i + 1] * ci - behind);
        g.d_color[i] = fwd.weights[i] * d_rgb;
        behind += fwd.weights[i] * ci;
    }
    return g;
}

Vec3 render_ray(const SceneModel& model, const TimeContext& ctx, const Ray& ray, const SamplingSpec& spec,
                std::span<const double> jitter, RayCache* cache)
{
    if (!jitter.empty() && static_cast<int>(jitter.size()) != spec.n_samples) {
        throw ContractError("jitter must hold one offset per sample");
    }
    RayCache local;
    RayCache& c = cache ? *cache : local;
    sample_into(ray, spec, model.scene_bound(), jitter, c.samples);
    const int n = spec.n_samples;
    c.stencils.resize(n);
    c.raw_sigma.assign(n, 0.0);
    c.raw_rgb.assign(n, Vec3{});
    c.sigmas.assign(n, 0.0);
    c.colors.assign(n, Vec3{});
    const int d_res = model.density.config().grid_res;
    const int c_res = model.color.config().grid_res;
    const double shift = model.density.config().density_shift;
    const double bound = model.scene_bound();
    Vec3 unit;
    for (int i = 0; i < n; ++i) {
        if (c.samples.culled[i]) continue;
        world_to_unit(c.samples.points[i], bound, unit);
        const Stencil sd = make_stencil(d_res, unit);
        c.stencils[i] = sd;
        query_raw(model.density, ctx.density_coeffs, sd, std::span<double>(&c.raw_sigma[i], 1));
        c.sigmas[i] = activate_density(c.raw_sigma[i], shift);
        const Stencil sc = c_res == d_res ? sd : make_stencil(c_res, unit);
        query_raw(model.color, ctx.color_coeffs, sc, c.raw_rgb[i]);
        c.colors[i] = activate_color(c.raw_rgb[i]);
    }
    // Inline compositing; same arithmetic as composite().
    Vec3 rgb{};
    double trans = 1.0;
    for (int i = 0; i < n; ++i) {
        const double delta = (i + 1 < n ? c.samples.depths[i + 1] : spec.far) - c.samples.depths[i];
        const double e = std::exp(-c.sigmas[i] * delta);
        const double w = trans * (1.0 - e);
        for (int k = 0; k < 3; ++k) rgb[k] += w * c.colors[i][k];
        trans *= e;
    }
    for (int k = 0; k < 3; ++k) rgb[k] += trans * spec.background[k];
    return rgb;
}

void backward_ray(const SceneModel& model, const TimeContext& ctx, const RayCache& cache, const SamplingSpec& spec,
                  const Vec3& d_rgb, ModelGradients& grads, TimeGradients& tg)
{
    const CompositeGrad cg =
        composite_backward(cache.sigmas, cache.colors, cache.samples.depths, spec.far, spec.background, d_rgb);
    const double shift = model.density.config().density_shift;
    const int d_res = model.density.config().grid_res;
    const int c_res = model.color.config().grid_res;
    const double bound = model.scene_bound();
    const int n = static_cast<int>(cache.sigmas.size());
    for (int i = 0; i < n; ++i) {
        if (cache.samples.culled[i]) continue;
        const double d_raw_sigma = cg.d_sigma[i] * activate_density_grad(cache.raw_sigma[i], shift);
        if (d_raw_sigma != 0.0) {
            backward_raw(model.density, ctx.density_coeffs, cache.stencils[i], std::span<const double>(&d_raw_sigma, 1),
                         grads.density, tg.density);
        }
        Vec3 d_raw_rgb;
        for (int k = 0; k < 3; ++k) {
            const double c = cache.colors[i][k];
            d_raw_rgb[k] = cg.d_color[i][k] * c * (1.0 - c);
        }
        Stencil sc = cache.stencils[i];
        if (c_res != d_res) {
            Vec3 unit;
            world_to_unit(cache.samples.points[i], bound, unit);
            sc = make_stencil(c_res, unit);
        }
        backward_raw(model.color, ctx.color_coeffs, sc, d_raw_rgb, grads.color, tg.color);
    }
}

ModelGradients backward_render(const SceneModel& model, double t, std::span<const Ray> rays,
                               std::span<const Vec3> d_rgb, const SamplingSpec& spec)
{
    if (rays.size() != d_rgb.size()) throw ContractError("one upstream gradient per ray required");
    spec.validate();
    ModelGradients grads(model);
    const TimeContext ctx = prepare_time(model, t);
    TimeGradients tg(model);
    RayCache cache;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        render_ray(model, ctx, rays[r], spec, {}, &cache);
        backward_ray(model, ctx, cache, spec, d_rgb[r], grads, tg);
    }
    finish_time_backward(model, ctx, tg, grads);
    return grads;
}

void parallel_chunks(int n, int threads, const std::function<void(int, int, int)>& body)
{
    const int workers = std::max(1, std::min(threads, n));
    if (workers == 1) {
        body(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
        const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
        const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        pool.emplace_back([&, w, begin, end] {
            try {
                body(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

Image render_image(const SceneModel& model, const Camera& camera, double t, const SamplingSpec& spec, int threads)
{
    camera.validate();
    spec.validate();
    const TimeContext ctx = prepare_time(model, t);
    Image img(camera.width, camera.height);
    parallel_chunks(camera.height, threads, [&](int, int begin, int end) {
        RayCache cache;
        for (int r = begin; r < end; ++r) {
            for (int c = 0; c < camera.width; ++c) {
                img.set_pixel(r, c, render_ray(model, ctx, ray_for_pixel(camera, r, c), spec, {}, &cache));
            }
        }
    });
    return img;
}

Vec3 render_ray_fn(const RadianceFn& fn, double t, const Ray& ray, const SamplingSpec& spec, double scene_bound,
                   std::span<const double> jitter, double* opacity)
{
    RaySamples s;
    sample_into(ray, spec, scene_bound, jitter, s);
    const int n = spec.n_samples;
    std::vector<double> sigmas(n, 0.0);
    std::vector<Vec3> colors(n, Vec3{});
    for (int i = 0; i < n; ++i) {
        if (s.culled[i]) continue;
        const PointSample p = fn(s.points[i], t);
        sigmas[i] = p.sigma;
        colors[i] = p.rgb;
    }
    const CompositeResult r = composite(sigmas, colors, s.depths, spec.far, spec.background);
    if (opacity) *opacity = r.opacity;
    return r.rgb;
}

Image render_image_fn(const RadianceFn& fn, const Camera& camera, double t, const SamplingSpec& spec,
                      double scene_bound, std::vector<double>* opacity, int threads)
{
    camera.validate();
    spec.validate();
    Image img(camera.width, camera.height);
    if (opacity) opacity->assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0);
    parallel_chunks(camera.height, threads, [&](int, int begin, int end) {
        for (int r = begin; r < end; ++r) {
            for (int c = 0; c < camera.width; ++c) {
                double a = 0.0;
                img.set_pixel(r, c, render_ray_fn(fn, t, ray_for_pixel(camera, r, c), spec, scene_bound, {}, &a));
                if (opacity) (*opacity)[static_cast<std::size_t>(r) * camera.width + c] = a;
            }
        }
    });
    return img;
}

} // namespace blrf
