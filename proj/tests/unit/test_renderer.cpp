// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <blrf/renderer.hpp>
#include <blrf/synthetic.hpp>

#include <gtest/gtest.h>

using namespace blrf;
using namespace blrf::test;

namespace {

void expect_vec_near(const Vec3& a, const Vec3& b, double tol)
{
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], tol) << "component " << k;
}

struct RandomRay {
    std::vector<double> sigmas, depths;
    std::vector<Vec3> colors;
    double far = 0.0;
    Vec3 background{};
};

RandomRay random_ray(Rng& rng, int n)
{
    RandomRay r;
    double h = rng.uniform(0.5, 2.0);
    for (int i = 0; i < n; ++i) {
        r.depths.push_back(h);
        h += rng.uniform(0.0, 0.2);
        // Mix empty space, moderate and very dense samples.
        const double kind = rng.uniform();
        r.sigmas.push_back(kind < 0.2 ? 0.0 : kind < 0.9 ? rng.uniform(0.0, 5.0) : rng.uniform(0.0, 500.0));
        r.colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    }
    r.far = h;
    r.background = {rng.uniform(), rng.uniform(), rng.uniform()};
    return r;
}

} // namespace

// ---------------------------------------------------------------- cameras

TEST(Camera, CenterPixelLooksDownMinusZ)
{
    const Camera cam = Camera::from_fov(3, 3, 0.9, identity4());
    const Ray r = ray_for_pixel(cam, 1, 1);
    expect_vec_near(r.direction, {0.0, 0.0, -1.0}, 1e-15);
    expect_vec_near(r.origin, {0.0, 0.0, 0.0}, 0.0);
}

TEST(Camera, RowsGoDownColumnsGoRight)
{
    const Camera cam = Camera::from_fov(4, 4, 0.9, identity4());
    EXPECT_GT(ray_for_pixel(cam, 0, 2).direction[1], 0.0);
    EXPECT_LT(ray_for_pixel(cam, 3, 2).direction[1], 0.0);
    EXPECT_LT(ray_for_pixel(cam, 2, 0).direction[0], 0.0);
    EXPECT_GT(ray_for_pixel(cam, 2, 3).direction[0], 0.0);
}

TEST(Camera, HorizontalFieldOfView)
{
    const double fov = 0.9;
    const Camera cam = Camera::from_fov(64, 48, fov, identity4());
    EXPECT_NEAR(cam.fx, 32.0 / std::tan(0.45), 1e-12);
    // The left edge of the image plane sits at half the field of view.
    const Vec3 edge{-32.0 / cam.fx, 0.0, -1.0};
    EXPECT_NEAR(std::atan2(-edge[0], 1.0), fov / 2, 1e-12);
    EXPECT_THROW(Camera::from_fov(4, 4, 0.0, identity4()), ConfigError);
    EXPECT_THROW(ray_for_pixel(cam, 48, 0), ContractError);
}

TEST(Camera, LookAtPointsAtTarget)
{
    const Vec3 eye{3.0, 1.0, 2.0};
    const Camera cam = Camera::from_fov(5, 5, 0.7, look_at(eye, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    EXPECT_NO_THROW(cam.validate());
    const Ray r = ray_for_pixel(cam, 2, 2);
    expect_vec_near(r.origin, eye, 0.0);
    expect_vec_near(r.direction, normalized(Vec3{-3.0, -1.0, -2.0}), 1e-14);
}

TEST(Camera, RejectsNonOrthonormalPose)
{
    Mat4 m = identity4();
    m[0] = 2.0;
    Camera cam;
    cam.c2w = m;
    EXPECT_THROW(cam.validate(), ConfigError);
}

// ---------------------------------------------------------------- sampling

TEST(Sampling, MidpointsAndCulling)
{
    SamplingSpec spec;
    spec.near = 1.0;
    spec.far = 5.0;
    spec.n_samples = 4;
    const Ray ray{{0.0, 0.0, 3.0}, {0.0, 0.0, -1.0}, 0, 0};
    const RaySamples s = sample_along_ray(ray, spec, 1.0, nullptr);
    EXPECT_EQ(s.depths, (std::vector<double>{1.5, 2.5, 3.5, 4.5}));
    // z = 1.5, 0.5, -0.5, -1.5 against the cube [-1, 1].
    EXPECT_EQ(s.culled, (std::vector<std::uint8_t>{1, 0, 0, 1}));
}

TEST(Sampling, JitterStaysInsideBins)
{
    SamplingSpec spec;
    spec.n_samples = 16;
    spec.perturb = true;
    Rng rng(1);
    const Ray ray{{0.0, 0.0, 3.0}, {0.0, 0.0, -1.0}, 0, 0};
    const double bin = (spec.far - spec.near) / spec.n_samples;
    for (int trial = 0; trial < 100; ++trial) {
        const RaySamples s = sample_along_ray(ray, spec, 1.0, &rng);
        for (int i = 0; i < spec.n_samples; ++i) {
            EXPECT_GE(s.depths[i], spec.near + i * bin);
            EXPECT_LT(s.depths[i], spec.near + (i + 1) * bin);
        }
    }
}

TEST(Sampling, JitterIsUniform)
{
    // Chi-square over 10 equal bins; 27.88 is the 0.999 quantile at 9 degrees of freedom.
    SamplingSpec spec;
    spec.n_samples = 100;
    Rng rng(2024);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 200; ++i) {
        for (double j : draw_jitter(spec, rng)) ++counts[static_cast<int>(j * 10)];
    }
    const double expected = 2000.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 27.88);
}

// ---------------------------------------------------------------- compositing

TEST(Composite, HomogeneousSlabOpacity)
{
    SamplingSpec spec;
    spec.near = 1.0;
    spec.far = 5.0;
    spec.n_samples = 256;
    const double length = spec.far - spec.near;
    const Ray ray{{0.0, 0.0, 0.0}, {0.0, 0.0, -1.0}, 0, 0};
    const RaySamples s = sample_along_ray(ray, spec, 100.0, nullptr);
    for (double sigma : {0.01, 0.1, 0.25, 0.5, 1.0, 3.0, 10.0}) {
        const std::vector<double> sig(256, sigma);
        const std::vector<Vec3> col(256, Vec3{0.5, 0.5, 0.5});
        const CompositeResult r = composite(sig, col, s.depths, spec.far, {1.0, 1.0, 1.0});
        EXPECT_NEAR(r.opacity, 1.0 - std::exp(-sigma * length), 1e-3) << "sigma " << sigma;
    }
}

TEST(Composite, WeightIdentityOnRandomInputs)
{
    Rng rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const RandomRay r = random_ray(rng, 1 + static_cast<int>(rng.below(64)));
        const CompositeResult c = composite(r.sigmas, r.colors, r.depths, r.far, r.background);
        double sum = c.transmittance.back();
        for (double w : c.weights) {
            ASSERT_GE(w, 0.0);
            sum += w;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
        for (std::size_t i = 1; i < c.transmittance.size(); ++i) {
            ASSERT_LE(c.transmittance[i], c.transmittance[i - 1]);
        }
        for (double v : c.rgb) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Composite, EmptyRayShowsBackground)
{
    const std::vector<double> sig(8, 0.0), depths{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<Vec3> col(8, Vec3{0.1, 0.2, 0.3});
    const CompositeResult r = composite(sig, col, depths, 9.0, {0.4, 0.5, 0.6});
    expect_vec_near(r.rgb, {0.4, 0.5, 0.6}, 0.0);
    EXPECT_EQ(r.opacity, 0.0);
}

TEST(Composite, RejectsBadInputs)
{
    const std::vector<Vec3> col(2, Vec3{});
    EXPECT_THROW(composite(std::vector<double>{1.0, -1.0}, col, std::vector<double>{1, 2}, 3, {}), ContractError);
    EXPECT_THROW(composite(std::vector<double>{1.0, 1.0}, col, std::vector<double>{2, 1}, 3, {}), ContractError);
    EXPECT_THROW(composite(std::vector<double>{1.0}, col, std::vector<double>{1}, 3, {}), ContractError);
}

TEST(Composite, BackwardMatchesFiniteDifferences)
{
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        RandomRay r = random_ray(rng, 6);
        for (double& s : r.sigmas) s = rng.uniform(0.1, 4.0);
        const Vec3 up{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const CompositeGrad g = composite_backward(r.sigmas, r.colors, r.depths, r.far, r.background, up);
        auto f = [&]() { return dot(composite(r.sigmas, r.colors, r.depths, r.far, r.background).rgb, up); };
        const double h = 1e-6;
        for (std::size_t i = 0; i < r.sigmas.size(); ++i) {
            const double s0 = r.sigmas[i];
            r.sigmas[i] = s0 + h;
            const double fp = f();
            r.sigmas[i] = s0 - h;
            const double fm = f();
            r.sigmas[i] = s0;
            EXPECT_NEAR(g.d_sigma[i], (fp - fm) / (2 * h), 1e-8);
            for (int k = 0; k < 3; ++k) {
                const double c0 = r.colors[i][k];
                r.colors[i][k] = c0 + h;
                const double cp = f();
                r.colors[i][k] = c0 - h;
                const double cm = f();
                r.colors[i][k] = c0;
                EXPECT_NEAR(g.d_color[i][k], (cp - cm) / (2 * h), 1e-8);
            }
        }
    }
}

// ---------------------------------------------------------------- analytic scenes

TEST(AnalyticRender, RefinementConverges)
{
    // A Gaussian blob vanishes at both ends of the ray, where midpoint sums converge faster than any power;
    // a medium filling the whole segment with varying color shows the algebraic rate instead.
    const RadianceFn fn = [](const Vec3& x, double) {
        return PointSample{0.6 + 0.3 * std::sin(2.0 * x[0] + x[1]) + 0.2 * std::cos(3.0 * x[2]),
                           {0.5 + 0.4 * std::sin(x[2]), 0.5 + 0.3 * std::cos(2.0 * x[0]), 0.5}};
    };
    const Camera cam = Camera::from_fov(6, 6, 0.9, look_at({0.5, 1.0, 4.0}, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    auto render = [&](int n) {
        SamplingSpec spec;
        spec.near = 1.0;
        spec.far = 6.0;
        spec.n_samples = n;
        spec.background = {0.2, 0.3, 0.4};
        std::vector<double> out;
        for (int r = 0; r < 6; ++r) {
            for (int c = 0; c < 6; ++c) {
                // The bound is wide enough that nothing is culled.
                const Vec3 v = render_ray_fn(fn, 0.0, ray_for_pixel(cam, r, c), spec, 20.0);
                out.insert(out.end(), v.begin(), v.end());
            }
        }
        return out;
    };
    const auto ref = render(4096);
    auto linf = [&](const std::vector<double>& img) {
        double e = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i) e = std::max(e, std::abs(img[i] - ref[i]));
        return e;
    };
    for (int n : {16, 32, 64, 128}) {
        const double coarse = linf(render(n));
        const double fine = linf(render(2 * n));
        EXPECT_GE(coarse / fine, 1.5) << "n " << n << ": " << coarse << " -> " << fine;
    }
}

TEST(AnalyticRender, ReportsOpacity)
{
    const SyntheticSceneSpec scene = SyntheticSceneSpec::preset(SceneKind::StaticBlob);
    const RadianceFn fn = [&](const Vec3& x, double t) { return analytic_field_eval(scene, x, t); };
    SamplingSpec spec;
    spec.near = 2.0;
    spec.far = 6.0;
    spec.n_samples = 512;
    double through = -1.0, miss = -1.0;
    render_ray_fn(fn, 0.0, {{0.0, 0.0, 4.0}, {0.0, 0.0, -1.0}, 0, 0}, spec, 1.0, {}, &through);
    render_ray_fn(fn, 0.0, {{0.0, 3.0, 4.0}, {0.0, 0.0, -1.0}, 0, 0}, spec, 1.0, {}, &miss);
    EXPECT_GT(through, 0.99);
    EXPECT_EQ(miss, 0.0);
}

// ---------------------------------------------------------------- model rendering

TEST(ModelRender, ThreadCountDoesNotChangeImages)
{
    const SceneModel model = init_model(tiny_run_config());
    SamplingSpec spec;
    spec.near = 2.0;
    spec.far = 6.0;
    spec.n_samples = 24;
    const Camera cam = Camera::from_fov(9, 7, 0.9, look_at({0.0, 1.0, 4.0}, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    const Image one = render_image(model, cam, 0.4, spec, 1);
    EXPECT_EQ(one, render_image(model, cam, 0.4, spec, 3));
    EXPECT_EQ(one, render_image(model, cam, 0.4, spec, 16));
}

TEST(ModelRender, RenderRayMatchesImagePixel)
{
    const SceneModel model = init_model(tiny_run_config());
    SamplingSpec spec;
    spec.near = 2.0;
    spec.far = 6.0;
    spec.n_samples = 24;
    const Camera cam = Camera::from_fov(5, 5, 0.9, look_at({0.0, 0.0, 4.0}, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    const Image img = render_image(model, cam, 0.7, spec);
    const TimeContext ctx = prepare_time(model, 0.7);
    const Vec3 v = render_ray(model, ctx, ray_for_pixel(cam, 3, 1), spec);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(img.pixel(3, 1)[k], static_cast<float>(v[k]));
}

TEST(ModelRender, BackwardRenderMatchesFiniteDifferences)
{
    RunConfig cfg = tiny_run_config(3, 4, 2);
    cfg.basis_shape = {1, 6, 2};
    SceneModel model = init_model(cfg);
    fill_random(model.density.parameters(), 1, 0.8);
    fill_random(model.color.parameters(), 2, 0.8);
    fill_random(model.density_basis.parameters(), 3, 0.6);
    fill_random(model.color_basis.parameters(), 4, 0.6);
    SamplingSpec spec;
    spec.near = 2.5;
    spec.far = 5.5;
    spec.n_samples = 6;
    const Camera cam = Camera::from_fov(2, 2, 0.6, look_at({0.0, 0.5, 4.0}, {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}));
    std::vector<Ray> rays;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) rays.push_back(ray_for_pixel(cam, r, c));
    }
    const std::vector<Vec3> up{{0.3, -0.2, 0.5}, {-0.4, 0.1, 0.2}, {0.6, 0.6, -0.1}, {0.2, -0.7, 0.3}};
    const double t = 0.37;
    const ModelGradients g = backward_render(model, t, rays, up, spec);
    auto objective = [&]() {
        const TimeContext ctx = prepare_time(model, t);
        double s = 0.0;
        for (std::size_t i = 0; i < rays.size(); ++i) s += dot(render_ray(model, ctx, rays[i], spec), up[i]);
        return s;
    };
    auto check = [&](std::span<double> params, const std::vector<double>& grad, const char* name) {
        ASSERT_EQ(params.size(), grad.size());
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double p0 = params[i];
            params[i] = p0 + h;
            const double fp = objective();
            params[i] = p0 - h;
            const double fm = objective();
            params[i] = p0;
            const double num = (fp - fm) / (2 * h);
            worst = std::max(worst, std::abs(grad[i] - num) / std::max({std::abs(grad[i]), std::abs(num), 1e-6}));
        }
        EXPECT_LT(worst, 1e-5) << name;
    };
    check(model.density.parameters(), g.density, "density");
    check(model.color.parameters(), g.color, "color");
    check(model.density_basis.parameters(), g.density_basis, "density basis");
    check(model.color_basis.parameters(), g.color_basis, "color basis");
}
