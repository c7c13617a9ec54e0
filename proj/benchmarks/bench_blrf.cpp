// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/config.hpp>
#include <blrf/field.hpp>
#include <blrf/renderer.hpp>
#include <blrf/synthetic.hpp>
#include <blrf/training.hpp>

#include <benchmark/benchmark.h>

using namespace blrf;

namespace {

RunConfig bench_config(int components)
{
    RunConfig c = desk_profile();
    for (FieldConfig* f : {&c.density, &c.color}) f->num_components = components;
    return c;
}

void BM_FieldQuery(benchmark::State& state)
{
    const RunConfig c = bench_config(static_cast<int>(state.range(0)));
    const SceneModel model = init_model(c);
    const std::vector<double> beta(c.density.submanifold_dim, 0.5);
    Rng rng(1);
    for (auto _ : state) {
        const Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
        benchmark::DoNotOptimize(query_field_raw(model.color, beta, rng.uniform(), x));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FieldQuery)->Arg(4)->Arg(12)->Arg(48);

void BM_RenderRay(benchmark::State& state)
{
    RunConfig c = bench_config(12);
    c.sampling.n_samples = static_cast<int>(state.range(0));
    const SceneModel model = init_model(c);
    const Camera cam = Camera::from_fov(64, 64, 0.9, orbit_pose(OrbitSpec{}, 0.0));
    const TimeContext ctx = prepare_time(model, 0.5);
    int pixel = 0;
    for (auto _ : state) {
        const Ray ray = ray_for_pixel(cam, (pixel / 64) % 64, pixel % 64);
        ++pixel;
        benchmark::DoNotOptimize(render_ray(model, ctx, ray, c.sampling));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RenderRay)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state)
{
    static const GeneratedDataset gen = [] {
        GenerationOptions opt;
        opt.n_frames = 8;
        opt.image_size = 32;
        opt.n_quad_samples = 128;
        return generate_frames(SyntheticSceneSpec::preset(SceneKind::MovingBlob), OrbitSpec{}, opt);
    }();
    const Dataset data = make_dataset(gen.manifest, gen.images);
    RunConfig c = bench_config(static_cast<int>(state.range(0)));
    c.sampling.near = data.manifest.near;
    c.sampling.far = data.manifest.far;
    c.train.iters = 1 << 30;
    Trainer trainer(data, init_model(c), c.train, c.sampling, std::nullopt, 1);
    for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
    state.SetItemsProcessed(state.iterations() * c.train.batch_rays);
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(12)->Arg(48)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
