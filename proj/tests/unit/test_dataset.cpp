// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <blrf/dataset.hpp>
#include <blrf/image.hpp>
#include <blrf/synthetic.hpp>

#include <gtest/gtest.h>
#include <json.hpp>
#include <png.h>

#include <cstdio>

using namespace blrf;
using namespace blrf::test;
using nlohmann::json;

namespace {

json one_frame_manifest()
{
    return json{{"camera_angle_x", 0.8},
                {"w", 2},
                {"h", 2},
                {"near", 1.0},
                {"far", 4.0},
                {"frames", json::array({json{{"file_path", "a.png"},
                                             {"time", 0.0},
                                             {"transform_matrix",
                                              json::array({json::array({1, 0, 0, 0}), json::array({0, 1, 0, 0}),
                                                           json::array({0, 0, 1, 3}), json::array({0, 0, 0, 1})})}}})}};
}

void write_rgba(const std::filesystem::path& path, int w, int h, const std::vector<std::uint8_t>& rgba)
{
    FILE* f = std::fopen(path.c_str(), "wb");
    ASSERT_NE(f, nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, f);
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < h; ++r) png_write_row(png, rgba.data() + static_cast<std::size_t>(r) * w * 4);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

} // namespace

// ---------------------------------------------------------------- manifest

TEST(Manifest, SingleFrameDefaultsToTrain)
{
    const DatasetManifest m = parse_manifest(one_frame_manifest().dump());
    ASSERT_EQ(m.frames.size(), 1u);
    EXPECT_EQ(m.split("train"), std::vector<int>{0});
    EXPECT_TRUE(m.split("test").empty());
    EXPECT_EQ(m.split("all"), std::vector<int>{0});
    EXPECT_EQ(m.frames[0].transform_matrix[11], 3.0);
    EXPECT_EQ(m.background, (Vec3{1.0, 1.0, 1.0}));
}

TEST(Manifest, IndexTimesAreNormalized)
{
    json j = one_frame_manifest();
    json f = j["frames"][0];
    j["frames"] = json::array();
    for (int t : {0, 5, 10}) {
        f["time"] = t;
        j["frames"].push_back(f);
    }
    const DatasetManifest m = parse_manifest(j.dump());
    EXPECT_EQ(m.frames[0].time, 0.0);
    EXPECT_EQ(m.frames[1].time, 0.5);
    EXPECT_EQ(m.frames[2].time, 1.0);
}

TEST(Manifest, NormalizationIsIdempotent)
{
    std::vector<FrameRecord> frames(4);
    const double raw[] = {3.0, -1.0, 7.0, 2.5};
    for (int i = 0; i < 4; ++i) frames[i].time = raw[i];
    normalize_times(frames);
    std::vector<double> once;
    for (const auto& f : frames) once.push_back(f.time);
    normalize_times(frames);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(frames[i].time, once[i]);
    EXPECT_EQ(once[1], 0.0);
    EXPECT_EQ(once[2], 1.0);
}

TEST(Manifest, MissingFieldIsNamed)
{
    json j = one_frame_manifest();
    j.erase("camera_angle_x");
    try {
        parse_manifest(j.dump());
        FAIL() << "expected an error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("camera_angle_x"), std::string::npos) << e.what();
    }
}

TEST(Manifest, RejectsInvalidContent)
{
    json j = one_frame_manifest();
    j["near"] = 5.0;
    EXPECT_THROW(parse_manifest(j.dump()), ConfigError);

    j = one_frame_manifest();
    j["frames"][0]["transform_matrix"][0][0] = 2;
    EXPECT_THROW(parse_manifest(j.dump()), ConfigError);

    j = one_frame_manifest();
    j["frames"] = json::array();
    EXPECT_THROW(parse_manifest(j.dump()), ConfigError);

    j = one_frame_manifest();
    j["test_idx"] = json::array({3});
    EXPECT_THROW(parse_manifest(j.dump()), ConfigError);

    EXPECT_THROW(parse_manifest("{not json"), ConfigError);
    EXPECT_THROW(parse_manifest(one_frame_manifest().dump()).split("val"), ConfigError);
}

TEST(Manifest, FlatMatrixAccepted)
{
    json j = one_frame_manifest();
    j["frames"][0]["transform_matrix"] = json::array({1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 3, 0, 0, 0, 1});
    EXPECT_EQ(parse_manifest(j.dump()).frames[0].transform_matrix[11], 3.0);
}

TEST(Manifest, SaveLoadRoundTrip)
{
    TempDir dir("manifest");
    DatasetManifest m = parse_manifest(one_frame_manifest().dump());
    m.frames.push_back(m.frames[0]);
    m.frames[1].time = 1.0;
    m.frames[1].file_path = "b.png";
    m.train_idx = {0};
    m.test_idx = {1};
    m.background = {0.25, 0.5, 0.75};
    save_manifest(dir / "transforms.json", m);
    const DatasetManifest back = load_manifest(dir / "transforms.json");
    EXPECT_EQ(back.frames.size(), 2u);
    EXPECT_EQ(back.test_idx, std::vector<int>{1});
    EXPECT_EQ(back.background, m.background);
    EXPECT_EQ(back.frames[1].file_path, "b.png");
    EXPECT_THROW(load_manifest(dir / "missing.json"), IoError);
}

TEST(Manifest, ResolvesFramePaths)
{
    EXPECT_EQ(resolve_frame_path("/data", "./frames/f_000"), std::filesystem::path("/data/frames/f_000.png"));
    EXPECT_EQ(resolve_frame_path("/data", "x.png"), std::filesystem::path("/data/x.png"));
}

// ---------------------------------------------------------------- images

TEST(Images, BlackAndWhitePixels)
{
    TempDir dir("png");
    Image img(3, 2);
    img.set_pixel(1, 2, {1.0, 1.0, 1.0});
    write_png(dir / "a.png", img);
    const Image back = read_png(dir / "a.png", {1.0, 1.0, 1.0});
    EXPECT_EQ(back.pixel(0, 0), (Vec3{0.0, 0.0, 0.0}));
    EXPECT_EQ(back.pixel(1, 2), (Vec3{1.0, 1.0, 1.0}));
}

TEST(Images, TransparentPixelsShowBackground)
{
    TempDir dir("rgba");
    // Left pixel fully transparent red, right pixel half-transparent black.
    write_rgba(dir / "a.png", 2, 1, {255, 0, 0, 0, 0, 0, 0, 128});
    const Image img = read_png(dir / "a.png", {1.0, 1.0, 1.0});
    EXPECT_EQ(img.pixel(0, 0), (Vec3{1.0, 1.0, 1.0}));
    for (double v : img.pixel(0, 1)) EXPECT_NEAR(v, 1.0 - 128.0 / 255.0, 1e-6);
}

TEST(Images, QuantizationRoundsHalfUp)
{
    EXPECT_EQ(quantize_unit(0.0f), 0);
    EXPECT_EQ(quantize_unit(1.0f), 255);
    EXPECT_EQ(quantize_unit(2.0f), 255);
    EXPECT_EQ(quantize_unit(-0.5f), 0);
    EXPECT_EQ(quantize_unit(0.5f), 128); // 127.5 rounds up
    EXPECT_EQ(quantize_unit(100.49f / 255.0f), 100);
}

TEST(Images, SizeMismatchIsAnError)
{
    TempDir dir("size");
    write_png(dir / "a.png", Image(4, 4));
    EXPECT_THROW(load_image(dir / "a.png", 4, 5, {1.0, 1.0, 1.0}), IoError);
    EXPECT_THROW(read_png(dir / "none.png", {1.0, 1.0, 1.0}), IoError);
}

TEST(Images, RawDumpIsPreferred)
{
    TempDir dir("raw");
    Image img(2, 2);
    img.set_pixel(0, 0, {0.123456, 0.5, 0.9});
    write_png(dir / "a.png", img);
    EXPECT_NEAR(load_image(dir / "a.png", 2, 2, {}).pixel(0, 0)[0], 31.0 / 255.0, 1e-7);
    write_raw(dir / "a.f32", img);
    EXPECT_EQ(load_image(dir / "a.png", 2, 2, {}), img);
    EXPECT_EQ(read_bytes(dir / "a.f32").size(), 2u * 2 * 3 * 4);
    EXPECT_THROW(read_raw(dir / "a.f32", 3, 2), IoError);
    EXPECT_THROW(read_raw(dir / "a.f32", 1, 2), IoError);
}

// ---------------------------------------------------------------- synthetic scenes

TEST(SyntheticScenes, AnalyticExamples)
{
    const SyntheticSceneSpec moving = SyntheticSceneSpec::preset(SceneKind::MovingBlob);
    for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(analytic_field_eval(moving, moving.center(t), t).sigma, 10.0);
    EXPECT_LT(analytic_field_eval(moving, {50.0, 0.0, 0.0}, 0.5).sigma, 1e-300);
    const SyntheticSceneSpec cc = SyntheticSceneSpec::preset(SceneKind::ColorChangeBlob);
    EXPECT_EQ(cc.color(0.5), (Vec3{0.5, 0.0, 0.5}));
    EXPECT_EQ(SyntheticSceneSpec::preset(SceneKind::ScaleBlob).radius(1.0), 0.4);
    for (SceneKind k : {SceneKind::StaticBlob, SceneKind::MovingBlob, SceneKind::ColorChangeBlob,
                        SceneKind::ScaleBlob}) {
        EXPECT_EQ(scene_kind_from_string(to_string(k)), k);
    }
    EXPECT_THROW(scene_kind_from_string("teapot"), ConfigError);
}

TEST(SyntheticScenes, SplitAndTimes)
{
    GenerationOptions opt;
    opt.n_frames = 16;
    opt.image_size = 4;
    opt.n_quad_samples = 16;
    const GeneratedDataset g = generate_frames(SyntheticSceneSpec::preset(SceneKind::StaticBlob), {}, opt);
    EXPECT_EQ(g.manifest.test_idx, (std::vector<int>{2, 6, 10, 14}));
    EXPECT_EQ(g.manifest.train_idx.size(), 12u);
    EXPECT_EQ(g.manifest.train_idx.front(), 0);
    EXPECT_EQ(g.manifest.train_idx.back(), 15);
    for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(g.manifest.frames[i].time, i / 15.0);
    // Distinct poses on the orbit.
    EXPECT_NE(g.manifest.frames[0].transform_matrix, g.manifest.frames[1].transform_matrix);
}

TEST(SyntheticScenes, OpacityMatchesIndependentQuadrature)
{
    const SyntheticSceneSpec scene = SyntheticSceneSpec::preset(SceneKind::ScaleBlob);
    OrbitSpec orbit;
    GenerationOptions opt;
    opt.n_frames = 3;
    opt.image_size = 8;
    const GeneratedDataset g = generate_frames(scene, orbit, opt);
    const auto [near, far] = near_far_for(orbit);
    double worst = 0.0;
    for (int f = 0; f < 3; ++f) {
        const Camera cam = g.manifest.camera(f);
        const double t = g.manifest.frames[f].time;
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                // Composite Simpson of sigma along the ray, restricted to the scene cube.
                const Ray ray = ray_for_pixel(cam, r, c);
                const int n = 20000;
                const double h = (far - near) / n;
                double integral = 0.0;
                for (int i = 0; i <= n; ++i) {
                    const Vec3 p = ray.origin + (near + i * h) * ray.direction;
                    const bool inside = std::abs(p[0]) <= 1 && std::abs(p[1]) <= 1 && std::abs(p[2]) <= 1;
                    const double s = inside ? analytic_field_eval(scene, p, t).sigma : 0.0;
                    integral += s * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
                }
                integral *= h / 3.0;
                worst = std::max(worst, std::abs(g.opacity[f][r * 8 + c] - (1.0 - std::exp(-integral))));
            }
        }
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(SyntheticScenes, MovingBlobCentroidIsMonotone)
{
    OrbitSpec orbit;
    orbit.angular_span = 0.0; // one fixed camera on the +z side
    GenerationOptions opt;
    opt.n_frames = 6;
    opt.image_size = 32;
    opt.n_quad_samples = 256;
    const GeneratedDataset g = generate_frames(SyntheticSceneSpec::preset(SceneKind::MovingBlob), orbit, opt);
    double last = -1.0;
    for (int f = 0; f < 6; ++f) {
        double mass = 0.0, col = 0.0;
        for (int r = 0; r < 32; ++r) {
            for (int c = 0; c < 32; ++c) {
                mass += g.opacity[f][r * 32 + c];
                col += c * g.opacity[f][r * 32 + c];
            }
        }
        const double centroid = col / mass;
        EXPECT_GT(centroid, last) << "frame " << f;
        last = centroid;
    }
}

TEST(SyntheticScenes, DiskRoundTripWithinQuantization)
{
    TempDir dir("gen");
    GenerationOptions opt;
    opt.n_frames = 4;
    opt.image_size = 12;
    opt.n_quad_samples = 64;
    const GeneratedDataset g =
        generate_dataset(SyntheticSceneSpec::preset(SceneKind::ColorChangeBlob), {}, opt, dir.path());
    const Dataset ds = load_dataset(dir.path());
    ASSERT_EQ(ds.images.size(), 4u);
    for (std::size_t f = 0; f < 4; ++f) {
        for (std::size_t i = 0; i < ds.images[f].rgb.size(); ++i) {
            EXPECT_LE(std::abs(ds.images[f].rgb[i] - g.images[f].rgb[i]), 0.5f / 255.0f + 1e-6f);
        }
        EXPECT_EQ(ds.manifest.frames[f].time, g.manifest.frames[f].time);
    }
    EXPECT_EQ(ds.manifest.test_idx, g.manifest.test_idx);
    // A direct manifest path works too.
    EXPECT_EQ(load_dataset(dir / "transforms.json").images, ds.images);
}

TEST(SyntheticScenes, GenerationIsDeterministic)
{
    TempDir a("det_a"), b("det_b");
    GenerationOptions opt;
    opt.n_frames = 3;
    opt.image_size = 8;
    opt.n_quad_samples = 32;
    const auto spec = SyntheticSceneSpec::preset(SceneKind::MovingBlob);
    generate_dataset(spec, {}, opt, a.path());
    opt.threads = 3;
    generate_dataset(spec, {}, opt, b.path());
    EXPECT_EQ(read_bytes(a / "transforms.json"), read_bytes(b / "transforms.json"));
    for (int i = 0; i < 3; ++i) {
        const std::string name = "frames/f_00" + std::to_string(i) + ".png";
        EXPECT_EQ(read_bytes(a / name), read_bytes(b / name));
    }
}

TEST(SyntheticScenes, RejectsBadOptions)
{
    GenerationOptions opt;
    opt.n_frames = 0;
    EXPECT_THROW(generate_frames(SyntheticSceneSpec{}, {}, opt), ConfigError);
    opt = GenerationOptions{};
    opt.split_train = 5;
    EXPECT_THROW(generate_frames(SyntheticSceneSpec{}, {}, opt), ConfigError);
}
