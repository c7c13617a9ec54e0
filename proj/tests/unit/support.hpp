// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/config.hpp>
#include <blrf/dataset.hpp>
#include <blrf/field.hpp>
#include <blrf/model.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <unistd.h>

namespace blrf::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("blrf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void fill_random(std::span<double> v, std::uint64_t seed, double scale)
{
    Rng rng(seed);
    for (double& x : v) x = rng.uniform(-scale, scale);
}

inline FieldConfig small_config(int res, int components, int subdim, int channels)
{
    FieldConfig c;
    c.grid_res = res;
    c.num_components = components;
    c.submanifold_dim = subdim;
    c.num_channels = channels;
    return c;
}

inline FactorizedField random_field(const FieldConfig& c, FieldKind kind, std::uint64_t seed, double scale = 1.0)
{
    FactorizedField f(c, kind);
    fill_random(f.parameters(), seed, scale);
    return f;
}

/// Independent trilinear interpolation of a res^3 grid stored as g[(i * res + j) * res + k].
inline double trilinear(const std::vector<double>& g, int res, const Vec3& x)
{
    int idx[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double p = x[a] * (res - 1);
        int i = static_cast<int>(std::floor(p));
        i = std::clamp(i, 0, res - 2);
        idx[a] = i;
        frac[a] = p - i;
    }
    double v = 0.0;
    for (int di = 0; di < 2; ++di) {
        for (int dj = 0; dj < 2; ++dj) {
            for (int dk = 0; dk < 2; ++dk) {
                const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) *
                                 (dk ? frac[2] : 1 - frac[2]);
                v += w * g[(static_cast<std::size_t>(idx[0] + di) * res + idx[1] + dj) * res + idx[2] + dk];
            }
        }
    }
    return v;
}

/// Dense grid of one component: v_z (x) M_xy + v_x (x) M_yz + v_y (x) M_xz.
inline std::vector<double> dense_component(const TripleRef& t)
{
    const int r = t.res;
    std::vector<double> g(static_cast<std::size_t>(r) * r * r);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            for (int k = 0; k < r; ++k) {
                g[(static_cast<std::size_t>(i) * r + j) * r + k] =
                    t.v_z[k] * t.m_xy[i * r + j] + t.v_x[i] * t.m_yz[j * r + k] + t.v_y[j] * t.m_xz[i * r + k];
            }
        }
    }
    return g;
}

inline double normalized_sinc(double r)
{
    if (r == 0.0) return 1.0;
    const double a = 3.14159265358979323846 * r;
    return std::sin(a) / a;
}

/// Small model for renderer/training tests.
inline RunConfig tiny_run_config(int res = 6, int components = 4, int subdim = 2)
{
    RunConfig c = desk_profile();
    for (FieldConfig* f : {&c.density, &c.color}) {
        f->grid_res = res;
        f->num_components = components;
        f->submanifold_dim = subdim;
    }
    c.basis_shape = {2, 8, 3};
    c.train.batch_rays = 32;
    c.train.iters = 10;
    c.sampling.n_samples = 16;
    return c;
}

} // namespace blrf::test
