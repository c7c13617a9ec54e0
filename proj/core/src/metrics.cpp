// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/metrics.hpp>

#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace blrf {

namespace {

void check_same_shape(const Image& a, const Image& b)
{
    if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size()) {
        throw ContractError("metric inputs differ in shape");
    }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps()
{
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - kWindow / 2;
        g[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Valid-mode separable filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::array<double, kWindow>& g)
{
    const int ow = w - kWindow + 1;
    const int oh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * plane[static_cast<std::size_t>(r) * w + c + k];
            tmp[static_cast<std::size_t>(r) * ow + c] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[k] * tmp[static_cast<std::size_t>(r + k) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = s;
        }
    }
    return out;
}

} // namespace

double mse(const Image& a, const Image& b)
{
    check_same_shape(a, b);
    if (a.rgb.empty()) throw ContractError("metric inputs are empty");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.rgb.size());
}

double psnr(const Image& a, const Image& b)
{
    const double e = mse(a, b);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(e);
}

double ssim(const Image& a, const Image& b)
{
    check_same_shape(a, b);
    if (a.width < kWindow || a.height < kWindow) throw ContractError("SSIM needs images of at least 11x11 pixels");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const auto g = gaussian_taps();
    const int w = a.width;
    const int h = a.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a.rgb[i * 3 + ch];
            pb[i] = b.rgb[i * 3 + ch];
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = filter_valid(pa, w, h, g);
        const auto mu_b = filter_valid(pb, w, h, g);
        const auto e_aa = filter_valid(paa, w, h, g);
        const auto e_bb = filter_valid(pbb, w, h, g);
        const auto e_ab = filter_valid(pab, w, h, g);
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = e_aa[i] - mu_a[i] * mu_a[i];
            const double vb = e_bb[i] - mu_b[i] * mu_b[i];
            const double cov = e_ab[i] - mu_a[i] * mu_b[i];
            const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
            const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double MetricReport::mean_psnr() const
{
    if (frames.empty()) return 0.0;
    double s = 0.0;
    for (const auto& f : frames) s += f.psnr_db;
    return s / static_cast<double>(frames.size());
}

double MetricReport::mean_ssim() const
{
    if (frames.empty()) return 0.0;
    double s = 0.0;
    for (const auto& f : frames) s += f.ssim;
    return s / static_cast<double>(frames.size());
}

namespace {

std::string fmt_double(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void MetricReport::write_csv(std::ostream& out) const
{
    out << "frame,psnr_db,ssim\n";
    for (const auto& f : frames) out << f.frame << "," << fmt_double(f.psnr_db) << "," << fmt_double(f.ssim) << "\n";
    out << "mean," << fmt_double(mean_psnr()) << "," << fmt_double(mean_ssim()) << "\n";
}

void MetricReport::write_csv(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_csv(out);
}

void MetricReport::print_table(std::ostream& out) const
{
    char line[128];
    std::snprintf(line, sizeof(line), "%8s %12s %10s\n", "frame", "PSNR [dB]", "SSIM");
    out << line;
    for (const auto& f : frames) {
        std::snprintf(line, sizeof(line), "%8d %12.4f %10.6f\n", f.frame, f.psnr_db, f.ssim);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%8s %12.4f %10.6f\n", "mean", mean_psnr(), mean_ssim());
    out << line;
}

} // namespace blrf
