// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <blrf/time_basis.hpp>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <numbers>

using namespace blrf;
using namespace blrf::test;

namespace {

// Least-squares residual (max abs) of fitting samples y at times ts with the basis.
double fit_residual(const TimeBasis& basis, const std::vector<double>& ts, const Eigen::VectorXd& y)
{
    Eigen::MatrixXd a(static_cast<Eigen::Index>(ts.size()), basis.dim());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto b = basis.eval(ts[i]);
        for (int u = 0; u < basis.dim(); ++u) a(static_cast<Eigen::Index>(i), u) = b[u];
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
    return (a * coef - y).cwiseAbs().maxCoeff();
}

double naive_highpass(const BasisSamples& s)
{
    double first = 0.0, second = 0.0;
    int n1 = 0, n2 = 0;
    for (int c = 0; c < s.cols; ++c) {
        std::vector<double> col(s.rows);
        for (int r = 0; r < s.rows; ++r) col[r] = s.at(r, c);
        for (int r = 0; r + 1 < s.rows; ++r, ++n1) first += std::abs(col[r] * -1.0 + col[r + 1] * 1.0);
        for (int r = 0; r + 2 < s.rows; ++r, ++n2) second += std::abs(col[r] * -1.0 + col[r + 1] * 2.0 - col[r + 2]);
    }
    return first / n1 + second / n2;
}

} // namespace

TEST(FixedBases, DctValues)
{
    const TimeBasis b = TimeBasis::fixed(BasisFamily::DCT, 4);
    const auto v0 = b.eval(0.0);
    for (double v : v0) EXPECT_EQ(v, 1.0);
    const auto vh = b.eval(0.5);
    EXPECT_NEAR(vh[0], 1.0, 1e-15);
    EXPECT_NEAR(vh[1], 0.0, 1e-15);
    EXPECT_NEAR(vh[2], -1.0, 1e-15);
    EXPECT_NEAR(vh[3], 0.0, 1e-15);
    EXPECT_TRUE(b.parameters().empty());
}

TEST(FixedBases, SingleDctIsConstant)
{
    const TimeBasis b = TimeBasis::fixed(BasisFamily::DCT, 1);
    for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(b.eval(t), std::vector<double>{1.0});
}

TEST(FixedBases, FourierValues)
{
    const TimeBasis b = TimeBasis::fixed(BasisFamily::Fourier, 5);
    const double t = 0.1;
    const auto v = b.eval(t);
    const double pi = std::numbers::pi;
    EXPECT_EQ(v[0], 1.0);
    EXPECT_NEAR(v[1], std::cos(2 * pi * t), 1e-15);
    EXPECT_NEAR(v[2], std::sin(2 * pi * t), 1e-15);
    EXPECT_NEAR(v[3], std::cos(4 * pi * t), 1e-15);
    EXPECT_NEAR(v[4], std::sin(4 * pi * t), 1e-15);
}

TEST(FixedBases, BernsteinPartitionOfUnity)
{
    for (int w : {1, 2, 4, 8, 16}) {
        const TimeBasis b = TimeBasis::fixed(BasisFamily::Bernstein, w);
        for (int i = 0; i <= 1000; ++i) {
            const auto v = b.eval(i / 1000.0);
            double s = 0.0;
            for (double x : v) {
                EXPECT_GE(x, 0.0);
                s += x;
            }
            EXPECT_NEAR(s, 1.0, 1e-12) << "W " << w << " t " << i / 1000.0;
        }
    }
    const auto end = TimeBasis::fixed(BasisFamily::Bernstein, 3).eval(1.0);
    EXPECT_EQ(end, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(FixedBases, DctReconstructsAnySamplesAtFullRank)
{
    Rng rng(3);
    for (int n : {2, 5, 8, 16, 24}) {
        const TimeBasis b = TimeBasis::fixed(BasisFamily::DCT, n);
        std::vector<double> ts(n);
        for (int i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / (n - 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = rng.uniform(-1.0, 1.0);
        EXPECT_LT(fit_residual(b, ts, y), 1e-8) << "N " << n;
    }
}

TEST(FixedBases, FourierReconstructsAnyPeriodicSamplesAtFullRank)
{
    Rng rng(4);
    for (int n : {3, 5, 9, 17, 25}) {
        const TimeBasis b = TimeBasis::fixed(BasisFamily::Fourier, n);
        // One period sampled without repeating the endpoint.
        std::vector<double> ts(n);
        for (int i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / n;
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y(i) = rng.uniform(-1.0, 1.0);
        EXPECT_LT(fit_residual(b, ts, y), 1e-8) << "N " << n;
    }
}

TEST(FixedBases, BasisNamesRoundTrip)
{
    for (BasisFamily f : {BasisFamily::Neural, BasisFamily::DCT, BasisFamily::Fourier, BasisFamily::Bernstein}) {
        EXPECT_EQ(basis_family_from_string(to_string(f)), f);
    }
    EXPECT_THROW(basis_family_from_string("wavelet"), ConfigError);
}

TEST(PositionalEmbedding, Layout)
{
    const auto e = positional_embed(0.25, 2);
    const double pi = std::numbers::pi;
    ASSERT_EQ(e.size(), 5u);
    EXPECT_EQ(e[0], 0.25);
    EXPECT_NEAR(e[1], std::sin(pi * 0.25), 1e-15);
    EXPECT_NEAR(e[2], std::cos(pi * 0.25), 1e-15);
    EXPECT_NEAR(e[3], std::sin(2 * pi * 0.25), 1e-15);
    EXPECT_NEAR(e[4], std::cos(2 * pi * 0.25), 1e-15);
}

TEST(NeuralBasis, ShapeAndDeterminism)
{
    const NeuralBasisShape shape{3, 16, 2};
    const TimeBasis a = TimeBasis::neural(4, shape, 9);
    const TimeBasis b = TimeBasis::neural(4, shape, 9);
    const TimeBasis c = TimeBasis::neural(4, shape, 10);
    const auto dims = a.layer_dims();
    ASSERT_EQ(dims.size(), 3u);
    EXPECT_EQ(dims.front(), (std::pair{7, 16}));
    EXPECT_EQ(dims.back(), (std::pair{16, 4}));
    EXPECT_EQ(a.parameters().size(), 7u * 16 + 16 + 16u * 16 + 16 + 16u * 4 + 4);
    EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
    for (double t : {0.0, 0.31, 1.0}) EXPECT_EQ(a.eval(t), b.eval(t));
}

TEST(NeuralBasis, BackwardMatchesFiniteDifferences)
{
    TimeBasis b = TimeBasis::neural(3, NeuralBasisShape{2, 8, 3}, 5);
    // Biases start at zero; randomize everything so no ReLU sits exactly at a kink.
    fill_random(b.parameters(), 6, 0.6);
    const std::vector<double> up{0.7, -1.1, 0.4};
    for (double t : {0.05, 0.42, 0.93}) {
        std::vector<double> g(b.parameters().size(), 0.0);
        b.backward(t, up, g);
        auto p = b.parameters();
        const double h = 1e-6;
        auto f = [&]() {
            const auto v = b.eval(t);
            return v[0] * up[0] + v[1] * up[1] + v[2] * up[2];
        };
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double p0 = p[i];
            p[i] = p0 + h;
            const double fp = f();
            p[i] = p0 - h;
            const double fm = f();
            p[i] = p0;
            const double num = (fp - fm) / (2 * h);
            EXPECT_LE(std::abs(g[i] - num) / std::max({std::abs(g[i]), std::abs(num), 1e-6}), 1e-6) << i;
        }
    }
}

TEST(NeuralBasis, LipschitzBound)
{
    const double pi = std::numbers::pi;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const NeuralBasisShape shape{4, 16, 3};
        TimeBasis b = TimeBasis::neural(4, shape, seed);
        fill_random(b.parameters(), seed + 100, 0.8);
        // Frobenius norms bound the spectral norms; ReLU is 1-Lipschitz.
        double bound = 1.0;
        std::size_t offset = 0;
        for (auto [in, out] : b.layer_dims()) {
            double fro = 0.0;
            for (int i = 0; i < in * out; ++i) fro += std::pow(b.parameters()[offset + i], 2);
            bound *= std::sqrt(fro);
            offset += static_cast<std::size_t>(in) * out + out;
        }
        double embed = 1.0;
        for (int k = 0; k < shape.embed_freqs; ++k) embed += std::pow(std::ldexp(pi, k), 2);
        bound *= std::sqrt(embed);
        Rng rng(seed);
        for (int i = 0; i < 200; ++i) {
            const double t = rng.uniform(0.0, 1.0 - 1e-6);
            const auto a = b.eval(t);
            const auto c = b.eval(t + 1e-6);
            double d = 0.0;
            for (int u = 0; u < 4; ++u) d += std::pow(a[u] - c[u], 2);
            EXPECT_LE(std::sqrt(d), bound * 1e-6);
        }
    }
}

TEST(HighPass, MatchesNaiveConvolution)
{
    TimeBasis b = TimeBasis::neural(4, NeuralBasisShape{3, 8, 2}, 2);
    fill_random(b.parameters(), 8, 0.5);
    const BasisSamples s = sample_basis(b, 64);
    EXPECT_EQ(s.rows, 64);
    EXPECT_EQ(s.cols, 4);
    EXPECT_NEAR(highpass_penalty(s), naive_highpass(s), 1e-14);
    EXPECT_TRUE(std::isfinite(highpass_penalty(s)));
}

TEST(HighPass, HandExamples)
{
    // Constant column: both filters vanish.
    BasisSamples flat{4, 1, {2.0, 2.0, 2.0, 2.0}};
    EXPECT_EQ(highpass_penalty(flat), 0.0);
    // Linear ramp: first differences 1, second differences 0.
    BasisSamples ramp{4, 1, {0.0, 1.0, 2.0, 3.0}};
    EXPECT_DOUBLE_EQ(highpass_penalty(ramp), 1.0);
    // Alternating: first |2|, second |4|.
    BasisSamples alt{4, 1, {1.0, -1.0, 1.0, -1.0}};
    EXPECT_DOUBLE_EQ(highpass_penalty(alt), 6.0);
}

TEST(HighPass, GradientMatchesFiniteDifferencesAwayFromKinks)
{
    BasisSamples s{7, 2, {}};
    Rng rng(12);
    for (int i = 0; i < 14; ++i) s.values.push_back(rng.uniform(-1, 1));
    const auto g = highpass_grad(s);
    const double h = 1e-7;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double v0 = s.values[i];
        s.values[i] = v0 + h;
        const double fp = highpass_penalty(s);
        s.values[i] = v0 - h;
        const double fm = highpass_penalty(s);
        s.values[i] = v0;
        EXPECT_NEAR(g[i], (fp - fm) / (2 * h), 1e-6);
    }
}

TEST(HighPass, SampleGridIncludesEndpoints)
{
    const BasisSamples s = sample_basis(TimeBasis::fixed(BasisFamily::DCT, 2), 5);
    EXPECT_EQ(s.at(0, 1), 1.0);
    EXPECT_NEAR(s.at(4, 1), -1.0, 1e-15);
    EXPECT_THROW(sample_basis(TimeBasis::fixed(BasisFamily::DCT, 2), 1), ContractError);
}
