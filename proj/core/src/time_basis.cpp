// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/time_basis.hpp>

#include <numbers>

namespace blrf {

std::string to_string(BasisFamily family)
{
    switch (family) {
    case BasisFamily::Neural: return "neural";
    case BasisFamily::DCT: return "dct";
    case BasisFamily::Fourier: return "fourier";
    case BasisFamily::Bernstein: return "bernstein";
    }
    return "unknown";
}

BasisFamily basis_family_from_string(const std::string& name)
{
    if (name == "neural") return BasisFamily::Neural;
    if (name == "dct") return BasisFamily::DCT;
    if (name == "fourier") return BasisFamily::Fourier;
    if (name == "bernstein") return BasisFamily::Bernstein;
    throw ConfigError("unknown basis '" + name + "' (expected neural, dct, fourier or bernstein)");
}

std::vector<double> positional_embed(double t, int octaves)
{
    std::vector<double> e;
    e.reserve(2 * octaves + 1);
    e.push_back(t);
    double freq = std::numbers::pi;
    for (int k = 0; k < octaves; ++k) {
        e.push_back(std::sin(freq * t));
        e.push_back(std::cos(freq * t));
        freq *= 2.0;
    }
    return e;
}

TimeBasis TimeBasis::fixed(BasisFamily family, int dim)
{
    if (dim < 1) throw ConfigError("basis dimension must be positive");
    if (family == BasisFamily::Neural) throw ConfigError("neural basis needs a shape and seed");
    return TimeBasis(family, dim);
}

TimeBasis TimeBasis::neural(int dim, const NeuralBasisShape& shape, std::uint64_t seed)
{
    if (dim < 1) throw ConfigError("basis dimension must be positive");
    if (shape.embed_freqs < 0 || shape.hidden_width < 1 || shape.hidden_layers < 1) {
        throw ConfigError("invalid neural basis shape");
    }
    TimeBasis basis(BasisFamily::Neural, dim);
    basis.shape_ = shape;
    std::size_t count = 0;
    for (auto [in, out] : basis.layer_dims()) count += static_cast<std::size_t>(in) * out + out;
    basis.params_.assign(count, 0.0);

    Rng rng(seed);
    std::size_t off = 0;
    const auto dims = basis.layer_dims();
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [in, out] = dims[l];
        const bool last = l + 1 == dims.size();
        const double bound = std::sqrt((last ? 3.0 : 6.0) / in);
        for (int i = 0; i < in * out; ++i) basis.params_[off + i] = rng.uniform(-bound, bound);
        off += static_cast<std::size_t>(in) * out + out;
    }
    return basis;
}

std::vector<std::pair<int, int>> TimeBasis::layer_dims() const
{
    std::vector<std::pair<int, int>> dims;
    if (family_ != BasisFamily::Neural) return dims;
    int in = 2 * shape_.embed_freqs + 1;
    for (int l = 0; l < shape_.hidden_layers; ++l) {
        dims.emplace_back(in, shape_.hidden_width);
        in = shape_.hidden_width;
    }
    dims.emplace_back(in, dim_);
    return dims;
}

namespace {

double binomial(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Forward pass keeping every layer's post-activation output (index 0 is the embedding).
std::vector<std::vector<double>> mlp_forward(std::span<const double> params,
                                             const std::vector<std::pair<int, int>>& dims, double t, int octaves)
{
    std::vector<std::vector<double>> acts;
    acts.reserve(dims.size() + 1);
    acts.push_back(positional_embed(t, octaves));
    std::size_t off = 0;
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [in, out] = dims[l];
        const double* w = params.data() + off;
        const double* b = w + static_cast<std::size_t>(in) * out;
        const auto& x = acts.back();
        std::vector<double> y(out);
        const bool relu = l + 1 < dims.size();
        for (int o = 0; o < out; ++o) {
            double s = b[o];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) s += row[i] * x[i];
            y[o] = relu && s <= 0.0 ? 0.0 : s;
        }
        acts.push_back(std::move(y));
        off += static_cast<std::size_t>(in) * out + out;
    }
    return acts;
}

} // namespace

std::vector<double> TimeBasis::eval(double t) const
{
    std::vector<double> beta(dim_);
    switch (family_) {
    case BasisFamily::Neural: return mlp_forward(params_, layer_dims(), t, shape_.embed_freqs).back();
    case BasisFamily::DCT:
        for (int u = 0; u < dim_; ++u) beta[u] = std::cos(std::numbers::pi * u * t);
        break;
    case BasisFamily::Fourier:
        beta[0] = 1.0;
        for (int u = 1; u < dim_; ++u) {
            const int harmonic = (u + 1) / 2;
            const double arg = 2.0 * std::numbers::pi * harmonic * t;
            beta[u] = (u % 2 == 1) ? std::cos(arg) : std::sin(arg);
        }
        break;
    case BasisFamily::Bernstein: {
        const int n = dim_ - 1;
        for (int u = 0; u <= n; ++u) beta[u] = binomial(n, u) * std::pow(t, u) * std::pow(1.0 - t, n - u);
        break;
    }
    }
    return beta;
}

void TimeBasis::backward(double t, std::span<const double> upstream, std::span<double> param_grad) const
{
    if (static_cast<int>(upstream.size()) != dim_) throw ContractError("basis upstream gradient size mismatch");
    if (family_ != BasisFamily::Neural) return;
    if (param_grad.size() != params_.size()) throw ContractError("basis gradient buffer not congruent");

    const auto dims = layer_dims();
    const auto acts = mlp_forward(params_, dims, t, shape_.embed_freqs);

    std::vector<std::size_t> offsets(dims.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < dims.size(); ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(dims[l].first) * dims[l].second + dims[l].second;
    }

    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t li = dims.size(); li-- > 0;) {
        const auto [in, out] = dims[li];
        const double* w = params_.data() + offsets[li];
        double* gw = param_grad.data() + offsets[li];
        double* gb = gw + static_cast<std::size_t>(in) * out;
        const auto& x = acts[li];
        if (li + 1 < dims.size()) {
            // ReLU gate; an output of exactly 0 takes the 0 subgradient.
            const auto& y = acts[li + 1];
            for (int o = 0; o < out; ++o) {
                if (y[o] <= 0.0) delta[o] = 0.0;
            }
        }
        std::vector<double> prev(in, 0.0);
        for (int o = 0; o < out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            gb[o] += d;
            double* grow = gw + static_cast<std::size_t>(o) * in;
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                grow[i] += d * x[i];
                prev[i] += d * row[i];
            }
        }
        delta = std::move(prev);
    }
}

BasisSamples sample_basis(const TimeBasis& basis, int count)
{
    if (count < 2) throw ContractError("need at least two basis samples");
    BasisSamples s{count, basis.dim(), {}};
    s.values.reserve(static_cast<std::size_t>(count) * basis.dim());
    for (int i = 0; i < count; ++i) {
        const auto b = basis.eval(static_cast<double>(i) / (count - 1));
        s.values.insert(s.values.end(), b.begin(), b.end());
    }
    return s;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_samples(const BasisSamples& s)
{
    if (s.rows < 3) throw ContractError("high-pass penalty needs at least 3 time samples");
    if (s.values.size() != static_cast<std::size_t>(s.rows) * s.cols) throw ContractError("sample matrix size mismatch");
}

} // namespace

double highpass_penalty(const BasisSamples& s)
{
    check_samples(s);
    double first = 0.0;
    double second = 0.0;
    for (int c = 0; c < s.cols; ++c) {
        for (int r = 0; r + 1 < s.rows; ++r) first += std::abs(s.at(r + 1, c) - s.at(r, c));
        for (int r = 0; r + 2 < s.rows; ++r) second += std::abs(-s.at(r, c) + 2.0 * s.at(r + 1, c) - s.at(r + 2, c));
    }
    return first / (static_cast<double>(s.rows - 1) * s.cols) + second / (static_cast<double>(s.rows - 2) * s.cols);
}

std::vector<double> highpass_grad(const BasisSamples& s)
{
    check_samples(s);
    std::vector<double> g(s.values.size(), 0.0);
    const double k1 = 1.0 / (static_cast<double>(s.rows - 1) * s.cols);
    const double k2 = 1.0 / (static_cast<double>(s.rows - 2) * s.cols);
    auto at = [&](int r, int c) -> double& { return g[static_cast<std::size_t>(r) * s.cols + c]; };
    for (int c = 0; c < s.cols; ++c) {
        for (int r = 0; r + 1 < s.rows; ++r) {
            const double d = k1 * sign(s.at(r + 1, c) - s.at(r, c));
            at(r + 1, c) += d;
            at(r, c) -= d;
        }
        for (int r = 0; r + 2 < s.rows; ++r) {
            const double d = k2 * sign(-s.at(r, c) + 2.0 * s.at(r + 1, c) - s.at(r + 2, c));
            at(r, c) -= d;
            at(r + 1, c) += 2.0 * d;
            at(r + 2, c) -= d;
        }
    }
    return g;
}

} // namespace blrf
