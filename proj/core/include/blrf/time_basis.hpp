// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/common.hpp>

#include <span>
#include <string>
#include <vector>

namespace blrf {

enum class BasisFamily { Neural, DCT, Fourier, Bernstein };

std::string to_string(BasisFamily family);
BasisFamily basis_family_from_string(const std::string& name);

/// Architecture of the neural trajectory basis: positional embedding with
/// `embed_freqs` octaves, `hidden_layers` ReLU layers of `hidden_width`, linear output.
struct NeuralBasisShape {
    int embed_freqs = 6;
    int hidden_width = 64;
    int hidden_layers = 3;

    bool operator==(const NeuralBasisShape&) const = default;
};

/// [t, sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^{L-1} pi t), cos(2^{L-1} pi t)].
std::vector<double> positional_embed(double t, int octaves);

/// The W scalar functions beta_u(t) shared by all spatial components of a field.
class TimeBasis {
  public:
    /// Parameter-free family (DCT, Fourier or Bernstein).
    static TimeBasis fixed(BasisFamily family, int dim);
    /// Neural basis with He-uniform weights and zero biases.
    static TimeBasis neural(int dim, const NeuralBasisShape& shape, std::uint64_t seed);

    BasisFamily family() const { return family_; }
    int dim() const { return dim_; }
    const NeuralBasisShape& shape() const { return shape_; }

    /// Flat parameters: per layer, row-major (out x in) weights then bias. Empty for fixed families.
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    std::vector<double> eval(double t) const;

    /// Adds d(beta(t) . upstream)/d(params) into `param_grad`. No-op for fixed families.
    void backward(double t, std::span<const double> upstream, std::span<double> param_grad) const;

    /// (in, out) of every dense layer, input first.
    std::vector<std::pair<int, int>> layer_dims() const;

  private:
    TimeBasis(BasisFamily family, int dim) : family_(family), dim_(dim) {}

    BasisFamily family_;
    int dim_;
    NeuralBasisShape shape_;
    std::vector<double> params_;
};

/// Row-major N_t x W samples of a basis on a uniform time grid.
struct BasisSamples {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

BasisSamples sample_basis(const TimeBasis& basis, int count);

/// Mean |[-1,1] * column| plus mean |[-1,2,-1] * column| (valid-mode convolutions).
double highpass_penalty(const BasisSamples& samples);
/// d highpass_penalty / d samples (sign subgradient, 0 at 0).
std::vector<double> highpass_grad(const BasisSamples& samples);

} // namespace blrf
