// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/common.hpp>

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace blrf {

enum class SincKind { Normalized, Literal };
enum class FieldKind { Density, Color };

std::string to_string(SincKind kind);
std::string to_string(FieldKind kind);
SincKind sinc_kind_from_string(const std::string& name);
FieldKind field_kind_from_string(const std::string& name);

/// Shape and placement of one factorized space-time field.
///
/// The field lives in the world cube [-scene_bound, scene_bound]^3, sampled by
/// `grid_res` nodes per axis. Its `num_components` spatial components are split
/// into `num_components / submanifold_dim` sinc windows of `submanifold_dim`
/// components each.
struct FieldConfig {
    int grid_res = 32;
    int num_components = 12;
    int submanifold_dim = 4;
    int num_channels = 1;
    double scene_bound = 1.0;
    SincKind sinc = SincKind::Normalized;
    double density_shift = -1.0;

    /// Throws ConfigError when the invariants do not hold.
    void validate() const;

    int window_count() const { return num_components / submanifold_dim; }
    std::size_t triple_size() const
    {
        const auto d = static_cast<std::size_t>(grid_res);
        return 3 * d + 3 * d * d;
    }
    std::size_t parameter_count() const
    {
        return static_cast<std::size_t>(num_channels) * static_cast<std::size_t>(num_components) * triple_size();
    }

    bool operator==(const FieldConfig&) const = default;
};

/// Read-only view of the six factors of one vector-matrix component.
/// Matrices are row-major: m_yz[y * res + z], m_xz[x * res + z], m_xy[x * res + y].
struct TripleRef {
    int res = 0;
    std::span<const double> v_x, v_y, v_z, m_yz, m_xz, m_xy;
};

struct MutableTripleRef {
    int res = 0;
    std::span<double> v_x, v_y, v_z, m_yz, m_xz, m_xy;
};

/// Owning component triple, mainly for standalone evaluation and tests.
struct ComponentTriple {
    explicit ComponentTriple(int res);

    int res;
    std::vector<double> v_x, v_y, v_z, m_yz, m_xz, m_xy;

    TripleRef ref() const { return {res, v_x, v_y, v_z, m_yz, m_xz, m_xy}; }
};

/// Linear interpolation stencil of a normalized point on a `res`-node grid.
struct Stencil {
    int ix = 0, iy = 0, iz = 0;
    double fx = 0, fy = 0, fz = 0;
};

/// Throws ContractError when a coordinate lies outside [0, 1].
Stencil make_stencil(int res, const Vec3& x);

double eval_component(const TripleRef& triple, const Stencil& s);
double eval_component(const TripleRef& triple, const Vec3& x);

/// Adds `upstream * d(component)/d(param)` into `grad`, which has the triple layout.
void backward_component(const TripleRef& triple, const Stencil& s, double upstream, const MutableTripleRef& grad);

/// Sinc window weights omega_n(t) = sinc((d - 1) t - n), n = 0..d-1.
std::vector<double> window_weights(double t, int d, SincKind kind);
double sinc(double r, SincKind kind);

class FactorizedField {
  public:
    /// All parameters zero.
    FactorizedField(const FieldConfig& config, FieldKind kind);

    const FieldConfig& config() const { return config_; }
    FieldKind kind() const { return kind_; }
    int channels() const { return config_.num_channels; }

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    std::size_t component_offset(int channel, int component) const;
    TripleRef component(int channel, int component) const;
    MutableTripleRef component(int channel, int component);

    /// Same triple slicing applied to an external buffer with this field's layout.
    MutableTripleRef component_in(std::span<double> buffer, int channel, int component) const;

  private:
    FieldConfig config_;
    FieldKind kind_;
    std::vector<double> params_;
};

/// Gradient accumulation buffer with the same layout as a FactorizedField.
struct FieldGradients {
    explicit FieldGradients(const FactorizedField& field) : values(field.parameters().size(), 0.0) {}
    void zero() { std::fill(values.begin(), values.end(), 0.0); }
    std::vector<double> values;
};

/// Entries i.i.d. uniform in [-s, s], s = 0.1 / sqrt(grid_res).
FactorizedField init_field(const FieldConfig& config, FieldKind kind, std::uint64_t seed);

/// Per-component mixing coefficients a_{nW+u} = beta_u * omega_n for one instant.
std::vector<double> mixing_coefficients(const FieldConfig& config, std::span<const double> beta,
                                        std::span<const double> windows);

/// Raw (pre-activation) channel values for precomputed mixing coefficients.
void query_raw(const FactorizedField& field, std::span<const double> coefficients, const Stencil& s,
               std::span<double> out);

/// Reverse of query_raw. Adds parameter gradients into `grad` and
/// sum_c upstream_c * P_{c,k}(x) into `coefficient_grad[k]`.
void backward_raw(const FactorizedField& field, std::span<const double> coefficients, const Stencil& s,
                  std::span<const double> upstream, std::span<double> grad, std::span<double> coefficient_grad);

/// Maps coefficient gradients back onto the W basis values.
std::vector<double> coefficient_grad_to_beta(const FieldConfig& config, std::span<const double> coefficient_grad,
                                             std::span<const double> windows);

/// Field value at normalized position x and time t for basis values beta.
std::vector<double> query_field_raw(const FactorizedField& field, std::span<const double> beta, double t,
                                    const Vec3& x);

/// Accumulates d(query)/d(params) * upstream into `grads`; returns d(query . upstream)/d(beta).
std::vector<double> backward_field(const FactorizedField& field, const Vec3& x, std::span<const double> beta,
                                   std::span<const double> windows, std::span<const double> upstream,
                                   FieldGradients& grads);

double activate_density(double raw, double shift);
/// d activate_density / d raw.
double activate_density_grad(double raw, double shift);
double sigmoid(double r);
Vec3 activate_color(const Vec3& raw);

/// Mean squared adjacent difference per factor, averaged over all factors.
double tv_penalty(const FactorizedField& field);
/// Adds scale * d tv_penalty / d params into grad.
void tv_backward(const FactorizedField& field, double scale, std::span<double> grad);

/// Dense grid of raw values, index ((i * res + j) * res + k) * C + c at x = (i, j, k) / (res - 1).
std::vector<double> materialize_dense(const FactorizedField& field, std::span<const double> beta, double t,
                                      int resolution);

} // namespace blrf
