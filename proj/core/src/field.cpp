// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/field.hpp>

#include <algorithm>
#include <limits>
#include <numbers>

namespace blrf {

std::string to_string(SincKind kind)
{
    return kind == SincKind::Normalized ? "normalized" : "literal";
}

std::string to_string(FieldKind kind)
{
    return kind == FieldKind::Density ? "density" : "color";
}

SincKind sinc_kind_from_string(const std::string& name)
{
    if (name == "normalized") return SincKind::Normalized;
    if (name == "literal") return SincKind::Literal;
    throw ConfigError("unknown sinc kind '" + name + "' (expected normalized or literal)");
}

FieldKind field_kind_from_string(const std::string& name)
{
    if (name == "density") return FieldKind::Density;
    if (name == "color") return FieldKind::Color;
    throw ConfigError("unknown field kind '" + name + "'");
}

void FieldConfig::validate() const
{
    if (grid_res < 2) throw ConfigError("grid_res must be >= 2, got " + std::to_string(grid_res));
    if (num_components < 1) throw ConfigError("num_components must be positive");
    if (submanifold_dim < 1) throw ConfigError("submanifold_dim must be positive");
    if (num_components % submanifold_dim != 0) {
        throw ConfigError("num_components (" + std::to_string(num_components) +
                          ") must be a multiple of submanifold_dim (" + std::to_string(submanifold_dim) + ")");
    }
    if (num_channels != 1 && num_channels != 3) throw ConfigError("num_channels must be 1 or 3");
    if (!(scene_bound > 0.0) || !std::isfinite(scene_bound)) throw ConfigError("scene_bound must be positive");
    if (!std::isfinite(density_shift)) throw ConfigError("density_shift must be finite");
}

ComponentTriple::ComponentTriple(int res_)
    : res(res_),
      v_x(res_, 0.0),
      v_y(res_, 0.0),
      v_z(res_, 0.0),
      m_yz(static_cast<std::size_t>(res_) * res_, 0.0),
      m_xz(static_cast<std::size_t>(res_) * res_, 0.0),
      m_xy(static_cast<std::size_t>(res_) * res_, 0.0)
{
}

namespace {

inline void axis_stencil(int res, double u, int& i, double& f)
{
    const double s = u * (res - 1);
    int i0 = static_cast<int>(std::floor(s));
    if (i0 > res - 2) i0 = res - 2;
    if (i0 < 0) i0 = 0;
    i = i0;
    f = s - i0;
}

inline double lin(const double* v, int i, double f) { return v[i] * (1.0 - f) + v[i + 1] * f; }

inline double bilin(const double* m, int res, int i, double fi, int j, double fj)
{
    const double* r0 = m + static_cast<std::ptrdiff_t>(i) * res + j;
    const double* r1 = r0 + res;
    return (1.0 - fi) * ((1.0 - fj) * r0[0] + fj * r0[1]) + fi * ((1.0 - fj) * r1[0] + fj * r1[1]);
}

inline void lin_grad(double* g, int i, double f, double up)
{
    g[i] += up * (1.0 - f);
    g[i + 1] += up * f;
}

inline void bilin_grad(double* g, int res, int i, double fi, int j, double fj, double up)
{
    double* r0 = g + static_cast<std::ptrdiff_t>(i) * res + j;
    double* r1 = r0 + res;
    r0[0] += up * (1.0 - fi) * (1.0 - fj);
    r0[1] += up * (1.0 - fi) * fj;
    r1[0] += up * fi * (1.0 - fj);
    r1[1] += up * fi * fj;
}

// Pointers to the six factors of the triple starting at `base`.
struct Factors {
    const double *vx, *vy, *vz, *myz, *mxz, *mxy;
};

inline Factors factors_at(const double* base, int res)
{
    const std::size_t d = res;
    const std::size_t dd = d * d;
    return {base, base + d, base + 2 * d, base + 3 * d, base + 3 * d + dd, base + 3 * d + 2 * dd};
}

struct MutFactors {
    double *vx, *vy, *vz, *myz, *mxz, *mxy;
};

inline MutFactors factors_at(double* base, int res)
{
    const std::size_t d = res;
    const std::size_t dd = d * d;
    return {base, base + d, base + 2 * d, base + 3 * d, base + 3 * d + dd, base + 3 * d + 2 * dd};
}

inline double eval_factors(const Factors& t, int res, const Stencil& s)
{
    return lin(t.vz, s.iz, s.fz) * bilin(t.mxy, res, s.ix, s.fx, s.iy, s.fy) +
           lin(t.vx, s.ix, s.fx) * bilin(t.myz, res, s.iy, s.fy, s.iz, s.fz) +
           lin(t.vy, s.iy, s.fy) * bilin(t.mxz, res, s.ix, s.fx, s.iz, s.fz);
}

// Scatters the gradient of one component and returns its value.
inline double backward_factors(const Factors& t, int res, const Stencil& s, double up, const MutFactors& g)
{
    const double lz = lin(t.vz, s.iz, s.fz);
    const double lx = lin(t.vx, s.ix, s.fx);
    const double ly = lin(t.vy, s.iy, s.fy);
    const double bxy = bilin(t.mxy, res, s.ix, s.fx, s.iy, s.fy);
    const double byz = bilin(t.myz, res, s.iy, s.fy, s.iz, s.fz);
    const double bxz = bilin(t.mxz, res, s.ix, s.fx, s.iz, s.fz);
    lin_grad(g.vz, s.iz, s.fz, up * bxy);
    lin_grad(g.vx, s.ix, s.fx, up * byz);
    lin_grad(g.vy, s.iy, s.fy, up * bxz);
    bilin_grad(g.mxy, res, s.ix, s.fx, s.iy, s.fy, up * lz);
    bilin_grad(g.myz, res, s.iy, s.fy, s.iz, s.fz, up * lx);
    bilin_grad(g.mxz, res, s.ix, s.fx, s.iz, s.fz, up * ly);
    return lz * bxy + lx * byz + ly * bxz;
}

Factors factors_of(const TripleRef& t)
{
    return {t.v_x.data(), t.v_y.data(), t.v_z.data(), t.m_yz.data(), t.m_xz.data(), t.m_xy.data()};
}

void check_triple(const TripleRef& t)
{
    const auto d = static_cast<std::size_t>(t.res);
    if (t.res < 2 || t.v_x.size() != d || t.v_y.size() != d || t.v_z.size() != d || t.m_yz.size() != d * d ||
        t.m_xz.size() != d * d || t.m_xy.size() != d * d) {
        throw ContractError("component triple has inconsistent factor sizes");
    }
}

} // namespace

Stencil make_stencil(int res, const Vec3& x)
{
    for (double c : x) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw ContractError("normalized position outside [0,1]^3");
        }
    }
    Stencil s;
    axis_stencil(res, x[0], s.ix, s.fx);
    axis_stencil(res, x[1], s.iy, s.fy);
    axis_stencil(res, x[2], s.iz, s.fz);
    return s;
}

double eval_component(const TripleRef& triple, const Stencil& s)
{
    return eval_factors(factors_of(triple), triple.res, s);
}

double eval_component(const TripleRef& triple, const Vec3& x)
{
    check_triple(triple);
    return eval_component(triple, make_stencil(triple.res, x));
}

void backward_component(const TripleRef& triple, const Stencil& s, double upstream, const MutableTripleRef& grad)
{
    const MutFactors g{grad.v_x.data(), grad.v_y.data(), grad.v_z.data(),
                       grad.m_yz.data(), grad.m_xz.data(), grad.m_xy.data()};
    backward_factors(factors_of(triple), triple.res, s, upstream, g);
}

double sinc(double r, SincKind kind)
{
    if (r == 0.0) return 1.0;
    if (kind == SincKind::Normalized) {
        // Exact zeros at the nonzero integers.
        if (r == std::round(r)) return 0.0;
        const double pr = std::numbers::pi * r;
        return std::sin(pr) / pr;
    }
    return std::sin(r) / r;
}

std::vector<double> window_weights(double t, int d, SincKind kind)
{
    if (d < 1) throw ContractError("window count must be >= 1");
    std::vector<double> w(d, 1.0);
    if (d == 1) return w;
    for (int n = 0; n < d; ++n) w[n] = sinc((d - 1) * t - n, kind);
    return w;
}

FactorizedField::FactorizedField(const FieldConfig& config, FieldKind kind)
    : config_(config), kind_(kind)
{
    config_.validate();
    if (kind == FieldKind::Density && config_.num_channels != 1) throw ConfigError("density field must have 1 channel");
    if (kind == FieldKind::Color && config_.num_channels != 3) throw ConfigError("color field must have 3 channels");
    params_.assign(config_.parameter_count(), 0.0);
}

std::size_t FactorizedField::component_offset(int channel, int component) const
{
    return (static_cast<std::size_t>(channel) * config_.num_components + component) * config_.triple_size();
}

TripleRef FactorizedField::component(int channel, int component) const
{
    const std::size_t d = config_.grid_res;
    const std::span<const double> all(params_);
    const auto base = all.subspan(component_offset(channel, component), config_.triple_size());
    return {config_.grid_res,   base.subspan(0, d),         base.subspan(d, d),
            base.subspan(2 * d, d), base.subspan(3 * d, d * d), base.subspan(3 * d + d * d, d * d),
            base.subspan(3 * d + 2 * d * d, d * d)};
}

MutableTripleRef FactorizedField::component(int channel, int component)
{
    return component_in(params_, channel, component);
}

MutableTripleRef FactorizedField::component_in(std::span<double> buffer, int channel, int component) const
{
    if (buffer.size() != params_.size()) throw ContractError("buffer is not congruent with field");
    const std::size_t d = config_.grid_res;
    const auto base = buffer.subspan(component_offset(channel, component), config_.triple_size());
    return {config_.grid_res,   base.subspan(0, d),         base.subspan(d, d),
            base.subspan(2 * d, d), base.subspan(3 * d, d * d), base.subspan(3 * d + d * d, d * d),
            base.subspan(3 * d + 2 * d * d, d * d)};
}

FactorizedField init_field(const FieldConfig& config, FieldKind kind, std::uint64_t seed)
{
    FactorizedField field(config, kind);
    const double s = 0.1 / std::sqrt(static_cast<double>(config.grid_res));
    Rng rng(seed);
    for (double& p : field.parameters()) p = rng.uniform(-s, s);
    return field;
}

std::vector<double> mixing_coefficients(const FieldConfig& config, std::span<const double> beta,
                                        std::span<const double> windows)
{
    const int w = config.submanifold_dim;
    const int d = config.window_count();
    if (static_cast<int>(beta.size()) != w) {
        throw ContractError("basis vector has length " + std::to_string(beta.size()) + ", expected " +
                            std::to_string(w));
    }
    if (static_cast<int>(windows.size()) != d) throw ContractError("window weight count mismatch");
    std::vector<double> a(config.num_components);
    for (int n = 0; n < d; ++n) {
        for (int u = 0; u < w; ++u) a[n * w + u] = beta[u] * windows[n];
    }
    return a;
}

void query_raw(const FactorizedField& field, std::span<const double> coefficients, const Stencil& s,
               std::span<double> out)
{
    const FieldConfig& cfg = field.config();
    const int k_count = cfg.num_components;
    const int res = cfg.grid_res;
    const std::size_t stride = cfg.triple_size();
    const double* base = field.parameters().data();
    for (int c = 0; c < cfg.num_channels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < k_count; ++k) {
            const double a = coefficients[k];
            if (a == 0.0) continue;
            acc += a * eval_factors(factors_at(base + (static_cast<std::size_t>(c) * k_count + k) * stride, res), res,
                                    s);
        }
        out[c] = acc;
    }
}

void backward_raw(const FactorizedField& field, std::span<const double> coefficients, const Stencil& s,
                  std::span<const double> upstream, std::span<double> grad, std::span<double> coefficient_grad)
{
    const FieldConfig& cfg = field.config();
    const int k_count = cfg.num_components;
    const int res = cfg.grid_res;
    const std::size_t stride = cfg.triple_size();
    const double* base = field.parameters().data();
    double* gbase = grad.data();
    for (int c = 0; c < cfg.num_channels; ++c) {
        const double up = upstream[c];
        if (up == 0.0) continue;
        for (int k = 0; k < k_count; ++k) {
            const std::size_t off = (static_cast<std::size_t>(c) * k_count + k) * stride;
            const Factors f = factors_at(base + off, res);
            const double a = coefficients[k];
            const double value =
                a != 0.0 ? backward_factors(f, res, s, up * a, factors_at(gbase + off, res)) : eval_factors(f, res, s);
            coefficient_grad[k] += up * value;
        }
    }
}

std::vector<double> coefficient_grad_to_beta(const FieldConfig& config, std::span<const double> coefficient_grad,
                                             std::span<const double> windows)
{
    const int w = config.submanifold_dim;
    std::vector<double> g(w, 0.0);
    for (int n = 0; n < config.window_count(); ++n) {
        for (int u = 0; u < w; ++u) g[u] += windows[n] * coefficient_grad[n * w + u];
    }
    return g;
}

std::vector<double> query_field_raw(const FactorizedField& field, std::span<const double> beta, double t,
                                    const Vec3& x)
{
    const FieldConfig& cfg = field.config();
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("time outside [0,1]");
    const auto windows = window_weights(t, cfg.window_count(), cfg.sinc);
    const auto coeffs = mixing_coefficients(cfg, beta, windows);
    std::vector<double> out(cfg.num_channels);
    query_raw(field, coeffs, make_stencil(cfg.grid_res, x), out);
    return out;
}

std::vector<double> backward_field(const FactorizedField& field, const Vec3& x, std::span<const double> beta,
                                   std::span<const double> windows, std::span<const double> upstream,
                                   FieldGradients& grads)
{
    const FieldConfig& cfg = field.config();
    if (static_cast<int>(upstream.size()) != cfg.num_channels) throw ContractError("upstream gradient size mismatch");
    if (grads.values.size() != field.parameters().size()) throw ContractError("gradient buffer not congruent");
    const auto coeffs = mixing_coefficients(cfg, beta, windows);
    std::vector<double> coeff_grad(cfg.num_components, 0.0);
    backward_raw(field, coeffs, make_stencil(cfg.grid_res, x), upstream, grads.values, coeff_grad);
    return coefficient_grad_to_beta(cfg, coeff_grad, windows);
}

double activate_density(double raw, double shift)
{
    const double z = raw + shift;
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    // exp underflows near z = -745; keep the density strictly positive.
    return std::max(std::log1p(std::exp(z)), std::numeric_limits<double>::min());
}

double sigmoid(double r)
{
    if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
    const double e = std::exp(r);
    return e / (1.0 + e);
}

double activate_density_grad(double raw, double shift) { return sigmoid(raw + shift); }

Vec3 activate_color(const Vec3& raw) { return {sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])}; }

namespace {

// Sum of squared adjacent differences of a vector and its term count.
double vec_tv(const double* v, int n)
{
    double s = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        const double d = v[i + 1] - v[i];
        s += d * d;
    }
    return s / (n - 1);
}

double mat_tv(const double* m, int n)
{
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double c = m[i * n + j];
            if (j + 1 < n) s += (m[i * n + j + 1] - c) * (m[i * n + j + 1] - c);
            if (i + 1 < n) s += (m[(i + 1) * n + j] - c) * (m[(i + 1) * n + j] - c);
        }
    }
    return s / (2.0 * n * (n - 1));
}

void vec_tv_grad(const double* v, int n, double scale, double* g)
{
    const double k = 2.0 * scale / (n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        const double d = k * (v[i + 1] - v[i]);
        g[i + 1] += d;
        g[i] -= d;
    }
}

void mat_tv_grad(const double* m, int n, double scale, double* g)
{
    const double k = 2.0 * scale / (2.0 * n * (n - 1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double c = m[i * n + j];
            if (j + 1 < n) {
                const double d = k * (m[i * n + j + 1] - c);
                g[i * n + j + 1] += d;
                g[i * n + j] -= d;
            }
            if (i + 1 < n) {
                const double d = k * (m[(i + 1) * n + j] - c);
                g[(i + 1) * n + j] += d;
                g[i * n + j] -= d;
            }
        }
    }
}

} // namespace

double tv_penalty(const FactorizedField& field)
{
    const FieldConfig& cfg = field.config();
    const int res = cfg.grid_res;
    const int triples = cfg.num_channels * cfg.num_components;
    const double* base = field.parameters().data();
    double total = 0.0;
    for (int t = 0; t < triples; ++t) {
        const Factors f = factors_at(base + t * cfg.triple_size(), res);
        total += vec_tv(f.vx, res) + vec_tv(f.vy, res) + vec_tv(f.vz, res);
        total += mat_tv(f.myz, res) + mat_tv(f.mxz, res) + mat_tv(f.mxy, res);
    }
    return total / (6.0 * triples);
}

void tv_backward(const FactorizedField& field, double scale, std::span<double> grad)
{
    const FieldConfig& cfg = field.config();
    if (grad.size() != field.parameters().size()) throw ContractError("gradient buffer not congruent");
    const int res = cfg.grid_res;
    const int triples = cfg.num_channels * cfg.num_components;
    const double s = scale / (6.0 * triples);
    const double* base = field.parameters().data();
    for (int t = 0; t < triples; ++t) {
        const Factors f = factors_at(base + t * cfg.triple_size(), res);
        const MutFactors g = factors_at(grad.data() + t * cfg.triple_size(), res);
        vec_tv_grad(f.vx, res, s, g.vx);
        vec_tv_grad(f.vy, res, s, g.vy);
        vec_tv_grad(f.vz, res, s, g.vz);
        mat_tv_grad(f.myz, res, s, g.myz);
        mat_tv_grad(f.mxz, res, s, g.mxz);
        mat_tv_grad(f.mxy, res, s, g.mxy);
    }
}

std::vector<double> materialize_dense(const FactorizedField& field, std::span<const double> beta, double t,
                                      int resolution)
{
    if (resolution < 2) throw ContractError("materialize resolution must be >= 2");
    const FieldConfig& cfg = field.config();
    const auto windows = window_weights(t, cfg.window_count(), cfg.sinc);
    const auto coeffs = mixing_coefficients(cfg, beta, windows);
    const int c_count = cfg.num_channels;
    const auto r = static_cast<std::size_t>(resolution);
    std::vector<double> grid(r * r * r * c_count);
    const double denom = resolution - 1;
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            for (int k = 0; k < resolution; ++k) {
                const Stencil s = make_stencil(cfg.grid_res, {i / denom, j / denom, k / denom});
                const std::size_t idx = ((i * r + j) * r + k) * c_count;
                query_raw(field, coeffs, s, std::span<double>(grid).subspan(idx, c_count));
            }
        }
    }
    return grid;
}

} // namespace blrf
