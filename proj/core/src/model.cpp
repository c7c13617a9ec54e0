// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/model.hpp>

namespace blrf {

void SceneModel::validate() const
{
    if (density.kind() != FieldKind::Density || color.kind() != FieldKind::Color) {
        throw ConfigError("scene model needs one density and one color field");
    }
    if (density_basis.dim() != density.config().submanifold_dim) {
        throw ConfigError("density basis dimension does not match the density submanifold dimension");
    }
    if (color_basis.dim() != color.config().submanifold_dim) {
        throw ConfigError("color basis dimension does not match the color submanifold dimension");
    }
    if (density.config().scene_bound != color.config().scene_bound) {
        throw ConfigError("density and color fields must share a scene bound");
    }
}

ModelGradients::ModelGradients(const SceneModel& model)
    : density(model.density.parameters().size(), 0.0),
      color(model.color.parameters().size(), 0.0),
      density_basis(model.density_basis.parameters().size(), 0.0),
      color_basis(model.color_basis.parameters().size(), 0.0)
{
}

void ModelGradients::zero()
{
    for (auto* v : {&density, &color, &density_basis, &color_basis}) std::fill(v->begin(), v->end(), 0.0);
}

void ModelGradients::add(const ModelGradients& other)
{
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) throw ContractError("gradient buffers not congruent");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(density, other.density);
    acc(color, other.color);
    acc(density_basis, other.density_basis);
    acc(color_basis, other.color_basis);
}

TimeContext prepare_time(const SceneModel& model, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("time outside [0,1]");
    TimeContext ctx;
    ctx.t = t;
    const FieldConfig& dc = model.density.config();
    const FieldConfig& cc = model.color.config();
    ctx.density_beta = model.density_basis.eval(t);
    ctx.density_windows = window_weights(t, dc.window_count(), dc.sinc);
    ctx.density_coeffs = mixing_coefficients(dc, ctx.density_beta, ctx.density_windows);
    ctx.color_beta = model.color_basis.eval(t);
    ctx.color_windows = window_weights(t, cc.window_count(), cc.sinc);
    ctx.color_coeffs = mixing_coefficients(cc, ctx.color_beta, ctx.color_windows);
    return ctx;
}

void finish_time_backward(const SceneModel& model, const TimeContext& ctx, const TimeGradients& tg,
                          ModelGradients& grads)
{
    const auto d_beta = coefficient_grad_to_beta(model.density.config(), tg.density, ctx.density_windows);
    model.density_basis.backward(ctx.t, d_beta, grads.density_basis);
    const auto c_beta = coefficient_grad_to_beta(model.color.config(), tg.color, ctx.color_windows);
    model.color_basis.backward(ctx.t, c_beta, grads.color_basis);
}

bool world_to_unit(const Vec3& p, double bound, Vec3& unit)
{
    const double inv = 1.0 / (2.0 * bound);
    for (int k = 0; k < 3; ++k) {
        const double u = (p[k] + bound) * inv;
        if (!(u >= 0.0 && u <= 1.0)) return false;
        unit[k] = u;
    }
    return true;
}

PointSample query_point(const SceneModel& model, const TimeContext& ctx, const Vec3& world)
{
    PointSample out;
    Vec3 unit;
    if (!world_to_unit(world, model.scene_bound(), unit)) return out;
    double raw_sigma = 0.0;
    Vec3 raw_rgb{};
    query_raw(model.density, ctx.density_coeffs, make_stencil(model.density.config().grid_res, unit),
              std::span<double>(&raw_sigma, 1));
    query_raw(model.color, ctx.color_coeffs, make_stencil(model.color.config().grid_res, unit), raw_rgb);
    out.sigma = activate_density(raw_sigma, model.density.config().density_shift);
    out.rgb = activate_color(raw_rgb);
    return out;
}

} // namespace blrf
