// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/field.hpp>
#include <blrf/time_basis.hpp>

#include <span>
#include <vector>

namespace blrf {

/// Density and color fields with their independent time bases.
struct SceneModel {
    FactorizedField density;
    FactorizedField color;
    TimeBasis density_basis;
    TimeBasis color_basis;

    /// Checks that bases match their fields and that both fields share a scene cube.
    void validate() const;
    double scene_bound() const { return density.config().scene_bound; }
};

struct ModelGradients {
    explicit ModelGradients(const SceneModel& model);

    void zero();
    /// this += other, element by element.
    void add(const ModelGradients& other);

    std::vector<double> density;
    std::vector<double> color;
    std::vector<double> density_basis;
    std::vector<double> color_basis;
};

/// Basis values, window weights and mixing coefficients of both fields at one instant.
struct TimeContext {
    double t = 0.0;
    std::vector<double> density_beta, density_windows, density_coeffs;
    std::vector<double> color_beta, color_windows, color_coeffs;
};

TimeContext prepare_time(const SceneModel& model, double t);

/// Coefficient-space gradient accumulators for one TimeContext.
struct TimeGradients {
    explicit TimeGradients(const SceneModel& model)
        : density(model.density.config().num_components, 0.0), color(model.color.config().num_components, 0.0)
    {
    }
    void zero()
    {
        std::fill(density.begin(), density.end(), 0.0);
        std::fill(color.begin(), color.end(), 0.0);
    }
    std::vector<double> density;
    std::vector<double> color;
};

/// Pushes accumulated coefficient gradients through the window mix and both bases.
void finish_time_backward(const SceneModel& model, const TimeContext& ctx, const TimeGradients& tg,
                          ModelGradients& grads);

/// Density after activation and raw color at a world point; culled points give sigma 0.
struct PointSample {
    double sigma = 0.0;
    Vec3 rgb{0.0, 0.0, 0.0};
};

/// Normalized grid coordinate of a world point, or false when it is outside the cube.
bool world_to_unit(const Vec3& p, double bound, Vec3& unit);

PointSample query_point(const SceneModel& model, const TimeContext& ctx, const Vec3& world);

} // namespace blrf
