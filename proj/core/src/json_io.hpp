// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/field.hpp>
#include <blrf/renderer.hpp>
#include <blrf/time_basis.hpp>
#include <blrf/training.hpp>

#include <json.hpp>

#include <set>
#include <string>

namespace blrf::detail {

using nlohmann::json;

/// Rejects keys outside `allowed` so misspelled settings do not pass silently.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

/// Overwrites `out` with j[key] when present.
template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": key '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

inline json to_json(const FieldConfig& c)
{
    return {{"grid_res", c.grid_res},           {"num_components", c.num_components},
            {"submanifold_dim", c.submanifold_dim}, {"num_channels", c.num_channels},
            {"scene_bound", c.scene_bound},     {"sinc", to_string(c.sinc)},
            {"density_shift", c.density_shift}};
}

inline void from_json(const json& j, FieldConfig& c, const std::string& where)
{
    check_keys(j,
               {"grid_res", "num_components", "submanifold_dim", "num_channels", "scene_bound", "sinc",
                "density_shift"},
               where);
    read_opt(j, "grid_res", c.grid_res, where);
    read_opt(j, "num_components", c.num_components, where);
    read_opt(j, "submanifold_dim", c.submanifold_dim, where);
    read_opt(j, "num_channels", c.num_channels, where);
    read_opt(j, "scene_bound", c.scene_bound, where);
    read_opt(j, "density_shift", c.density_shift, where);
    if (j.contains("sinc")) {
        std::string s;
        read_opt(j, "sinc", s, where);
        c.sinc = sinc_kind_from_string(s);
    }
}

inline json to_json(const NeuralBasisShape& s)
{
    return {{"embed_freqs", s.embed_freqs}, {"hidden_width", s.hidden_width}, {"hidden_layers", s.hidden_layers}};
}

inline void from_json(const json& j, NeuralBasisShape& s, const std::string& where)
{
    check_keys(j, {"embed_freqs", "hidden_width", "hidden_layers"}, where);
    read_opt(j, "embed_freqs", s.embed_freqs, where);
    read_opt(j, "hidden_width", s.hidden_width, where);
    read_opt(j, "hidden_layers", s.hidden_layers, where);
}

inline json to_json(const SamplingSpec& s)
{
    return {{"near", s.near},
            {"far", s.far},
            {"n_samples", s.n_samples},
            {"perturb", s.perturb},
            {"background", {s.background[0], s.background[1], s.background[2]}}};
}

inline void from_json(const json& j, SamplingSpec& s, const std::string& where)
{
    check_keys(j, {"near", "far", "n_samples", "perturb", "background"}, where);
    read_opt(j, "near", s.near, where);
    read_opt(j, "far", s.far, where);
    read_opt(j, "n_samples", s.n_samples, where);
    read_opt(j, "perturb", s.perturb, where);
    if (j.contains("background")) {
        std::vector<double> bg;
        read_opt(j, "background", bg, where);
        if (bg.size() != 3) throw ConfigError(where + ": background must have 3 entries");
        s.background = {bg[0], bg[1], bg[2]};
    }
}

inline json to_json(const TrainConfig& c)
{
    return {{"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"lambda_hp", c.lambda_hp},
            {"batch_rays", c.batch_rays},
            {"iters", c.iters},
            {"seed", c.seed},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"lr_tensor_max", c.lr_tensor_max},
            {"lr_mlp_max", c.lr_mlp_max},
            {"lr_cycle_period", c.lr_cycle_period},
            {"lr_floor_ratio", c.lr_floor_ratio},
            {"grad_clip", c.grad_clip},
            {"highpass_samples", c.highpass_samples}};
}

inline void from_json(const json& j, TrainConfig& c, const std::string& where)
{
    check_keys(j,
               {"lambda1", "lambda2", "lambda_hp", "batch_rays", "iters", "seed", "adam_beta1", "adam_beta2",
                "adam_eps", "lr_tensor_max", "lr_mlp_max", "lr_cycle_period", "lr_floor_ratio", "grad_clip",
                "highpass_samples"},
               where);
    read_opt(j, "lambda1", c.lambda1, where);
    read_opt(j, "lambda2", c.lambda2, where);
    read_opt(j, "lambda_hp", c.lambda_hp, where);
    read_opt(j, "batch_rays", c.batch_rays, where);
    read_opt(j, "iters", c.iters, where);
    read_opt(j, "seed", c.seed, where);
    read_opt(j, "adam_beta1", c.adam_beta1, where);
    read_opt(j, "adam_beta2", c.adam_beta2, where);
    read_opt(j, "adam_eps", c.adam_eps, where);
    read_opt(j, "lr_tensor_max", c.lr_tensor_max, where);
    read_opt(j, "lr_mlp_max", c.lr_mlp_max, where);
    read_opt(j, "lr_cycle_period", c.lr_cycle_period, where);
    read_opt(j, "lr_floor_ratio", c.lr_floor_ratio, where);
    read_opt(j, "grad_clip", c.grad_clip, where);
    read_opt(j, "highpass_samples", c.highpass_samples, where);
}

} // namespace blrf::detail
