// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/config.hpp>

#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace blrf {

using detail::json;

void RunConfig::validate() const
{
    density.validate();
    color.validate();
    if (density.num_channels != 1) throw ConfigError("density field must have 1 channel");
    if (color.num_channels != 3) throw ConfigError("color field must have 3 channels");
    if (density.scene_bound != color.scene_bound) throw ConfigError("density and color scene bounds differ");
    if (density_basis == BasisFamily::Neural || color_basis == BasisFamily::Neural) {
        if (basis_shape.embed_freqs < 1 || basis_shape.hidden_width < 1 || basis_shape.hidden_layers < 1) {
            throw ConfigError("invalid neural basis shape");
        }
    }
    if (sampling.n_samples < 1) throw ConfigError("n_samples must be positive");
    train.validate();
    if (threads < 1) throw ConfigError("threads must be positive");
    if (log_every < 0 || validate_every < 0) throw ConfigError("log_every and validate_every must be nonnegative");
}

namespace {

RunConfig with_shape(int res, int components, int subdim, int iters, const std::string& name)
{
    RunConfig c;
    c.profile = name;
    c.density.grid_res = res;
    c.density.num_components = components;
    c.density.submanifold_dim = subdim;
    c.density.num_channels = 1;
    c.color = c.density;
    c.color.num_channels = 3;
    c.train.iters = iters;
    c.sampling.perturb = true;
    return c;
}

} // namespace

RunConfig paper_profile()
{
    RunConfig c = with_shape(128, 24, 8, 40000, "paper");
    c.train.batch_rays = 4096;
    c.sampling.n_samples = 128;
    return c;
}

RunConfig desk_profile()
{
    RunConfig c = with_shape(32, 12, 4, 5000, "desk");
    c.train.batch_rays = 512;
    c.sampling.n_samples = 64;
    // One octave keeps the embedding below the window cutoff for short sequences.
    c.basis_shape.embed_freqs = 1;
    return c;
}

RunConfig profile_by_name(const std::string& name)
{
    if (name == "paper") return paper_profile();
    if (name == "desk") return desk_profile();
    throw ConfigError("unknown profile '" + name + "' (expected paper or desk)");
}

namespace {

const std::set<std::string> kTopKeys = {"profile", "density",  "color", "density_basis", "color_basis",
                                         "basis_shape", "sampling", "train", "data",         "out",
                                         "threads", "seed",     "log_every", "validate_every"};

} // namespace

RunConfig apply_config_json(const RunConfig& base, const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::check_keys(j, kTopKeys, "config");
    RunConfig c = base;
    if (j.contains("profile")) {
        const std::string name = j.at("profile").get<std::string>();
        if (name != base.profile) c = profile_by_name(name);
    }
    if (j.contains("density")) detail::from_json(j.at("density"), c.density, "config.density");
    if (j.contains("color")) detail::from_json(j.at("color"), c.color, "config.color");
    std::string s;
    if (j.contains("density_basis")) {
        detail::read_opt(j, "density_basis", s, "config");
        c.density_basis = basis_family_from_string(s);
    }
    if (j.contains("color_basis")) {
        detail::read_opt(j, "color_basis", s, "config");
        c.color_basis = basis_family_from_string(s);
    }
    if (j.contains("basis_shape")) detail::from_json(j.at("basis_shape"), c.basis_shape, "config.basis_shape");
    if (j.contains("sampling")) detail::from_json(j.at("sampling"), c.sampling, "config.sampling");
    if (j.contains("train")) detail::from_json(j.at("train"), c.train, "config.train");
    detail::read_opt(j, "data", c.data, "config");
    detail::read_opt(j, "out", c.out, "config");
    detail::read_opt(j, "threads", c.threads, "config");
    detail::read_opt(j, "seed", c.train.seed, "config");
    detail::read_opt(j, "log_every", c.log_every, "config");
    detail::read_opt(j, "validate_every", c.validate_every, "config");
    return c;
}

RunConfig apply_config_file(const RunConfig& base, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return apply_config_json(base, ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_json_string(const RunConfig& c)
{
    const json j = {{"profile", c.profile},
                    {"density", detail::to_json(c.density)},
                    {"color", detail::to_json(c.color)},
                    {"density_basis", to_string(c.density_basis)},
                    {"color_basis", to_string(c.color_basis)},
                    {"basis_shape", detail::to_json(c.basis_shape)},
                    {"sampling", detail::to_json(c.sampling)},
                    {"train", detail::to_json(c.train)},
                    {"data", c.data},
                    {"out", c.out},
                    {"threads", c.threads},
                    {"log_every", c.log_every},
                    {"validate_every", c.validate_every}};
    return j.dump(2) + "\n";
}

SceneModel init_model(const RunConfig& config)
{
    config.validate();
    const std::uint64_t seed = config.train.seed;
    auto make_basis = [&](BasisFamily family, int dim, std::uint64_t s) {
        return family == BasisFamily::Neural ? TimeBasis::neural(dim, config.basis_shape, s)
                                             : TimeBasis::fixed(family, dim);
    };
    SceneModel model{init_field(config.density, FieldKind::Density, seed * 4 + 0),
                     init_field(config.color, FieldKind::Color, seed * 4 + 1),
                     make_basis(config.density_basis, config.density.submanifold_dim, seed * 4 + 2),
                     make_basis(config.color_basis, config.color.submanifold_dim, seed * 4 + 3)};
    model.validate();
    round_to_storage(model);
    return model;
}

} // namespace blrf
