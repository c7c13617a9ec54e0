// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/model.hpp>
#include <blrf/renderer.hpp>
#include <blrf/training.hpp>

#include <filesystem>
#include <string>

namespace blrf {

/// Fully resolved settings of a training run.
struct RunConfig {
    std::string profile = "paper";
    FieldConfig density;
    FieldConfig color;
    BasisFamily density_basis = BasisFamily::Neural;
    BasisFamily color_basis = BasisFamily::Neural;
    NeuralBasisShape basis_shape;
    /// near, far and background are replaced by the dataset's values at train time.
    SamplingSpec sampling;
    TrainConfig train;
    std::string data;
    std::string out;
    int threads = 1;
    int log_every = 100;
    int validate_every = 0;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// Hyperparameters of the reference configuration: D = 128, K = 24, W = 8.
RunConfig paper_profile();
/// Small configuration for CPU runs: D = 32, K = 12, W = 4, one embedding octave, 5000 iterations.
RunConfig desk_profile();
/// "paper" or "desk".
RunConfig profile_by_name(const std::string& name);

/// Applies the keys present in a JSON document on top of `base`. Unknown keys are errors.
RunConfig apply_config_json(const RunConfig& base, const std::string& text);
RunConfig apply_config_file(const RunConfig& base, const std::filesystem::path& path);
std::string to_json_string(const RunConfig& config);

/// Fresh model for a run: fields and bases seeded from train.seed, rounded to storage precision.
SceneModel init_model(const RunConfig& config);

} // namespace blrf
