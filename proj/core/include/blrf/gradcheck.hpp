// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/model.hpp>
#include <blrf/renderer.hpp>
#include <blrf/training.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace blrf {

/// Miniature model and ray batch whose total-loss gradient is checked entry by entry.
struct GradCheckCase {
    std::string name;
    int grid_res = 3;
    int num_components = 2;
    int submanifold_dim = 2;
    int image_size = 2;
    int frames = 4;
    int n_samples = 4;
    NeuralBasisShape basis_shape{3, 16, 3};
};

struct GradCheckOptions {
    std::vector<GradCheckCase> cases;
    double step = 1e-5;
    double tolerance = 1e-5;
    /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
    std::uint64_t seed = 7;
    /// Flips the sign of every analytic density-field gradient (used to prove the checker can fail).
    bool inject_sign_flip = false;
};

/// D = 3, K = 2, W = 2 (one window), then D = 4, K = 4, W = 2 (two windows).
std::vector<GradCheckCase> default_gradcheck_cases();
GradCheckOptions default_gradcheck_options();

struct GradCheckEntry {
    std::string case_name;
    std::string parameter_class;
    std::size_t count = 0;
    double max_rel_error = 0.0;
    double max_abs_grad = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;
    double seconds = 0.0;

    bool passed() const;
    void print(std::ostream& out) const;
};

double relative_error(double analytic, double numeric, double floor);

/// Central differences of the total loss (photometric + both TV terms + high-pass) against
/// loss_and_grad for every parameter class, plus basis-value and compositing checks.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

} // namespace blrf
