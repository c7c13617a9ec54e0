// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/model.hpp>
#include <blrf/renderer.hpp>
#include <blrf/training.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace blrf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to render from or resume a run.
///
/// On disk: one segment per field ("BLRF", u32 version, u32-length JSON header
/// with the field config and basis description, f32 tensors, f32 neural basis
/// parameters), density first, then a trailer ("BLTR", u32 version, u32-length
/// JSON with sampling, training config, iteration and Adam step counts, then f32
/// Adam m and v for the density, color, density-basis and color-basis blocks).
/// All numbers are little-endian.
struct Checkpoint {
    SceneModel model;
    SamplingSpec sampling;
    TrainConfig train;
    OptimizerState optimizer;
};

void write_field_segment(std::ostream& out, const FactorizedField& field, const TimeBasis& basis);
/// Reads one segment; `basis` receives the field's time basis.
FactorizedField read_field_segment(std::istream& in, std::optional<TimeBasis>& basis);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// JSON header of the first segment, for inspection.
std::string checkpoint_header(const std::filesystem::path& path);

} // namespace blrf
