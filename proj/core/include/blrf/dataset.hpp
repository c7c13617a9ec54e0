// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/common.hpp>
#include <blrf/image.hpp>
#include <blrf/renderer.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace blrf {

struct FrameRecord {
    std::string file_path;
    Mat4 transform_matrix = identity4();
    double time = 0.0;
};

/// Posed, timestamped image set. Serialized as JSON with keys camera_angle_x,
/// w, h, near, far, frames[{file_path, time, transform_matrix}], train_idx,
/// test_idx and an optional background.
struct DatasetManifest {
    double camera_angle_x = 0.9;
    int width = 0;
    int height = 0;
    double near = 1.0;
    double far = 5.0;
    Vec3 background{1.0, 1.0, 1.0};
    std::vector<FrameRecord> frames;
    std::vector<int> train_idx;
    std::vector<int> test_idx;

    void validate() const;
    Camera camera(int frame) const;
    std::vector<int> split(const std::string& name) const;
};

/// Maps times onto [0, 1] (min -> 0, max -> 1) when any lies outside; otherwise unchanged.
void normalize_times(std::vector<FrameRecord>& frames);

/// Parses and validates a manifest. Errors name the offending field.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads a frame image. Prefers a float raw dump (same stem, ".f32") when one exists.
Image load_image(const std::filesystem::path& path, int width, int height, const Vec3& background);

/// Resolves a manifest file_path against the dataset directory, adding ".png" when no extension is given.
std::filesystem::path resolve_frame_path(const std::filesystem::path& root, const std::string& file_path);

/// Manifest plus decoded frames; immutable after load.
struct Dataset {
    std::filesystem::path root;
    DatasetManifest manifest;
    std::vector<Image> images;
    std::vector<Camera> cameras;
};

/// `path` is a manifest file or a directory containing transforms.json.
Dataset load_dataset(const std::filesystem::path& path);

/// Dataset built from in-memory frames (used by tests and the synthetic generator).
Dataset make_dataset(DatasetManifest manifest, std::vector<Image> images);

} // namespace blrf
