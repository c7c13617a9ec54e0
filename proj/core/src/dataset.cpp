// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/dataset.hpp>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace blrf {

using nlohmann::json;

namespace {

template <typename T>
T required(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

Mat4 parse_matrix(const json& j, const std::string& where)
{
    Mat4 m{};
    if (!j.is_array()) throw ConfigError(where + ": transform_matrix must be an array");
    if (j.size() == 4) {
        for (int r = 0; r < 4; ++r) {
            if (!j[r].is_array() || j[r].size() != 4) throw ConfigError(where + ": transform_matrix must be 4x4");
            for (int c = 0; c < 4; ++c) m[r * 4 + c] = j[r][c].get<double>();
        }
    } else if (j.size() == 16) {
        for (int i = 0; i < 16; ++i) m[i] = j[i].get<double>();
    } else {
        throw ConfigError(where + ": transform_matrix must be 4x4");
    }
    return m;
}

void check_pose(const Mat4& m, const std::string& where)
{
    for (double v : m) {
        if (!std::isfinite(v)) throw ConfigError(where + ": transform_matrix has non-finite entries");
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            double d = 0.0;
            for (int k = 0; k < 3; ++k) d += m[k * 4 + a] * m[k * 4 + b];
            if (std::abs(d - (a == b ? 1.0 : 0.0)) > 1e-3) {
                throw ConfigError(where + ": transform_matrix rotation block is not orthonormal");
            }
        }
    }
}

} // namespace

void normalize_times(std::vector<FrameRecord>& frames)
{
    if (frames.empty()) return;
    const auto [lo, hi] = std::minmax_element(frames.begin(), frames.end(),
                                              [](const FrameRecord& a, const FrameRecord& b) { return a.time < b.time; });
    const double tmin = lo->time;
    const double tmax = hi->time;
    if (tmin >= 0.0 && tmax <= 1.0) return;
    const double span = tmax - tmin;
    for (auto& f : frames) f.time = span > 0.0 ? (f.time - tmin) / span : 0.0;
}

void DatasetManifest::validate() const
{
    if (frames.empty()) throw ConfigError("manifest: frames must be non-empty");
    if (width < 1 || height < 1) throw ConfigError("manifest: w and h must be positive");
    if (!(camera_angle_x > 0.0 && camera_angle_x < 3.14159)) throw ConfigError("manifest: camera_angle_x out of range");
    if (!(near > 0.0 && near < far)) throw ConfigError("manifest: need 0 < near < far");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string where = "manifest: frames[" + std::to_string(i) + "]";
        if (!(frames[i].time >= 0.0 && frames[i].time <= 1.0)) throw ConfigError(where + ": time outside [0,1]");
        check_pose(frames[i].transform_matrix, where);
    }
    for (const auto* idx : {&train_idx, &test_idx}) {
        for (int i : *idx) {
            if (i < 0 || i >= static_cast<int>(frames.size())) {
                throw ConfigError("manifest: split index " + std::to_string(i) + " out of range");
            }
        }
    }
}

Camera DatasetManifest::camera(int frame) const
{
    return Camera::from_fov(width, height, camera_angle_x, frames.at(frame).transform_matrix);
}

std::vector<int> DatasetManifest::split(const std::string& name) const
{
    if (name == "train") return train_idx;
    if (name == "test") return test_idx;
    if (name == "all") {
        std::vector<int> all(frames.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }
    throw ConfigError("unknown split '" + name + "' (expected train, test or all)");
}

DatasetManifest parse_manifest(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest: parse failure: ") + e.what());
    }
    const std::string where = "manifest";
    DatasetManifest m;
    m.camera_angle_x = required<double>(j, "camera_angle_x", where);
    m.width = required<int>(j, "w", where);
    m.height = required<int>(j, "h", where);
    m.near = required<double>(j, "near", where);
    m.far = required<double>(j, "far", where);
    if (j.contains("background")) {
        const auto bg = j.at("background").get<std::vector<double>>();
        if (bg.size() != 3) throw ConfigError("manifest: background must have 3 entries");
        m.background = {bg[0], bg[1], bg[2]};
    }
    const json frames = required<json>(j, "frames", where);
    if (!frames.is_array()) throw ConfigError("manifest: frames must be an array");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string fw = "manifest: frames[" + std::to_string(i) + "]";
        FrameRecord f;
        f.file_path = required<std::string>(frames[i], "file_path", fw);
        f.time = required<double>(frames[i], "time", fw);
        if (!frames[i].contains("transform_matrix")) throw ConfigError(fw + ": missing field 'transform_matrix'");
        f.transform_matrix = parse_matrix(frames[i].at("transform_matrix"), fw);
        m.frames.push_back(std::move(f));
    }
    normalize_times(m.frames);
    if (j.contains("train_idx")) {
        m.train_idx = j.at("train_idx").get<std::vector<int>>();
    } else {
        m.train_idx = m.split("all");
    }
    if (j.contains("test_idx")) m.test_idx = j.at("test_idx").get<std::vector<int>>();
    m.validate();
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_manifest(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m)
{
    json j;
    j["camera_angle_x"] = m.camera_angle_x;
    j["w"] = m.width;
    j["h"] = m.height;
    j["near"] = m.near;
    j["far"] = m.far;
    j["background"] = {m.background[0], m.background[1], m.background[2]};
    json frames = json::array();
    for (const auto& f : m.frames) {
        json rows = json::array();
        for (int r = 0; r < 4; ++r) {
            rows.push_back({f.transform_matrix[r * 4], f.transform_matrix[r * 4 + 1], f.transform_matrix[r * 4 + 2],
                            f.transform_matrix[r * 4 + 3]});
        }
        frames.push_back({{"file_path", f.file_path}, {"time", f.time}, {"transform_matrix", rows}});
    }
    j["frames"] = frames;
    j["train_idx"] = m.train_idx;
    j["test_idx"] = m.test_idx;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing manifest " + path.string());
}

std::filesystem::path resolve_frame_path(const std::filesystem::path& root, const std::string& file_path)
{
    std::filesystem::path p = root / file_path;
    if (!p.has_extension()) p += ".png";
    return p.lexically_normal();
}

Image load_image(const std::filesystem::path& path, int width, int height, const Vec3& background)
{
    std::filesystem::path raw = path;
    raw.replace_extension(".f32");
    Image img;
    if (std::filesystem::exists(raw)) {
        img = read_raw(raw, width, height);
    } else {
        img = read_png(path, background);
    }
    if (img.width != width || img.height != height) {
        throw IoError("image " + path.string() + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", manifest says " + std::to_string(width) + "x" + std::to_string(height));
    }
    return img;
}

Dataset make_dataset(DatasetManifest manifest, std::vector<Image> images)
{
    manifest.validate();
    if (images.size() != manifest.frames.size()) throw ContractError("one image per frame required");
    Dataset ds;
    ds.manifest = std::move(manifest);
    ds.images = std::move(images);
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        if (ds.images[i].width != ds.manifest.width || ds.images[i].height != ds.manifest.height) {
            throw ContractError("frame " + std::to_string(i) + " has the wrong size");
        }
        ds.cameras.push_back(ds.manifest.camera(static_cast<int>(i)));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path)
{
    const std::filesystem::path manifest_path =
        std::filesystem::is_directory(path) ? path / "transforms.json" : path;
    DatasetManifest m = load_manifest(manifest_path);
    const std::filesystem::path root = manifest_path.parent_path();
    std::vector<Image> images;
    images.reserve(m.frames.size());
    for (const auto& f : m.frames) {
        images.push_back(load_image(resolve_frame_path(root, f.file_path), m.width, m.height, m.background));
    }
    Dataset ds = make_dataset(std::move(m), std::move(images));
    ds.root = root;
    return ds;
}

} // namespace blrf
