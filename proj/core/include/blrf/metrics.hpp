// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <blrf/image.hpp>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace blrf {

/// Peak signal-to-noise ratio for unit peak; +infinity when the images are identical.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

/// Mean SSIM over channels and valid 11x11 windows (Gaussian sigma 1.5, K1 0.01, K2 0.03, L 1).
double ssim(const Image& a, const Image& b);

struct FrameMetric {
    int frame = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<FrameMetric> frames;

    double mean_psnr() const;
    double mean_ssim() const;

    /// CSV `frame,psnr_db,ssim` with a trailing `mean` row.
    void write_csv(std::ostream& out) const;
    void write_csv(const std::filesystem::path& path) const;
    void print_table(std::ostream& out) const;
};

} // namespace blrf
