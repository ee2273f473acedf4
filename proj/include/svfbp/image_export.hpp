#pragma once

// PNG export: grayscale central slices, weight heatmaps with a colorbar,
// and loss-curve plots. All encoders are deterministic (no timestamps or
// ancillary metadata).

#include <filesystem>
#include <string>
#include <vector>

#include "svfbp/array.hpp"
#include "svfbp/volume.hpp"

namespace svfbp::io {

namespace fs = std::filesystem;

void write_png_gray(const fs::path& path, const Array2D<unsigned char>& img);
void write_png_rgb(const fs::path& path, std::size_t width, std::size_t height,
                   const std::vector<unsigned char>& rgb);

struct Window {
    double lo = 0.0;
    double hi = 0.0;
    bool fixed = false;  // false: min-max per image
};

/// Central axial/coronal/sagittal slices as 8-bit grayscale PNGs,
/// nearest-neighbor upscaled.
template <typename T>
void export_central_slices(const fs::path& out_dir, const std::string& stem, const Volume<T>& vol,
                           Window window = {}, int scale = 4);

/// One heatmap per value slice with a shared color scale and a rendered
/// colorbar with numeric range labels.
template <typename T>
void export_heatmap(const fs::path& path, const Array2D<T>& values, double lo, double hi,
                    int scale = 4);

void export_loss_plot(const fs::path& path, const std::vector<double>& train_loss,
                      const std::vector<double>& val_loss);

}  // namespace svfbp::io
