/**
 * @file image.hpp
 * @brief Planar floating-point raster, file I/O, patch tiling and noise.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace anoseg {

/// Planar (channel-major) raster with values nominally in [0,1].
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    Image(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }
    double at(int c, int y, int x) const { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Reads 8/16-bit PNG or binary PGM/PPM; values scaled to [0,1]. Alpha is dropped.
Image load_image(const std::filesystem::path& path, bool replicate_to_rgb = false);

/// Writes 8-bit PNG (.png) or binary PGM/PPM (.pgm/.ppm) chosen by extension.
void save_image(const std::filesystem::path& path, const Image& image);

/// Replicates a single channel to three; three-channel input is returned unchanged.
Image to_rgb(const Image& image);

/// Rounds every value to the nearest k/255 after clamping to [0,1].
Image quantize_8bit(const Image& image);

Image clamp01(Image image);

/// Bilinear resampling with half-pixel centres.
Image resize_bilinear(const Image& image, int height, int width);

/// Copies the inclusive rectangle [x0,x1]x[y0,y1].
Image crop(const Image& image, int x0, int y0, int x1, int y1);

struct PatchGrid {
    int patch_size = 0;
    int rows = 0;
    int cols = 0;
    int original_height = 0;
    int original_width = 0;
    int pad_bottom = 0;
    int pad_right = 0;
    std::vector<Image> patches; ///< row-major
};

/// Reflect-pads bottom/right to multiples of @p patch_size and tiles without overlap.
PatchGrid decompose_patches(const Image& image, int patch_size);

/// Inverse of decompose_patches; padding is cropped away.
Image reassemble_patches(const PatchGrid& grid);

/// Adds i.i.d. N(0, std^2) noise per value (seeded) and clamps to [0,1].
Image perturb_gaussian(const Image& patch, double std, std::uint64_t seed);

} // namespace anoseg
