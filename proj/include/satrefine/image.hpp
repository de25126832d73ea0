#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace satrefine {

/// H×W×C float image with values in [0,1], row-major and channel-interleaved.
class ImagePatch {
 public:
  ImagePatch() = default;
  ImagePatch(std::size_t width, std::size_t height, std::size_t channels,
             float fill = 0.0f);
  ImagePatch(std::size_t width, std::size_t height, std::size_t channels,
             std::vector<float> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  float& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  std::span<float> pixels() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  bool same_shape(const ImagePatch& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const ImagePatch&, const ImagePatch&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> pixels_;
};

using Rgb = std::array<float, 3>;

/// Object cut-out: straight (non-premultiplied) rgb plus per-pixel opacity.
class Sprite {
 public:
  Sprite() = default;
  Sprite(std::size_t width, std::size_t height);
  Sprite(std::size_t width, std::size_t height, std::vector<float> rgb,
         std::vector<float> alpha);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  float& rgb(std::size_t x, std::size_t y, std::size_t c) {
    return rgb_[(y * width_ + x) * 3 + c];
  }
  float rgb(std::size_t x, std::size_t y, std::size_t c) const {
    return rgb_[(y * width_ + x) * 3 + c];
  }
  float& alpha(std::size_t x, std::size_t y) { return alpha_[y * width_ + x]; }
  float alpha(std::size_t x, std::size_t y) const {
    return alpha_[y * width_ + x];
  }

  std::span<const float> rgb_data() const noexcept { return rgb_; }
  std::span<const float> alpha_data() const noexcept { return alpha_; }

  /// Sum of alpha over all pixels.
  double alpha_mass() const noexcept;

  friend bool operator==(const Sprite&, const Sprite&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> rgb_;
  std::vector<float> alpha_;
};

/// Top-left offset of the (rotated) sprite's bounding box in the background,
/// plus the rotation applied before placement.
struct PlacementSpec {
  std::ptrdiff_t x = 0;
  std::ptrdiff_t y = 0;
  double angle = 0.0;

  friend bool operator==(const PlacementSpec&, const PlacementSpec&) = default;
};

/// Alpha 0 for pixels within Euclidean RGB distance `tolerance` of
/// `key_color`, alpha 1 elsewhere.
Sprite key_alpha(const ImagePatch& image, const Rgb& key_color, float tolerance);

/// Rotates counter-clockwise in (column, row) pixel coordinates about the
/// sprite centre. The canvas grows to the rotated bounding box. Quarter turns
/// are exact permutations; other angles resample bilinearly on premultiplied
/// colour, treating samples outside the source as fully transparent.
Sprite rotate_sprite(const Sprite& sprite, double angle_degrees);

/// Size of the canvas `rotate_sprite` produces.
std::array<std::size_t, 2> rotated_extent(std::size_t width, std::size_t height,
                                          double angle_degrees);

/// Alpha-blends the sprite, rotated by `placement.angle`, onto a copy of the
/// background. Throws PlacementError if any part falls outside.
ImagePatch composite(const ImagePatch& background, const Sprite& sprite,
                     const PlacementSpec& placement);

/// All angle-0 offsets that keep the sprite inside the background,
/// row-major (y outer, x inner).
std::vector<PlacementSpec> enumerate_placements(const ImagePatch& background,
                                                const Sprite& sprite);

/// Rec. 601 luma of an rgb triple.
inline float luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// PNG I/O. 8-bit files; values are scaled by 1/255 on load.

/// Loads an image as 3-channel (or 1-channel if `keep_gray` and the file is
/// grayscale). Any alpha channel is dropped.
ImagePatch read_png(const std::filesystem::path& path, bool keep_gray = false);

/// Loads a sprite. RGBA files use their alpha channel directly; returns
/// false in `has_alpha` when the file carried no alpha (alpha set to 1).
Sprite read_sprite_png(const std::filesystem::path& path, bool* has_alpha = nullptr);

/// Writes an 8-bit RGB or grayscale PNG (values rounded to nearest of 255).
void write_png(const std::filesystem::path& path, const ImagePatch& image);

}  // namespace satrefine
