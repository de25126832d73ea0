#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "satrefine/errors.hpp"
#include "satrefine/image.hpp"

namespace satrefine {

namespace {

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  bool source_has_alpha = false;
  bool source_is_gray = false;
  std::vector<std::uint8_t> bytes;
};

// `format` is a libpng simplified-API target format.
DecodedPng decode(const std::filesystem::path& path, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  DecodedPng out;
  out.source_has_alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  out.source_is_gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  if (format == PNG_FORMAT_GRAY && !out.source_is_gray) format = PNG_FORMAT_RGB;
  image.format = format;
  out.width = image.width;
  out.height = image.height;
  out.channels = PNG_IMAGE_PIXEL_CHANNELS(format);
  out.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

float to_unit(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

}  // namespace

ImagePatch read_png(const std::filesystem::path& path, bool keep_gray) {
  DecodedPng png = decode(path, keep_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB);
  std::vector<float> pixels(png.bytes.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_unit(png.bytes[i]);
  return ImagePatch(png.width, png.height, png.channels, std::move(pixels));
}

Sprite read_sprite_png(const std::filesystem::path& path, bool* has_alpha) {
  DecodedPng png = decode(path, PNG_FORMAT_RGBA);
  const std::size_t n = png.width * png.height;
  std::vector<float> rgb(n * 3);
  std::vector<float> alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = to_unit(png.bytes[i * 4 + c]);
    alpha[i] = to_unit(png.bytes[i * 4 + 3]);
  }
  if (has_alpha) *has_alpha = png.source_has_alpha;
  return Sprite(png.width, png.height, std::move(rgb), std::move(alpha));
}

void write_png(const std::filesystem::path& path, const ImagePatch& image) {
  std::vector<std::uint8_t> bytes(image.size());
  const auto px = image.pixels();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(px[i] * 255.0f));
  }
  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&out, path.string().c_str(), 0, bytes.data(), 0,
                               nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + out.message);
  }
}

}  // namespace satrefine
