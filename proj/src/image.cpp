#include "satrefine/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "satrefine/errors.hpp"

namespace satrefine {

namespace {

bool in_unit_range(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

// Normalised angle in [0, 360).
double wrap_degrees(double angle) {
  double a = std::fmod(angle, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

// 0..3 for exact quarter turns, -1 otherwise.
int quarter_turns(double angle) {
  const double a = wrap_degrees(angle);
  if (a == 0.0) return 0;
  if (a == 90.0) return 1;
  if (a == 180.0) return 2;
  if (a == 270.0) return 3;
  return -1;
}

Sprite rotate_quarter(const Sprite& s, int turns) {
  const std::size_t w = s.width();
  const std::size_t h = s.height();
  const bool swap = turns % 2 == 1;
  Sprite out(swap ? h : w, swap ? w : h);
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) {
      std::size_t sx = 0;
      std::size_t sy = 0;
      switch (turns) {
        case 0: sx = x; sy = y; break;
        case 1: sx = y; sy = h - 1 - x; break;
        case 2: sx = w - 1 - x; sy = h - 1 - y; break;
        default: sx = w - 1 - y; sy = x; break;
      }
      for (std::size_t c = 0; c < 3; ++c) out.rgb(x, y, c) = s.rgb(sx, sy, c);
      out.alpha(x, y) = s.alpha(sx, sy);
    }
  }
  return out;
}

}  // namespace

ImagePatch::ImagePatch(std::size_t width, std::size_t height,
                       std::size_t channels, float fill)
    : ImagePatch(width, height, channels,
                 std::vector<float>(width * height * channels, fill)) {}

ImagePatch::ImagePatch(std::size_t width, std::size_t height,
                       std::size_t channels, std::vector<float> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) throw ShapeError("ImagePatch: empty extent");
  if (channels != 1 && channels != 3)
    throw UnsupportedFormatError("ImagePatch: channels must be 1 or 3");
  if (pixels_.size() != width * height * channels)
    throw ShapeError("ImagePatch: pixel count does not match extent");
  if (!in_unit_range(pixels_))
    throw ContractError("ImagePatch: pixel values must lie in [0,1]");
}

Sprite::Sprite(std::size_t width, std::size_t height)
    : width_(width),
      height_(height),
      rgb_(width * height * 3, 0.0f),
      alpha_(width * height, 0.0f) {
  if (width == 0 || height == 0) throw ShapeError("Sprite: empty extent");
}

Sprite::Sprite(std::size_t width, std::size_t height, std::vector<float> rgb,
               std::vector<float> alpha)
    : width_(width), height_(height), rgb_(std::move(rgb)), alpha_(std::move(alpha)) {
  if (width == 0 || height == 0) throw ShapeError("Sprite: empty extent");
  if (rgb_.size() != width * height * 3 || alpha_.size() != width * height)
    throw ShapeError("Sprite: rgb/alpha sizes do not match extent");
  if (!in_unit_range(rgb_) || !in_unit_range(alpha_))
    throw ContractError("Sprite: values must lie in [0,1]");
}

double Sprite::alpha_mass() const noexcept {
  double total = 0.0;
  for (float a : alpha_) total += a;
  return total;
}

Sprite key_alpha(const ImagePatch& image, const Rgb& key_color, float tolerance) {
  if (image.channels() != 3)
    throw UnsupportedFormatError("key_alpha: image must have 3 channels");
  if (!(tolerance >= 0.0f)) throw ContractError("key_alpha: tolerance must be >= 0");

  Sprite out(image.width(), image.height());
  const double tol2 = static_cast<double>(tolerance) * tolerance;
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = image.at(x, y, c);
        out.rgb(x, y, c) = v;
        const double diff = static_cast<double>(v) - key_color[c];
        d2 += diff * diff;
      }
      out.alpha(x, y) = d2 <= tol2 ? 0.0f : 1.0f;
    }
  }
  return out;
}

std::array<std::size_t, 2> rotated_extent(std::size_t width, std::size_t height,
                                          double angle_degrees) {
  const int turns = quarter_turns(angle_degrees);
  if (turns >= 0) {
    return turns % 2 == 1 ? std::array{height, width} : std::array{width, height};
  }
  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double c = std::abs(std::cos(rad));
  const double s = std::abs(std::sin(rad));
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  const auto fit = [](double v) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-9)));
  };
  return {fit(w * c + h * s), fit(w * s + h * c)};
}

Sprite rotate_sprite(const Sprite& sprite, double angle_degrees) {
  if (!std::isfinite(angle_degrees))
    throw ContractError("rotate_sprite: angle must be finite");
  if (sprite.width() == 1 && sprite.height() == 1) return sprite;

  const int turns = quarter_turns(angle_degrees);
  if (turns >= 0) return rotate_quarter(sprite, turns);

  const auto [out_w, out_h] =
      rotated_extent(sprite.width(), sprite.height(), angle_degrees);
  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double src_cx = sprite.width() / 2.0;
  const double src_cy = sprite.height() / 2.0;
  const double dst_cx = out_w / 2.0;
  const double dst_cy = out_h / 2.0;
  const auto sw = static_cast<std::ptrdiff_t>(sprite.width());
  const auto sh = static_cast<std::ptrdiff_t>(sprite.height());

  Sprite out(out_w, out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const double px = x + 0.5 - dst_cx;
      const double py = y + 0.5 - dst_cy;
      // Inverse rotation back into source pixel-centre coordinates.
      const double u = cs * px + sn * py + src_cx - 0.5;
      const double v = -sn * px + cs * py + src_cy - 0.5;
      const double fu = std::floor(u);
      const double fv = std::floor(v);
      const auto x0 = static_cast<std::ptrdiff_t>(fu);
      const auto y0 = static_cast<std::ptrdiff_t>(fv);
      const double tx = u - fu;
      const double ty = v - fv;

      double alpha = 0.0;
      double prem[3] = {0.0, 0.0, 0.0};
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::ptrdiff_t sx = x0 + dx;
          const std::ptrdiff_t sy = y0 + dy;
          if (sx < 0 || sy < 0 || sx >= sw || sy >= sh) continue;
          const double wgt = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty);
          const auto ux = static_cast<std::size_t>(sx);
          const auto uy = static_cast<std::size_t>(sy);
          const double a = sprite.alpha(ux, uy);
          alpha += wgt * a;
          for (std::size_t c = 0; c < 3; ++c) prem[c] += wgt * a * sprite.rgb(ux, uy, c);
        }
      }
      out.alpha(x, y) = static_cast<float>(std::clamp(alpha, 0.0, 1.0));
      for (std::size_t c = 0; c < 3; ++c) {
        const double straight = alpha > 1e-12 ? prem[c] / alpha : 0.0;
        out.rgb(x, y, c) = static_cast<float>(std::clamp(straight, 0.0, 1.0));
      }
    }
  }
  return out;
}

ImagePatch composite(const ImagePatch& background, const Sprite& sprite,
                     const PlacementSpec& placement) {
  const Sprite placed = quarter_turns(placement.angle) == 0
                            ? sprite
                            : rotate_sprite(sprite, placement.angle);
  const auto bw = static_cast<std::ptrdiff_t>(background.width());
  const auto bh = static_cast<std::ptrdiff_t>(background.height());
  const auto pw = static_cast<std::ptrdiff_t>(placed.width());
  const auto ph = static_cast<std::ptrdiff_t>(placed.height());
  if (placement.x < 0 || placement.y < 0 || placement.x + pw > bw ||
      placement.y + ph > bh) {
    throw PlacementError("composite: placement (" + std::to_string(placement.x) +
                         "," + std::to_string(placement.y) +
                         ") puts the sprite outside the background");
  }

  ImagePatch out = background;
  const std::size_t ox = static_cast<std::size_t>(placement.x);
  const std::size_t oy = static_cast<std::size_t>(placement.y);
  for (std::size_t y = 0; y < placed.height(); ++y) {
    for (std::size_t x = 0; x < placed.width(); ++x) {
      const float a = placed.alpha(x, y);
      if (out.channels() == 3) {
        for (std::size_t c = 0; c < 3; ++c) {
          float& dst = out.at(ox + x, oy + y, c);
          dst = std::clamp(a * placed.rgb(x, y, c) + (1.0f - a) * dst, 0.0f, 1.0f);
        }
      } else {
        float& dst = out.at(ox + x, oy + y, 0);
        const float g = luma(placed.rgb(x, y, 0), placed.rgb(x, y, 1), placed.rgb(x, y, 2));
        dst = std::clamp(a * g + (1.0f - a) * dst, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

std::vector<PlacementSpec> enumerate_placements(const ImagePatch& background,
                                                const Sprite& sprite) {
  std::vector<PlacementSpec> out;
  if (sprite.width() > background.width() || sprite.height() > background.height())
    return out;
  const std::size_t nx = background.width() - sprite.width() + 1;
  const std::size_t ny = background.height() - sprite.height() + 1;
  out.reserve(nx * ny);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x)
      out.push_back({static_cast<std::ptrdiff_t>(x), static_cast<std::ptrdiff_t>(y), 0.0});
  return out;
}

}  // namespace satrefine
