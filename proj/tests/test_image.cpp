#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <png.h>

#include <cmath>
#include <numbers>

#include "satrefine/errors.hpp"
#include "satrefine/image.hpp"
#include "support.hpp"

using namespace satrefine;

namespace {

Sprite random_sprite(Rng& rng, std::size_t w, std::size_t h, std::size_t border = 0) {
  Sprite s(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const bool edge = x < border || y < border || x + border >= w || y + border >= h;
      s.alpha(x, y) = edge ? 0.0f : uniform_f32(rng, 0.2f, 1.0f);
      for (std::size_t c = 0; c < 3; ++c) s.rgb(x, y, c) = uniform_f32(rng, 0.0f, 1.0f);
    }
  return s;
}

// Independent resampler: for each destination pixel centre, rotate back by
// -angle about the canvas centre (y axis pointing down, positive angles turn
// +x towards +y) and blend the four surrounding source texels.
Sprite oracle_rotate(const Sprite& src, double degrees, std::size_t out_w, std::size_t out_h) {
  const double t = -degrees * std::numbers::pi / 180.0;
  Sprite out(out_w, out_h);
  auto texel = [&](long x, long y, int c) -> double {
    if (x < 0 || y < 0 || x >= static_cast<long>(src.width()) ||
        y >= static_cast<long>(src.height()))
      return 0.0;
    const double a = src.alpha(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    return c < 0 ? a : a * src.rgb(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c);
  };
  for (std::size_t j = 0; j < out_h; ++j)
    for (std::size_t i = 0; i < out_w; ++i) {
      const double dx = (i + 0.5) - out_w * 0.5;
      const double dy = (j + 0.5) - out_h * 0.5;
      const double sx = std::cos(t) * dx - std::sin(t) * dy + src.width() * 0.5 - 0.5;
      const double sy = std::sin(t) * dx + std::cos(t) * dy + src.height() * 0.5 - 0.5;
      const long x0 = static_cast<long>(std::floor(sx));
      const long y0 = static_cast<long>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      double v[4];
      for (int c = -1; c < 3; ++c)
        v[c + 1] = (1 - fx) * (1 - fy) * texel(x0, y0, c) + fx * (1 - fy) * texel(x0 + 1, y0, c) +
                   (1 - fx) * fy * texel(x0, y0 + 1, c) + fx * fy * texel(x0 + 1, y0 + 1, c);
      out.alpha(i, j) = static_cast<float>(v[0]);
      for (int c = 0; c < 3; ++c)
        out.rgb(i, j, static_cast<std::size_t>(c)) =
            static_cast<float>(v[0] > 1e-12 ? v[c + 1] / v[0] : 0.0);
    }
  return out;
}

void write_rgba(const std::filesystem::path& p, std::size_t w, std::size_t h,
                const std::vector<unsigned char>& rgba) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGBA;
  REQUIRE(png_image_write_to_file(&img, p.c_str(), 0, rgba.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("ImagePatch validates its invariants") {
  CHECK_THROWS_AS(ImagePatch(0, 3, 3), ShapeError);
  CHECK_THROWS_AS(ImagePatch(2, 2, 2), UnsupportedFormatError);
  CHECK_THROWS_AS(ImagePatch(1, 1, 1, std::vector<float>{1.5f}), ContractError);
  CHECK_THROWS_AS(ImagePatch(2, 1, 1, std::vector<float>{0.5f}), ShapeError);
  const ImagePatch p(2, 1, 3, std::vector<float>{0, 0.1f, 0.2f, 0.3f, 0.4f, 0.5f});
  CHECK(p.at(1, 0, 2) == 0.5f);
}

TEST_CASE("key_alpha") {
  const Rgb white{1, 1, 1};
  SUBCASE("uniform key colour becomes transparent") {
    const Sprite s = key_alpha(ImagePatch(3, 2, 3, 1.0f), white, 0.0f);
    for (float a : s.alpha_data()) CHECK(a == 0.0f);
  }
  SUBCASE("nothing near the key stays opaque") {
    const Sprite s = key_alpha(ImagePatch(3, 2, 3, 0.25f), white, 0.0f);
    for (float a : s.alpha_data()) CHECK(a == 1.0f);
  }
  SUBCASE("two pixel example") {
    const ImagePatch img(2, 1, 3, std::vector<float>{1, 1, 1, 0, 0, 0});
    const Sprite s = key_alpha(img, white, 0.1f);
    CHECK(s.alpha(0, 0) == 0.0f);
    CHECK(s.alpha(1, 0) == 1.0f);
    CHECK(s.rgb(0, 0, 1) == 1.0f);
    CHECK(s.rgb(1, 0, 1) == 0.0f);
  }
  SUBCASE("distance boundary is inclusive") {
    const ImagePatch img(1, 1, 3, std::vector<float>{0.5f, 1, 1});
    CHECK(key_alpha(img, white, 0.5f).alpha(0, 0) == 0.0f);
    CHECK(key_alpha(img, white, 0.49f).alpha(0, 0) == 1.0f);
  }
  SUBCASE("single channel is unsupported") {
    CHECK_THROWS_AS(key_alpha(ImagePatch(2, 2, 1), white, 0.1f), UnsupportedFormatError);
  }
  SUBCASE("negative tolerance") {
    CHECK_THROWS_AS(key_alpha(ImagePatch(2, 2, 3), white, -0.1f), ContractError);
  }
}

TEST_CASE("rotate_sprite quarter turns") {
  Sprite row(2, 1);
  row.rgb(0, 0, 0) = 0.25f;  // a
  row.rgb(1, 0, 0) = 0.75f;  // b
  row.alpha(0, 0) = 1.0f;
  row.alpha(1, 0) = 0.5f;

  CHECK(rotate_sprite(row, 0.0) == row);
  CHECK(rotate_sprite(row, 360.0) == row);

  const Sprite col = rotate_sprite(row, 90.0);
  REQUIRE(col.width() == 1);
  REQUIRE(col.height() == 2);
  CHECK(col.rgb(0, 0, 0) == 0.25f);
  CHECK(col.rgb(0, 1, 0) == 0.75f);
  CHECK(col.alpha(0, 1) == 0.5f);

  const Sprite flipped = rotate_sprite(row, 180.0);
  CHECK(flipped.rgb(0, 0, 0) == 0.75f);
  CHECK(rotate_sprite(row, -90.0) == rotate_sprite(row, 270.0));

  Rng rng = derive_rng(5, 0);
  const Sprite s = random_sprite(rng, 5, 3);
  Sprite r = s;
  for (int i = 0; i < 4; ++i) r = rotate_sprite(r, 90.0);
  CHECK(r == s);

  Sprite dot(1, 1);
  dot.alpha(0, 0) = 0.3f;
  CHECK(rotate_sprite(dot, 33.0) == dot);
  CHECK_THROWS_AS(rotate_sprite(s, std::nan("")), ContractError);
}

TEST_CASE("rotate_sprite matches the brute-force oracle") {
  Sprite onehot(3, 3);
  onehot.alpha(1, 0) = 1.0f;
  onehot.rgb(1, 0, 0) = 1.0f;
  onehot.rgb(1, 0, 2) = 0.5f;
  Rng rng = derive_rng(6, 0);
  const Sprite noisy = random_sprite(rng, 6, 4);

  for (const Sprite* s : {static_cast<const Sprite*>(&onehot), &noisy})
    for (double angle : {45.0, 30.0, -17.5, 123.0, 300.0}) {
      CAPTURE(angle);
      const Sprite got = rotate_sprite(*s, angle);
      const auto ext = rotated_extent(s->width(), s->height(), angle);
      REQUIRE(got.width() == ext[0]);
      REQUIRE(got.height() == ext[1]);
      const Sprite want = oracle_rotate(*s, angle, ext[0], ext[1]);
      for (std::size_t y = 0; y < got.height(); ++y)
        for (std::size_t x = 0; x < got.width(); ++x) {
          CHECK(std::abs(got.alpha(x, y) - want.alpha(x, y)) < 1e-6);
          if (want.alpha(x, y) > 1e-4)
            for (std::size_t c = 0; c < 3; ++c)
              CHECK(std::abs(got.rgb(x, y, c) - want.rgb(x, y, c)) < 1e-5);
        }
    }
  // The interpolating path agrees with the exact permutation near 90°.
  const Sprite exact = rotate_sprite(noisy, 90.0);
  const Sprite near = rotate_sprite(noisy, 90.0 + 1e-9);
  REQUIRE(exact.width() == near.width());
  for (std::size_t i = 0; i < exact.alpha_data().size(); ++i)
    CHECK(std::abs(exact.alpha_data()[i] - near.alpha_data()[i]) < 1e-5);
}

TEST_CASE("rotated_extent") {
  CHECK(rotated_extent(4, 2, 0.0) == std::array<std::size_t, 2>{4, 2});
  CHECK(rotated_extent(4, 2, 90.0) == std::array<std::size_t, 2>{2, 4});
  // 4·cos45 + 4·sin45 = 5.657 → 6.
  CHECK(rotated_extent(4, 4, 45.0) == std::array<std::size_t, 2>{6, 6});
}

// Bilinear resampling is not exactly mass preserving; on small or thin
// sprites the error exceeds 1% (a 12×9 textured sprite reaches ~3%), so
// this checks sprite-sized inputs.
TEST_CASE("rotation approximately conserves alpha mass on padded sprites") {
  Rng rng = derive_rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Sprite s = random_sprite(rng, 28, 24, 2);
    const double angle = uniform(rng, -360.0, 360.0);
    CAPTURE(angle);
    const double before = s.alpha_mass();
    const double after = rotate_sprite(s, angle).alpha_mass();
    CHECK(std::abs(after - before) <= 0.01 * before);
  }
}

TEST_CASE("composite") {
  Rng rng = derive_rng(8, 0);
  std::vector<float> px(5 * 4 * 3);
  for (float& v : px) v = uniform_f32(rng, 0.0f, 1.0f);
  const ImagePatch bg(5, 4, 3, px);

  SUBCASE("transparent sprite is the identity") {
    Sprite s = random_sprite(rng, 3, 2);
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 3; ++x) s.alpha(x, y) = 0.0f;
    CHECK(composite(bg, s, {1, 1, 0.0}) == bg);
    CHECK(composite(bg, s, {0, 0, 37.0}) == bg);
  }
  SUBCASE("opaque sprite replaces the covered region only") {
    Sprite s = random_sprite(rng, 2, 2);
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) s.alpha(x, y) = 1.0f;
    const ImagePatch out = composite(bg, s, {2, 1, 0.0});
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 5; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          const bool covered = x >= 2 && x < 4 && y >= 1 && y < 3;
          CHECK(out.at(x, y, c) == (covered ? s.rgb(x - 2, y - 1, c) : bg.at(x, y, c)));
        }
  }
  SUBCASE("half blend of one pixel") {
    const ImagePatch one(1, 1, 3, 0.2f);
    Sprite s(1, 1);
    for (std::size_t c = 0; c < 3; ++c) s.rgb(0, 0, c) = 0.8f;
    s.alpha(0, 0) = 0.5f;
    CHECK(composite(one, s, {0, 0, 0.0}).at(0, 0, 1) == doctest::Approx(0.5));
  }
  SUBCASE("grayscale backgrounds take the luma of the sprite") {
    const ImagePatch gray(2, 2, 1, 0.0f);
    Sprite s(1, 1);
    s.rgb(0, 0, 0) = 1.0f;
    s.alpha(0, 0) = 1.0f;
    const ImagePatch out = composite(gray, s, {1, 0, 0.0});
    CHECK(out.channels() == 1);
    CHECK(out.at(1, 0, 0) == doctest::Approx(0.299));
  }
  SUBCASE("out of bounds") {
    const Sprite s = random_sprite(rng, 3, 2);
    CHECK_THROWS_AS(composite(bg, s, {3, 0, 0.0}), PlacementError);
    CHECK_THROWS_AS(composite(bg, s, {-1, 0, 0.0}), PlacementError);
    CHECK_NOTHROW(composite(bg, s, {0, 0, 90.0}));
    CHECK_THROWS_AS(composite(bg, Sprite(5, 1), {0, 0, 90.0}), PlacementError);
  }
  SUBCASE("outputs stay in range") {
    for (int t = 0; t < 20; ++t) {
      const Sprite s = random_sprite(rng, 3, 3);
      const auto x = static_cast<std::ptrdiff_t>(uniform_index(rng, 3));
      const auto y = static_cast<std::ptrdiff_t>(uniform_index(rng, 2));
      const ImagePatch out = composite(bg, s, {x, y, 0.0});
      for (float v : out.pixels()) CHECK((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_CASE("enumerate_placements") {
  const ImagePatch bg(10, 10, 3);
  const auto grid = enumerate_placements(bg, Sprite(4, 4));
  CHECK(grid.size() == 49);
  CHECK(grid.front() == PlacementSpec{0, 0, 0.0});
  CHECK(grid[1] == PlacementSpec{1, 0, 0.0});
  CHECK(grid.back() == PlacementSpec{6, 6, 0.0});

  const auto same = enumerate_placements(bg, Sprite(10, 10));
  REQUIRE(same.size() == 1);
  CHECK(same[0] == PlacementSpec{0, 0, 0.0});
  CHECK(enumerate_placements(bg, Sprite(11, 4)).empty());

  // Every enumerated placement composites without error.
  const Sprite s(4, 4);
  for (const auto& p : grid) CHECK_NOTHROW(composite(bg, s, p));
}

TEST_CASE("PNG round trips") {
  testing::TempDir dir("png");
  std::vector<float> px(3 * 2 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(i * 13 % 256) / 255.0f;
  const ImagePatch rgb(3, 2, 3, px);
  write_png(dir / "rgb.png", rgb);
  const ImagePatch back = read_png(dir / "rgb.png");
  REQUIRE(back.same_shape(rgb));
  for (std::size_t i = 0; i < px.size(); ++i) CHECK(back.pixels()[i] == doctest::Approx(px[i]));

  const ImagePatch gray(2, 2, 1, std::vector<float>{0, 1, 0.5f, 0.25f});
  write_png(dir / "gray.png", gray);
  CHECK(read_png(dir / "gray.png", true).channels() == 1);
  CHECK(read_png(dir / "gray.png").channels() == 3);

  write_rgba(dir / "sprite.png", 2, 1, {255, 0, 0, 128, 0, 255, 0, 255});
  bool has_alpha = false;
  const Sprite s = read_sprite_png(dir / "sprite.png", &has_alpha);
  CHECK(has_alpha);
  CHECK(s.alpha(0, 0) == doctest::Approx(128.0 / 255.0));
  CHECK(s.rgb(1, 0, 1) == 1.0f);

  read_sprite_png(dir / "rgb.png", &has_alpha);
  CHECK_FALSE(has_alpha);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
}
