#include "satrefine/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "satrefine/errors.hpp"
#include "satrefine/random.hpp"

namespace satrefine {

namespace {

constexpr int kSupersample = 4;

ImagePatch make_patch(Rng& rng, const ToySpec& spec, bool target) {
  const std::size_t s = spec.patch_size;
  const double scale = static_cast<double>(s) / 32.0;
  std::vector<double> img(s * s * 3);

  const double level = uniform(rng, 0.3, 0.5);
  double tint[3];
  for (double& t : tint) t = uniform(rng, -0.03, 0.03);
  for (std::size_t i = 0; i < s * s; ++i)
    for (int c = 0; c < 3; ++c) img[i * 3 + c] = level + tint[c];

  if (target) {
    const double ramp = uniform(rng, spec.ramp_min, spec.ramp_max);
    const double denom = s > 1 ? static_cast<double>(s - 1) : 1.0;
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        const double v = ramp * (static_cast<double>(x) / denom - 0.5) +
                         spec.texture_std * normal(rng);
        for (int c = 0; c < 3; ++c) img[(y * s + x) * 3 + c] += v;
      }
  }

  const double half = static_cast<double>(s) / 2.0;
  const double cx = half + scale * uniform(rng, -3.0, 3.0);
  const double cy = half + scale * uniform(rng, -3.0, 3.0);
  const double a = scale * uniform(rng, 5.0, 9.0);
  const double b = scale * uniform(rng, 3.0, 6.0);
  const double theta = uniform(rng, 0.0, std::numbers::pi);
  const double bright = uniform(rng, 0.2, 0.35);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSupersample; ++sy)
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double px = static_cast<double>(x) + (sx + 0.5) / kSupersample - cx;
          const double py = static_cast<double>(y) + (sy + 0.5) / kSupersample - cy;
          const double u = (px * ct + py * st) / a;
          const double v = (-px * st + py * ct) / b;
          if (u * u + v * v <= 1.0) ++inside;
        }
      const double cover = static_cast<double>(inside) / (kSupersample * kSupersample);
      for (int c = 0; c < 3; ++c) img[(y * s + x) * 3 + c] += cover * bright;
    }

  std::vector<float> px(img.size());
  std::transform(img.begin(), img.end(), px.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return ImagePatch(s, s, 3, std::move(px));
}

}  // namespace

void ToySpec::validate() const {
  if (patch_size < 8) throw ContractError("toy: patch size must be >= 8");
  if (!(ramp_min <= ramp_max)) throw ContractError("toy: ramp range is inverted");
  if (!(texture_std >= 0.0)) throw ContractError("toy: texture std must be >= 0");
}

ToyData generate_toy(const ToySpec& spec) {
  spec.validate();
  ToyData out{{SampleRole::synthetic, {}}, {SampleRole::real, {}}};
  Rng src = derive_rng(spec.seed, 0x5A);
  Rng tgt = derive_rng(spec.seed, 0x5B);
  for (std::size_t i = 0; i < spec.source_count; ++i)
    out.source.patches.push_back(make_patch(src, spec, false));
  for (std::size_t i = 0; i < spec.target_count; ++i)
    out.target.patches.push_back(make_patch(tgt, spec, true));
  return out;
}

}  // namespace satrefine
