#include "satrefine/features.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "satrefine/errors.hpp"
#include "satrefine/image.hpp"
#include "satrefine/parallel.hpp"

namespace satrefine {

namespace {

constexpr std::string_view kMagic = "SRFT";
constexpr std::uint32_t kVersion = 1;

// weights[o] lists (source index, overlap fraction) for output cell o.
std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t in,
                                                                      std::size_t out) {
  std::vector<std::vector<std::pair<std::size_t, double>>> w(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double lo = static_cast<double>(o) * scale;
    const double hi = static_cast<double>(o + 1) * scale;
    for (auto s = static_cast<std::size_t>(std::floor(lo)); s < in && static_cast<double>(s) < hi;
         ++s) {
      const double overlap =
          std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w[o].emplace_back(s, overlap / scale);
    }
  }
  return w;
}

}  // namespace

const char* source_name(FeatureSource source) {
  return source == FeatureSource::fallback ? "fallback" : "external-fc6";
}

std::vector<std::uint8_t> encode_feat(const SampleMatrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw ContractError("SRFT: matrix too large");
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (float v : m.data()) w.f32(v);
  return w.buffer();
}

SampleMatrix decode_feat(std::span<const std::uint8_t> bytes) {
  auto truncated = [] {
    throw FeatFileError(FeatFileError::Kind::truncated, "SRFT: file truncated");
  };
  detail::ByteReader r(bytes, truncated);
  if (r.bytes(4) != kMagic) throw FeatFileError(FeatFileError::Kind::bad_magic, "SRFT: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FeatFileError(FeatFileError::Kind::bad_version,
                        "SRFT: unsupported version " + std::to_string(version));
  const std::size_t n = r.u32();
  const std::size_t d = r.u32();
  if (r.remaining() != 4 * n * d)
    throw FeatFileError(FeatFileError::Kind::truncated,
                        "SRFT: payload is " + std::to_string(r.remaining()) + " bytes, header says " +
                            std::to_string(4 * n * d));
  std::vector<float> data(n * d);
  for (float& v : data) v = r.f32();
  return SampleMatrix(n, d, std::move(data));
}

void write_feat(const std::filesystem::path& path, const FeatureSet& set) {
  detail::write_file(path, encode_feat(set.matrix));
}

FeatureSet read_feat(const std::filesystem::path& path, std::string role) {
  return {std::move(role), decode_feat(detail::read_file(path)), FeatureSource::external_fc6};
}

std::vector<double> area_resize(std::span<const double> plane, std::size_t w, std::size_t h,
                                std::size_t out_w, std::size_t out_h) {
  if (plane.size() != w * h || w == 0 || h == 0 || out_w == 0 || out_h == 0)
    throw ContractError("area_resize: bad extent");
  const auto wx = area_weights(w, out_w);
  const auto wy = area_weights(h, out_h);
  std::vector<double> out(out_w * out_h, 0.0);
  for (std::size_t oy = 0; oy < out_h; ++oy)
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (const auto& [sy, fy] : wy[oy])
        for (const auto& [sx, fx] : wx[ox]) acc += fy * fx * plane[sy * w + sx];
      out[oy * out_w + ox] = acc;
    }
  return out;
}

FeatureSet fallback_extract(const SampleSet& images) {
  images.validate();
  const std::size_t n = images.patches.size();
  constexpr std::size_t d = kFallbackSide * kFallbackSide;
  SampleMatrix m(n, d);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ImagePatch& p = images.patches[i];
      std::vector<double> gray(p.width() * p.height());
      for (std::size_t y = 0; y < p.height(); ++y)
        for (std::size_t x = 0; x < p.width(); ++x)
          gray[y * p.width() + x] =
              p.channels() == 1
                  ? p.at(x, y, 0)
                  : 0.299 * p.at(x, y, 0) + 0.587 * p.at(x, y, 1) + 0.114 * p.at(x, y, 2);
      const auto small = area_resize(gray, p.width(), p.height(), kFallbackSide, kFallbackSide);
      double mean = 0.0;
      for (double v : small) mean += v;
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (double v : small) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(d));
      auto row = m.row(i);
      for (std::size_t k = 0; k < d; ++k)
        row[k] = sd < 1e-8 ? 0.0f : static_cast<float>((small[k] - mean) / sd);
    }
  });
  return {role_name(images.role), std::move(m), FeatureSource::fallback};
}

}  // namespace satrefine
