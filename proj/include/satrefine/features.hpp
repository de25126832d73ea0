#pragma once

// Feature sets and the SRFT feature file:
//   "SRFT" | u32 version=1 | u32 n | u32 d | n·d f32, all little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "satrefine/sample_matrix.hpp"
#include "satrefine/trainer.hpp"

namespace satrefine {

enum class FeatureSource { external_fc6, fallback };

const char* source_name(FeatureSource source);

struct FeatureSet {
  std::string role;  // "X", "Xhat", "Y", "Ytilde"
  SampleMatrix matrix;
  FeatureSource source = FeatureSource::external_fc6;
};

std::vector<std::uint8_t> encode_feat(const SampleMatrix& matrix);
SampleMatrix decode_feat(std::span<const std::uint8_t> bytes);

void write_feat(const std::filesystem::path& path, const FeatureSet& set);
/// Role is not stored in the file; the caller supplies it.
FeatureSet read_feat(const std::filesystem::path& path, std::string role = {});

inline constexpr std::size_t kFallbackSide = 16;

/// Area-average resize of a single-channel w×h plane to out_w×out_h.
std::vector<double> area_resize(std::span<const double> plane, std::size_t w, std::size_t h,
                                std::size_t out_w, std::size_t out_h);

/// Grayscale → 16×16 area average → z-normalized 256-vector per image
/// (zero vector when the std is below 1e-8).
FeatureSet fallback_extract(const SampleSet& images);

}  // namespace satrefine
