#pragma once

// Seeded two-domain toy data. Source: an antialiased bright ellipse on a
// flat, slightly tinted background. Target: the same kind of object on a
// background with a left-to-right brightness ramp and Gaussian texture.

#include <cstddef>
#include <cstdint>

#include "satrefine/trainer.hpp"

namespace satrefine {

struct ToySpec {
  std::size_t source_count = 500;
  std::size_t target_count = 500;
  std::size_t patch_size = 32;
  std::uint64_t seed = 0;
  double ramp_min = 0.25;
  double ramp_max = 0.4;
  double texture_std = 0.05;

  void validate() const;
};

struct ToyData {
  SampleSet source;  // role X
  SampleSet target;  // role Y
};

ToyData generate_toy(const ToySpec& spec);

}  // namespace satrefine
