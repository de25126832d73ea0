#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satrefine/autodiff.hpp"
#include "satrefine/image.hpp"
#include "satrefine/optimizer.hpp"

namespace satrefine {

struct ConvLayer {
  std::string name;
  ad::Tensor weight;  // [out, in, kh, kw]
  ad::Tensor bias;    // [out]
  ad::Conv2dAttrs attrs;
};

struct RefinerConfig {
  std::size_t channels = 3;
  std::size_t width = 16;
  std::size_t blocks = 2;
  double slope = 0.2;
};

struct DiscriminatorConfig {
  std::size_t channels = 3;
  std::size_t width = 16;
  /// Strided 4×4 layers followed by one 3×3 logit layer; must be >= 1.
  std::size_t layers = 3;
  double slope = 0.2;
};

/// Residual refiner: entry conv, `blocks` two-conv residual blocks, exit
/// conv, and a global skip, out = clamp01(x + trunk(x)).
class RefinerNet {
 public:
  /// All parameters zero (an exact identity map).
  explicit RefinerNet(const RefinerConfig& config = {});

  /// Weights and biases uniform in ±1/√fan_in; the exit conv starts at zero.
  static RefinerNet initialize(const RefinerConfig& config, std::uint64_t seed);

  const RefinerConfig& config() const noexcept { return config_; }
  std::vector<ConvLayer>& layers() noexcept { return layers_; }
  const std::vector<ConvLayer>& layers() const noexcept { return layers_; }

  /// Flattened parameters in a fixed order: each layer's weight then bias.
  std::vector<ad::Tensor*> parameters();
  std::vector<std::pair<std::string, const ad::Tensor*>> named_parameters() const;

  /// Adds the parameters to `graph` (as trainable parameters or constants),
  /// in parameters() order.
  std::vector<ad::Var> bind(ad::Graph& graph, bool trainable) const;

  ad::Var forward(ad::Graph& graph, std::span<const ad::Var> params, ad::Var x) const;
  /// Inference on an NCHW batch.
  ad::Tensor forward(const ad::Tensor& x) const;

 private:
  RefinerConfig config_;
  std::vector<ConvLayer> layers_;
};

/// Patch discriminator. The logit map is averaged per image and squashed to
/// the probability that the image is synthetic (refined), not real.
class DiscriminatorNet {
 public:
  explicit DiscriminatorNet(const DiscriminatorConfig& config = {});
  static DiscriminatorNet initialize(const DiscriminatorConfig& config, std::uint64_t seed);

  const DiscriminatorConfig& config() const noexcept { return config_; }
  std::vector<ConvLayer>& layers() noexcept { return layers_; }
  const std::vector<ConvLayer>& layers() const noexcept { return layers_; }

  std::vector<ad::Tensor*> parameters();
  std::vector<std::pair<std::string, const ad::Tensor*>> named_parameters() const;
  std::vector<ad::Var> bind(ad::Graph& graph, bool trainable) const;

  /// [N,1,h,w] logit map.
  ad::Var logits(ad::Graph& graph, std::span<const ad::Var> params, ad::Var x) const;
  /// [N] probability of "synthetic".
  ad::Var forward(ad::Graph& graph, std::span<const ad::Var> params, ad::Var x) const;
  ad::Tensor forward(const ad::Tensor& x) const;

 private:
  DiscriminatorConfig config_;
  std::vector<ConvLayer> layers_;
};

/// Packs HWC patches into an NCHW tensor; all patches must share a shape.
ad::Tensor to_batch(std::span<const ImagePatch> patches);
ad::Tensor to_batch(const ImagePatch& patch);
/// Unpacks an NCHW tensor; values are clamped into [0,1].
std::vector<ImagePatch> from_batch(const ad::Tensor& batch);

// Checkpoints: magic "SRCK", u32 version, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 ndim, u32 dims[ndim], float32 data. All
// integers little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

struct OptimizerState {
  std::size_t step_count = 0;
  std::vector<ad::Tensor> first;
  std::vector<ad::Tensor> second;
};

struct ModelCheckpoint {
  RefinerNet refiner;
  DiscriminatorNet discriminator;
  std::optional<OptimizerState> refiner_optimizer;
  std::optional<OptimizerState> discriminator_optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const RefinerNet& refiner,
                     const DiscriminatorNet& discriminator,
                     const ad::Optimizer* refiner_optimizer = nullptr,
                     const ad::Optimizer* discriminator_optimizer = nullptr);

/// Loads and checks every tensor against the declared architecture.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path,
                                const RefinerConfig& refiner_config,
                                const DiscriminatorConfig& discriminator_config);

}  // namespace satrefine
