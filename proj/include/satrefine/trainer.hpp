#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "satrefine/autodiff.hpp"
#include "satrefine/image.hpp"
#include "satrefine/nets.hpp"
#include "satrefine/optimizer.hpp"
#include "satrefine/random.hpp"

namespace satrefine {

enum class SampleRole { synthetic, refined, real, real_subsample };

const char* role_name(SampleRole role);

/// A set of same-shaped image patches playing one role in the pipeline.
struct SampleSet {
  SampleRole role = SampleRole::synthetic;
  std::vector<ImagePatch> patches;

  std::size_t size() const noexcept { return patches.size(); }
  /// Throws unless non-empty and uniformly shaped.
  void validate() const;
};

struct TrainConfig {
  double lambda = 40.0;
  std::size_t batch_size = 1;
  std::size_t max_steps = 1000;
  ad::OptimizerConfig refiner_optimizer;
  ad::OptimizerConfig discriminator_optimizer;
  std::uint64_t seed = 0;
  /// Pool of past refined images shown to the discriminator; 0 disables it.
  std::size_t history_buffer_size = 0;
  std::size_t log_every = 1;
  /// Identity term as the raw L1 sum instead of the per-pixel mean.
  bool l1_sum = false;
  std::size_t refiner_updates = 1;
  std::size_t discriminator_updates = 1;
  RefinerConfig refiner;
  DiscriminatorConfig discriminator;

  void validate() const;
};

struct LossRecord {
  std::size_t step = 0;
  double refiner_loss = 0.0;
  double refiner_adversarial = 0.0;
  double refiner_identity = 0.0;
  double discriminator_loss = 0.0;
  double d_fake_mean = 0.0;
  double d_real_mean = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct TrainState {
  std::size_t step = 0;
  LossRecord last;
  Rng rng;
  std::vector<ImagePatch> history;
};

struct TrainResult {
  RefinerNet refiner;
  DiscriminatorNet discriminator;
  ad::Optimizer refiner_optimizer;
  ad::Optimizer discriminator_optimizer;
  std::vector<LossRecord> log;
  TrainState state;
};

struct RefinerLoss {
  double total = 0.0;
  double adversarial = 0.0;
  double identity = 0.0;
};

/// Graph form of the refiner objective:
/// total = -Σ_i log(1 - d_fake_i) + λ·Σ_i mean|refined_i - original_i|
/// (or the plain L1 sum over all pixels when `l1_sum`).
struct RefinerLossVars {
  ad::Var total;
  ad::Var adversarial;
  ad::Var identity;
};
RefinerLossVars refiner_loss(ad::Var d_fake, ad::Var refined, ad::Var original, double lambda,
                             bool l1_sum = false);

/// Graph form of -Σ log(d_fake) - Σ log(1 - d_real).
ad::Var discriminator_loss(ad::Var d_fake, ad::Var d_real);

/// Numeric forms; `refined`/`original` are same-shaped NCHW batches.
RefinerLoss refiner_loss(std::span<const double> d_fake, const ad::Tensor& refined,
                         const ad::Tensor& original, double lambda, bool l1_sum = false);
double discriminator_loss(std::span<const double> d_fake, std::span<const double> d_real);

/// Alternating adversarial training. `on_record` (optional) sees each logged
/// record as it is produced.
TrainResult train(const SampleSet& synthetic, const SampleSet& real, const TrainConfig& config,
                  const std::function<void(const LossRecord&)>& on_record = {});

/// X̂ = {R(x_i)} in input order.
SampleSet refine_dataset(const RefinerNet& refiner, const SampleSet& synthetic,
                         std::size_t chunk = 64);

/// k distinct elements drawn uniformly without replacement.
SampleSet subsample(const SampleSet& real, std::size_t k, std::uint64_t seed);

/// k distinct indices from [0, n) in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

/// One newline-delimited JSON record of the loss log.
std::string to_json_line(const LossRecord& record);

}  // namespace satrefine
