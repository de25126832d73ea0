#pragma once

// Exact (O(n²) per iteration) t-SNE.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "satrefine/sample_matrix.hpp"

namespace satrefine::tsne {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t out_dims = 2;
  std::size_t iterations = 1000;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
  /// Project onto this many principal components first; 0 disables.
  std::size_t pca_dims = 0;
};

struct Calibration {
  std::size_t n = 0;
  std::vector<double> conditional;  // n×n row-stochastic, zero diagonal
  std::vector<double> beta;         // precision 1/(2s²) per row
  std::vector<double> perplexity;   // achieved 2^H per row
};

/// Per-row search on the Gaussian precision so that 2^H(P_i) matches the
/// target within 1e-5 (at most 64 evaluations per row).
Calibration perplexity_calibrate(std::span<const double> sq_dists, std::size_t n,
                                 double perplexity);

/// Joint p_ij = (p_j|i + p_i|j) / 2n.
std::vector<double> symmetrize(const Calibration& calibration);

/// KL(P‖Q) for embedding `y` (n×dims, row-major) under the Student-t kernel.
double kl_divergence(std::span<const double> p, std::span<const double> y, std::size_t n,
                     std::size_t dims);

/// ∂KL/∂y.
std::vector<double> kl_gradient(std::span<const double> p, std::span<const double> y,
                                std::size_t n, std::size_t dims);

struct Embedding {
  std::size_t dims = 2;
  std::vector<double> points;  // n×dims
  std::vector<std::string> labels;
  std::vector<double> kl_history;  // before each iteration's update
  double kl_final = 0.0;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Embeds `features`; `labels` tags each row. `initial` (n×out_dims)
/// replaces the seeded Gaussian start when given.
Embedding tsne_run(const SampleMatrix& features, std::vector<std::string> labels,
                   const TsneConfig& config,
                   std::optional<std::vector<double>> initial = std::nullopt);

/// Squared Euclidean distances between all rows.
std::vector<double> pairwise_sq_dists(const SampleMatrix& features);

/// Projects rows onto the top `k` principal components.
SampleMatrix pca_project(const SampleMatrix& features, std::size_t k);

using LabelMean = std::pair<std::string, std::array<double, 2>>;

/// Mean embedded point per label, in order of first appearance.
std::vector<LabelMean> set_means(const Embedding& embedding);
/// Means for exactly `required` (in that order); throws if one is absent.
std::vector<LabelMean> set_means(const Embedding& embedding,
                                 std::span<const std::string> required);

}  // namespace satrefine::tsne
