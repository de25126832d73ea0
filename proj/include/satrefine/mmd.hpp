#pragma once

// Mixture-RBF kernels and unbiased estimators of the squared maximum mean
// discrepancy between two samples.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "satrefine/sample_matrix.hpp"

namespace satrefine {

struct KernelSpec {
  std::vector<double> sigmas;

  /// Throws ContractError if empty or any σ is not a positive finite value.
  void validate() const;
};

/// 16 bandwidths log-uniformly spaced over [1e-6, 1e6], endpoints included.
KernelSpec default_kernel_spec();

/// exp(-‖x-y‖² / (2σ²)).
double rbf_kernel(std::span<const double> x, std::span<const double> y, double sigma);

/// Sum of rbf_kernel over every σ in `spec`.
double mixture_kernel(std::span<const double> x, std::span<const double> y,
                      const KernelSpec& spec);

enum class Estimator { quadratic_unbiased, linear_unbiased };

const char* estimator_name(Estimator e);

struct MMDEstimate {
  Estimator kind = Estimator::linear_unbiased;
  double mmd2 = 0.0;  // unbiased, may be negative
  double mmd = 0.0;   // sqrt(max(0, mmd2))
  double std_error = 0.0;
  std::size_t pairs_used = 0;
  KernelSpec kernel;
};

/// O((n+m)²) U-statistic. The standard error is the two-sample
/// delete-one jackknife; a set with fewer than 3 rows contributes nothing to
/// it. Requires n, m ≥ 2.
MMDEstimate mmd2_quadratic_unbiased(const SampleMatrix& x, const SampleMatrix& y,
                                    const KernelSpec& spec);

/// O(n) estimate over consecutive disjoint pairs of the leading
/// t = 2⌊min(n,m)/2⌋ rows of each set, in the given order.
MMDEstimate mmd2_linear(const SampleMatrix& x, const SampleMatrix& y, const KernelSpec& spec);

}  // namespace satrefine
