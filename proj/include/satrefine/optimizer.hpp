#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "satrefine/autodiff.hpp"

namespace satrefine::ad {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or bias-corrected Adam over a fixed, ordered list of parameters.
///
/// Parameters and moment estimates are rounded to float32 after every
/// update, so the values a checkpoint stores are exactly the values in use.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {});

  /// Throws DivergenceError on a non-finite gradient (parameters untouched),
  /// ShapeError if a gradient does not match its parameter.
  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::size_t step_count() const noexcept { return step_count_; }

  // Adam state, one entry per parameter once the first step has run.
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

  /// Reinstates state previously read from first_moments()/second_moments().
  void restore(std::size_t step_count, std::vector<Tensor> first,
               std::vector<Tensor> second);

 private:
  OptimizerConfig config_;
  std::size_t step_count_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace satrefine::ad
