#include "satrefine/optimizer.hpp"

#include <cmath>
#include <string>

#include "satrefine/errors.hpp"

namespace satrefine::ad {

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0))
    throw ContractError("optimizer: learning rate must be > 0");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0))
    throw ContractError("optimizer: betas must lie in [0,1)");
  if (!(config_.epsilon > 0.0)) throw ContractError("optimizer: epsilon must be > 0");
}

void Optimizer::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size())
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("optimizer: gradient " + to_string(grads[i].shape()) +
                       " does not match parameter " + to_string(params[i]->shape()));
    if (!grads[i].all_finite())
      throw DivergenceError("optimizer: non-finite gradient for parameter " + std::to_string(i),
                            step_count_ + 1);
  }

  ++step_count_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i]->data();
      const auto g = grads[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] = to_f32(p[j] - lr * g[j]);
    }
    return;
  }

  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape(), 0.0);
      v_.emplace_back(p->shape(), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("optimizer: parameter list changed between steps");
  }

  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = to_f32(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = to_f32(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] = to_f32(p[j] - lr * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

void Optimizer::restore(std::size_t step_count, std::vector<Tensor> first,
                        std::vector<Tensor> second) {
  if (first.size() != second.size())
    throw ShapeError("optimizer: moment lists differ in length");
  for (std::size_t i = 0; i < first.size(); ++i)
    if (first[i].shape() != second[i].shape())
      throw ShapeError("optimizer: moment shapes differ");
  step_count_ = step_count;
  m_ = std::move(first);
  v_ = std::move(second);
}

}  // namespace satrefine::ad
