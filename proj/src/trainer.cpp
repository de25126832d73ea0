#include "satrefine/trainer.hpp"

#include <cmath>
#include <json.hpp>
#include <numeric>

#include "satrefine/errors.hpp"

namespace satrefine {

namespace {

void check_probabilities(const char* who, std::span<const double> p) {
  for (double v : p) {
    if (!std::isfinite(v)) throw LossError(std::string(who) + ": non-finite probability");
    if (v < 0.0 || v > 1.0) throw LossError(std::string(who) + ": probability outside [0,1]");
  }
}

ad::Tensor vector_tensor(std::span<const double> values) {
  return ad::Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

// Per-sample CHW copies so minibatches can be assembled by memcpy.
struct PackedSet {
  ad::Shape sample_shape;  // {C,H,W}
  std::size_t stride = 0;
  std::vector<double> data;

  explicit PackedSet(const SampleSet& set) {
    const ad::Tensor all = to_batch(set.patches);
    sample_shape = {all.dim(1), all.dim(2), all.dim(3)};
    stride = all.dim(1) * all.dim(2) * all.dim(3);
    data.assign(all.data().begin(), all.data().end());
  }

  std::size_t size() const { return data.size() / stride; }

  ad::Tensor gather(std::span<const std::size_t> indices) const {
    ad::Tensor out({indices.size(), sample_shape[0], sample_shape[1], sample_shape[2]});
    for (std::size_t i = 0; i < indices.size(); ++i)
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(indices[i] * stride), stride,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
    return out;
  }
};

std::vector<std::size_t> draw_indices(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = uniform_index(rng, n);
  return idx;
}

std::vector<ad::Tensor> grads_of(const ad::Gradients& grads, std::span<const ad::Var> params) {
  std::vector<ad::Tensor> out;
  out.reserve(params.size());
  for (const ad::Var& p : params) out.push_back(grads[p]);
  return out;
}

double mean_of(const ad::Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc / static_cast<double>(t.numel());
}

// CycleGAN-style image pool: once full, each query returns a stored past
// image with probability 1/2 and stores the current one in its place.
ad::Tensor query_history(std::vector<ad::Tensor>& pool, std::size_t capacity,
                         const ad::Tensor& batch, Rng& rng) {
  const std::size_t n = batch.dim(0);
  const std::size_t stride = batch.numel() / n;
  ad::Tensor out = batch;
  for (std::size_t i = 0; i < n; ++i) {
    const auto begin = batch.data().begin() + static_cast<std::ptrdiff_t>(i * stride);
    ad::Tensor sample({stride}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(stride)));
    if (pool.size() < capacity) {
      pool.push_back(std::move(sample));
      continue;
    }
    if (uniform01(rng) < 0.5) {
      const std::size_t slot = uniform_index(rng, pool.size());
      std::copy(pool[slot].data().begin(), pool[slot].data().end(),
                out.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
      pool[slot] = std::move(sample);
    }
  }
  return out;
}

void step_optimizer(ad::Optimizer& opt, std::vector<ad::Tensor*> params,
                    const std::vector<ad::Tensor>& grads, std::size_t step) {
  try {
    opt.step(params, grads);
  } catch (const DivergenceError& e) {
    throw DivergenceError("training diverged: non-finite gradient", step);
  }
}

}  // namespace

const char* role_name(SampleRole role) {
  switch (role) {
    case SampleRole::synthetic: return "X";
    case SampleRole::refined: return "Xhat";
    case SampleRole::real: return "Y";
    case SampleRole::real_subsample: return "Ytilde";
  }
  return "?";
}

void SampleSet::validate() const {
  if (patches.empty()) throw ContractError(std::string("sample set ") + role_name(role) + " is empty");
  for (const ImagePatch& p : patches)
    if (!p.same_shape(patches.front()))
      throw ShapeError(std::string("sample set ") + role_name(role) + " mixes patch shapes");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("train: lambda must be >= 0");
  if (batch_size < 1) throw ContractError("train: batch size must be >= 1");
  if (max_steps < 1) throw ContractError("train: max steps must be >= 1");
  if (log_every < 1) throw ContractError("train: log_every must be >= 1");
  if (refiner_updates < 1 || discriminator_updates < 1)
    throw ContractError("train: update ratio entries must be >= 1");
}

RefinerLossVars refiner_loss(ad::Var d_fake, ad::Var refined, ad::Var original, double lambda,
                             bool l1_sum) {
  const ad::Var adversarial = ad::mul(ad::sum(ad::log(ad::sub(1.0, d_fake))), -1.0);
  const ad::Var diff = ad::abs(ad::sub(refined, original));
  const ad::Var identity =
      l1_sum ? ad::sum(diff) : ad::sum(ad::mean(diff, ad::Reduce::per_sample));
  return {ad::add(adversarial, ad::mul(identity, lambda)), adversarial, identity};
}

ad::Var discriminator_loss(ad::Var d_fake, ad::Var d_real) {
  const ad::Var fake_term = ad::sum(ad::log(d_fake));
  const ad::Var real_term = ad::sum(ad::log(ad::sub(1.0, d_real)));
  return ad::mul(ad::add(fake_term, real_term), -1.0);
}

RefinerLoss refiner_loss(std::span<const double> d_fake, const ad::Tensor& refined,
                         const ad::Tensor& original, double lambda, bool l1_sum) {
  check_probabilities("refiner_loss", d_fake);
  if (!refined.all_finite() || !original.all_finite())
    throw LossError("refiner_loss: non-finite image values");
  if (!std::isfinite(lambda)) throw LossError("refiner_loss: non-finite lambda");
  if (refined.shape() != original.shape())
    throw ShapeError("refiner_loss: refined " + ad::to_string(refined.shape()) +
                     " vs original " + ad::to_string(original.shape()));
  ad::Graph g;
  const auto vars = refiner_loss(g.constant(vector_tensor(d_fake)), g.constant(refined),
                                 g.constant(original), lambda, l1_sum);
  return {vars.total.value().item(), vars.adversarial.value().item(),
          vars.identity.value().item()};
}

double discriminator_loss(std::span<const double> d_fake, std::span<const double> d_real) {
  check_probabilities("discriminator_loss", d_fake);
  check_probabilities("discriminator_loss", d_real);
  ad::Graph g;
  return discriminator_loss(g.constant(vector_tensor(d_fake)), g.constant(vector_tensor(d_real)))
      .value()
      .item();
}

TrainResult train(const SampleSet& synthetic, const SampleSet& real, const TrainConfig& config,
                  const std::function<void(const LossRecord&)>& on_record) {
  config.validate();
  synthetic.validate();
  real.validate();
  if (!synthetic.patches.front().same_shape(real.patches.front()))
    throw ShapeError("train: synthetic and real patches differ in shape");
  const std::size_t channels = synthetic.patches.front().channels();
  if (config.refiner.channels != channels || config.discriminator.channels != channels)
    throw ShapeError("train: network channel count does not match the data (" +
                     std::to_string(channels) + ")");

  TrainResult result{RefinerNet::initialize(config.refiner, config.seed),
                     DiscriminatorNet::initialize(config.discriminator, config.seed),
                     ad::Optimizer(config.refiner_optimizer),
                     ad::Optimizer(config.discriminator_optimizer),
                     {},
                     {0, {}, derive_rng(config.seed, 0x54), {}}};
  RefinerNet& refiner = result.refiner;
  DiscriminatorNet& disc = result.discriminator;
  TrainState& state = result.state;
  Rng& rng = state.rng;

  const PackedSet xs(synthetic);
  const PackedSet ys(real);
  const std::size_t batch = config.batch_size;
  std::vector<ad::Tensor> pool;

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    ad::Tensor x_batch = xs.gather(draw_indices(rng, xs.size(), batch));
    ad::Tensor y_batch = ys.gather(draw_indices(rng, ys.size(), batch));
    LossRecord record;
    record.step = step;

    for (std::size_t u = 0; u < config.refiner_updates; ++u) {
      if (u > 0) x_batch = xs.gather(draw_indices(rng, xs.size(), batch));
      ad::Graph g;
      const auto rp = refiner.bind(g, true);
      const auto dp = disc.bind(g, false);
      const ad::Var x = g.constant(x_batch);
      const ad::Var refined = refiner.forward(g, rp, x);
      const ad::Var d_fake = disc.forward(g, dp, refined);
      const RefinerLossVars loss =
          refiner_loss(d_fake, refined, x, config.lambda, config.l1_sum);
      record.refiner_loss = loss.total.value().item();
      record.refiner_adversarial = loss.adversarial.value().item();
      record.refiner_identity = loss.identity.value().item();
      if (!std::isfinite(record.refiner_loss))
        throw DivergenceError("training diverged: non-finite refiner loss", step);
      const ad::Gradients grads = g.backward(loss.total);
      step_optimizer(result.refiner_optimizer, refiner.parameters(), grads_of(grads, rp), step);
    }

    for (std::size_t u = 0; u < config.discriminator_updates; ++u) {
      if (u > 0) {
        x_batch = xs.gather(draw_indices(rng, xs.size(), batch));
        y_batch = ys.gather(draw_indices(rng, ys.size(), batch));
      }
      ad::Tensor fake = refiner.forward(x_batch);
      if (config.history_buffer_size > 0)
        fake = query_history(pool, config.history_buffer_size, fake, rng);
      ad::Graph g;
      const auto dp = disc.bind(g, true);
      const ad::Var d_fake = disc.forward(g, dp, g.constant(std::move(fake)));
      const ad::Var d_real = disc.forward(g, dp, g.constant(y_batch));
      const ad::Var loss = discriminator_loss(d_fake, d_real);
      record.discriminator_loss = loss.value().item();
      record.d_fake_mean = mean_of(d_fake.value());
      record.d_real_mean = mean_of(d_real.value());
      if (!std::isfinite(record.discriminator_loss))
        throw DivergenceError("training diverged: non-finite discriminator loss", step);
      const ad::Gradients grads = g.backward(loss);
      step_optimizer(result.discriminator_optimizer, disc.parameters(), grads_of(grads, dp), step);
    }

    state.step = step;
    state.last = record;
    if (step % config.log_every == 0) {
      result.log.push_back(record);
      if (on_record) on_record(record);
    }
  }

  state.history.clear();
  for (const ad::Tensor& t : pool) {
    ad::Tensor sample(ad::Shape{1, xs.sample_shape[0], xs.sample_shape[1], xs.sample_shape[2]},
                      std::vector<double>(t.data().begin(), t.data().end()));
    state.history.push_back(from_batch(sample).front());
  }
  return result;
}

SampleSet refine_dataset(const RefinerNet& refiner, const SampleSet& synthetic, std::size_t chunk) {
  synthetic.validate();
  if (chunk == 0) chunk = 1;
  SampleSet out{SampleRole::refined, {}};
  out.patches.reserve(synthetic.size());
  for (std::size_t begin = 0; begin < synthetic.size(); begin += chunk) {
    const std::size_t count = std::min(chunk, synthetic.size() - begin);
    const ad::Tensor refined =
        refiner.forward(to_batch(std::span(synthetic.patches).subspan(begin, count)));
    for (ImagePatch& p : from_batch(refined)) out.patches.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 1 || k > n)
    throw ContractError("subsample: k=" + std::to_string(k) + " must lie in [1, " +
                        std::to_string(n) + "]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

SampleSet subsample(const SampleSet& real, std::size_t k, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x53);
  SampleSet out{SampleRole::real_subsample, {}};
  for (std::size_t i : sample_without_replacement(real.size(), k, rng))
    out.patches.push_back(real.patches[i]);
  return out;
}

std::string to_json_line(const LossRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["L_R"] = r.refiner_loss;
  j["L_R_adv"] = r.refiner_adversarial;
  j["L_R_id"] = r.refiner_identity;
  j["L_D"] = r.discriminator_loss;
  j["d_fake_mean"] = r.d_fake_mean;
  j["d_real_mean"] = r.d_real_mean;
  return j.dump();
}

}  // namespace satrefine
