#include "satrefine/nets.hpp"

#include <cmath>
#include <map>
#include <set>

#include "binary_io.hpp"
#include "satrefine/errors.hpp"
#include "satrefine/random.hpp"

namespace satrefine {

namespace {

ConvLayer make_layer(std::string name, std::size_t in, std::size_t out, std::size_t k,
                     ad::Conv2dAttrs attrs) {
  return {std::move(name), ad::Tensor({out, in, k, k}), ad::Tensor({out}), attrs};
}

void init_uniform(ConvLayer& layer, Rng& rng) {
  const std::size_t fan_in = layer.weight.dim(1) * layer.weight.dim(2) * layer.weight.dim(3);
  const float s = 1.0f / std::sqrt(static_cast<float>(fan_in));
  for (double& w : layer.weight.data()) w = uniform_f32(rng, -s, s);
  for (double& b : layer.bias.data()) b = uniform_f32(rng, -s, s);
}

std::vector<ad::Tensor*> collect(std::vector<ConvLayer>& layers) {
  std::vector<ad::Tensor*> out;
  for (ConvLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> collect_named(
    const std::vector<ConvLayer>& layers) {
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  for (const ConvLayer& l : layers) {
    out.emplace_back(l.name + ".weight", &l.weight);
    out.emplace_back(l.name + ".bias", &l.bias);
  }
  return out;
}

std::vector<ad::Var> bind_layers(const std::vector<ConvLayer>& layers, ad::Graph& graph,
                                 bool trainable) {
  std::vector<ad::Var> out;
  for (const ConvLayer& l : layers) {
    out.push_back(trainable ? graph.parameter(l.weight) : graph.constant(l.weight));
    out.push_back(trainable ? graph.parameter(l.bias) : graph.constant(l.bias));
  }
  return out;
}

ad::Var apply(const std::vector<ConvLayer>& layers, std::span<const ad::Var> params,
              std::size_t index, ad::Var x) {
  return ad::conv2d(x, params[2 * index], params[2 * index + 1], layers[index].attrs);
}

void check_input(const char* who, const ad::Tensor& x, std::size_t channels) {
  if (x.rank() != 4 || x.dim(1) != channels)
    throw ShapeError(std::string(who) + ": expected NCHW input with " +
                     std::to_string(channels) + " channels, got " + ad::to_string(x.shape()));
}

void check_param_count(const char* who, std::span<const ad::Var> params, std::size_t layers) {
  if (params.size() != 2 * layers)
    throw ContractError(std::string(who) + ": expected " + std::to_string(2 * layers) +
                        " bound parameters, got " + std::to_string(params.size()));
}

}  // namespace

RefinerNet::RefinerNet(const RefinerConfig& config) : config_(config) {
  if (config.blocks < 1) throw ContractError("refiner: at least one residual block required");
  if (config.channels < 1 || config.width < 1) throw ContractError("refiner: empty layer width");
  const ad::Conv2dAttrs same{1, 1};
  layers_.push_back(make_layer("entry", config.channels, config.width, 3, same));
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    layers_.push_back(make_layer(prefix + ".conv1", config.width, config.width, 3, same));
    layers_.push_back(make_layer(prefix + ".conv2", config.width, config.width, 3, same));
  }
  layers_.push_back(make_layer("exit", config.width, config.channels, 3, same));
}

RefinerNet RefinerNet::initialize(const RefinerConfig& config, std::uint64_t seed) {
  RefinerNet net(config);
  Rng rng = derive_rng(seed, 0x52);
  for (std::size_t i = 0; i + 1 < net.layers_.size(); ++i) init_uniform(net.layers_[i], rng);
  return net;
}

std::vector<ad::Tensor*> RefinerNet::parameters() { return collect(layers_); }

std::vector<std::pair<std::string, const ad::Tensor*>> RefinerNet::named_parameters() const {
  return collect_named(layers_);
}

std::vector<ad::Var> RefinerNet::bind(ad::Graph& graph, bool trainable) const {
  return bind_layers(layers_, graph, trainable);
}

ad::Var RefinerNet::forward(ad::Graph& graph, std::span<const ad::Var> params, ad::Var x) const {
  (void)graph;
  check_input("refiner", x.value(), config_.channels);
  check_param_count("refiner", params, layers_.size());
  const double slope = config_.slope;
  ad::Var h = ad::leaky_relu(apply(layers_, params, 0, x), slope);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    ad::Var t = ad::leaky_relu(apply(layers_, params, 1 + 2 * b, h), slope);
    t = apply(layers_, params, 2 + 2 * b, t);
    h = ad::leaky_relu(ad::add(h, t), slope);
  }
  ad::Var trunk = apply(layers_, params, layers_.size() - 1, h);
  return ad::clamp01(ad::add(x, trunk));
}

ad::Tensor RefinerNet::forward(const ad::Tensor& x) const {
  ad::Graph graph;
  const auto params = bind(graph, false);
  return forward(graph, params, graph.constant(x)).value();
}

DiscriminatorNet::DiscriminatorNet(const DiscriminatorConfig& config) : config_(config) {
  if (config.layers < 1) throw ContractError("discriminator: at least one layer required");
  if (config.channels < 1 || config.width < 1)
    throw ContractError("discriminator: empty layer width");
  std::size_t in = config.channels;
  for (std::size_t i = 0; i + 1 < config.layers; ++i) {
    const std::size_t out = config.width << i;
    layers_.push_back(make_layer("conv" + std::to_string(i), in, out, 4, {2, 1}));
    in = out;
  }
  layers_.push_back(
      make_layer("conv" + std::to_string(config.layers - 1), in, 1, 3, {1, 1}));
}

DiscriminatorNet DiscriminatorNet::initialize(const DiscriminatorConfig& config,
                                              std::uint64_t seed) {
  DiscriminatorNet net(config);
  Rng rng = derive_rng(seed, 0x44);
  for (ConvLayer& l : net.layers_) init_uniform(l, rng);
  return net;
}

std::vector<ad::Tensor*> DiscriminatorNet::parameters() { return collect(layers_); }

std::vector<std::pair<std::string, const ad::Tensor*>> DiscriminatorNet::named_parameters()
    const {
  return collect_named(layers_);
}

std::vector<ad::Var> DiscriminatorNet::bind(ad::Graph& graph, bool trainable) const {
  return bind_layers(layers_, graph, trainable);
}

ad::Var DiscriminatorNet::logits(ad::Graph& graph, std::span<const ad::Var> params,
                                 ad::Var x) const {
  (void)graph;
  check_input("discriminator", x.value(), config_.channels);
  check_param_count("discriminator", params, layers_.size());
  ad::Var h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
    h = ad::leaky_relu(apply(layers_, params, i, h), config_.slope);
  return apply(layers_, params, layers_.size() - 1, h);
}

ad::Var DiscriminatorNet::forward(ad::Graph& graph, std::span<const ad::Var> params,
                                  ad::Var x) const {
  return ad::sigmoid(ad::mean(logits(graph, params, x), ad::Reduce::per_sample));
}

ad::Tensor DiscriminatorNet::forward(const ad::Tensor& x) const {
  ad::Graph graph;
  const auto params = bind(graph, false);
  return forward(graph, params, graph.constant(x)).value();
}

ad::Tensor to_batch(std::span<const ImagePatch> patches) {
  if (patches.empty()) throw ContractError("to_batch: no patches");
  const ImagePatch& first = patches.front();
  const std::size_t c = first.channels();
  const std::size_t h = first.height();
  const std::size_t w = first.width();
  ad::Tensor out({patches.size(), c, h, w});
  for (std::size_t n = 0; n < patches.size(); ++n) {
    const ImagePatch& p = patches[n];
    if (!p.same_shape(first)) throw ShapeError("to_batch: patches differ in shape");
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          out[((n * c + ch) * h + y) * w + x] = p.at(x, y, ch);
  }
  return out;
}

ad::Tensor to_batch(const ImagePatch& patch) { return to_batch(std::span(&patch, 1)); }

std::vector<ImagePatch> from_batch(const ad::Tensor& batch) {
  if (batch.rank() != 4) throw ShapeError("from_batch: expected NCHW, got " + ad::to_string(batch.shape()));
  const std::size_t n = batch.dim(0);
  const std::size_t c = batch.dim(1);
  const std::size_t h = batch.dim(2);
  const std::size_t w = batch.dim(3);
  std::vector<ImagePatch> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> px(h * w * c);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double v = batch[((i * c + ch) * h + y) * w + x];
          px[(y * w + x) * c + ch] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    out.emplace_back(w, h, c, std::move(px));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr std::string_view kCheckpointMagic = "SRCK";

[[noreturn]] void corrupt(const std::string& what) {
  throw CheckpointError(CheckpointError::Kind::corrupt, "corrupt checkpoint: " + what);
}

const std::string kRefinerPrefix = "refiner.";
const std::string kDiscriminatorPrefix = "discriminator.";

void append_optimizer(std::vector<NamedTensor>& out, const std::string& role,
                      const ad::Optimizer& opt,
                      const std::vector<std::pair<std::string, const ad::Tensor*>>& named) {
  out.push_back({"optim." + role + ".step",
                 ad::Tensor({1}, {static_cast<double>(opt.step_count())})});
  const auto& m = opt.first_moments();
  const auto& v = opt.second_moments();
  for (std::size_t i = 0; i < m.size() && i < named.size(); ++i) {
    out.push_back({"optim." + role + ".m." + named[i].first, m[i]});
    out.push_back({"optim." + role + ".v." + named[i].first, v[i]});
  }
}

template <class Net>
void fill_net(Net& net, const std::string& prefix, std::map<std::string, ad::Tensor>& tensors) {
  auto named = net.named_parameters();
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string key = prefix + named[i].first;
    auto it = tensors.find(key);
    if (it == tensors.end())
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "checkpoint is missing tensor " + key);
    if (it->second.shape() != params[i]->shape())
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "tensor " + key + " has shape " + ad::to_string(it->second.shape()) +
                                ", architecture expects " + ad::to_string(params[i]->shape()));
    *params[i] = std::move(it->second);
    tensors.erase(it);
  }
}

std::optional<OptimizerState> take_optimizer(
    const std::string& role, const std::vector<std::pair<std::string, const ad::Tensor*>>& named,
    std::map<std::string, ad::Tensor>& tensors) {
  auto step = tensors.find("optim." + role + ".step");
  if (step == tensors.end()) return std::nullopt;
  OptimizerState state;
  state.step_count = static_cast<std::size_t>(step->second.item());
  tensors.erase(step);
  for (const auto& [name, param] : named) {
    auto m = tensors.find("optim." + role + ".m." + name);
    auto v = tensors.find("optim." + role + ".v." + name);
    if (m == tensors.end() || v == tensors.end()) continue;
    if (m->second.shape() != param->shape() || v->second.shape() != param->shape())
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "optimizer moments for " + name + " do not match the parameter");
    state.first.push_back(std::move(m->second));
    state.second.push_back(std::move(v->second));
    tensors.erase(m);
    tensors.erase(v);
  }
  if (!state.first.empty() && state.first.size() != named.size())
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "optimizer state for " + role + " is incomplete");
  return state;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.tensor.rank()));
    for (std::size_t d : t.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.tensor.data()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, [] { corrupt("unexpected end of data"); });
  if (bytes.size() < 4 || r.bytes(4) != kCheckpointMagic)
    throw CheckpointError(CheckpointError::Kind::bad_magic, "not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::bad_version,
                          "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > r.remaining()) corrupt("name length exceeds file");
    NamedTensor t;
    t.name = r.bytes(name_len);
    if (!seen.insert(t.name).second) corrupt("duplicate tensor name " + t.name);
    const std::uint32_t ndim = r.u32();
    if (ndim > r.remaining() / 4) corrupt("rank exceeds file");
    ad::Shape shape(ndim);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      numel *= d;
      if (numel > r.remaining()) corrupt("tensor " + t.name + " exceeds file");
    }
    if (numel * 4 > r.remaining()) corrupt("tensor " + t.name + " is truncated");
    std::vector<double> data(numel);
    for (double& v : data) v = r.f32();
    t.tensor = ad::Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) corrupt("trailing bytes after last tensor");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const RefinerNet& refiner,
                     const DiscriminatorNet& discriminator,
                     const ad::Optimizer* refiner_optimizer,
                     const ad::Optimizer* discriminator_optimizer) {
  std::vector<NamedTensor> tensors;
  const auto rnamed = refiner.named_parameters();
  const auto dnamed = discriminator.named_parameters();
  for (const auto& [name, t] : rnamed) tensors.push_back({kRefinerPrefix + name, *t});
  for (const auto& [name, t] : dnamed) tensors.push_back({kDiscriminatorPrefix + name, *t});
  if (refiner_optimizer) append_optimizer(tensors, "refiner", *refiner_optimizer, rnamed);
  if (discriminator_optimizer)
    append_optimizer(tensors, "discriminator", *discriminator_optimizer, dnamed);
  detail::write_file(path, encode_checkpoint(tensors));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path,
                                const RefinerConfig& refiner_config,
                                const DiscriminatorConfig& discriminator_config) {
  const auto bytes = detail::read_file(path);
  std::map<std::string, ad::Tensor> tensors;
  for (NamedTensor& t : decode_checkpoint(bytes)) tensors.emplace(t.name, std::move(t.tensor));

  ModelCheckpoint out{RefinerNet(refiner_config), DiscriminatorNet(discriminator_config),
                      std::nullopt, std::nullopt};
  fill_net(out.refiner, kRefinerPrefix, tensors);
  fill_net(out.discriminator, kDiscriminatorPrefix, tensors);
  out.refiner_optimizer = take_optimizer("refiner", out.refiner.named_parameters(), tensors);
  out.discriminator_optimizer =
      take_optimizer("discriminator", out.discriminator.named_parameters(), tensors);
  if (!tensors.empty())
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          "checkpoint has tensor " + tensors.begin()->first +
                              " not present in the declared architecture");
  return out;
}

}  // namespace satrefine
