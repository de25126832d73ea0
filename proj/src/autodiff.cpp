#include "satrefine/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "satrefine/errors.hpp"

namespace satrefine::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Graph& graph_of(Var a) {
  if (a.graph() == nullptr) throw ContractError("op applied to an unbound Var");
  return *a.graph();
}

Graph& graph_of(Var a, Var b) {
  if (a.graph() != b.graph())
    throw ContractError("op inputs belong to different graphs");
  return graph_of(a);
}

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

// Broadcast role of the two operands of an element-wise op.
enum class Broadcast { none, rhs_scalar, lhs_scalar };

Broadcast broadcast_mode(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.numel() == 1) return Broadcast::rhs_scalar;
  if (a.numel() == 1) return Broadcast::lhs_scalar;
  shape_error(kind, "shape mismatch " + to_string(a.shape()) + " vs " +
                        to_string(b.shape()));
}

template <class Fwd, class DA, class DB>
Var binary(OpKind kind, Var a, Var b, Fwd fwd, DA dfa, DB dfb) {
  Graph& g = graph_of(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  const Broadcast mode = broadcast_mode(kind, ta, tb);
  const Shape& out_shape = mode == Broadcast::lhs_scalar ? tb.shape() : ta.shape();
  Tensor out(out_shape);
  const std::size_t n = out.numel();
  const auto ia = [mode](std::size_t i) { return mode == Broadcast::lhs_scalar ? 0 : i; };
  const auto ib = [mode](std::size_t i) { return mode == Broadcast::rhs_scalar ? 0 : i; };
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ta[ia(i)], tb[ib(i)]);

  const Var inputs[] = {a, b};
  return g.record(kind, std::move(out), inputs, [=](const Graph::BackwardArgs& args) {
    const Tensor& x = *args.inputs[0];
    const Tensor& y = *args.inputs[1];
    for (std::size_t i = 0; i < args.grad_out.numel(); ++i) {
      const double go = args.grad_out[i];
      const double xa = x[ia(i)];
      const double yb = y[ib(i)];
      if (args.input_grads[0]) (*args.input_grads[0])[ia(i)] += go * dfa(xa, yb);
      if (args.input_grads[1]) (*args.input_grads[1])[ib(i)] += go * dfb(xa, yb);
    }
  });
}

template <class Fwd, class Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(x);
  const Tensor& tx = x.value();
  Tensor out(tx.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(tx[i]);
  const Var inputs[] = {x};
  return g.record(kind, std::move(out), inputs, [=](const Graph::BackwardArgs& args) {
    if (!args.input_grads[0]) return;
    const Tensor& in = *args.inputs[0];
    Tensor& gin = *args.input_grads[0];
    for (std::size_t i = 0; i < in.numel(); ++i)
      gin[i] += args.grad_out[i] * deriv(in[i], args.out[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

struct ConvGeometry {
  std::size_t n, c, h, w;       // input
  std::size_t o, kh, kw;        // kernel
  std::size_t oh, ow;           // output
  std::size_t stride, padding;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, Conv2dAttrs attrs) {
  if (x.rank() != 4) shape_error(OpKind::conv2d, "input must be NCHW, got " + to_string(x.shape()));
  if (w.rank() != 4) shape_error(OpKind::conv2d, "weight must be OIHW, got " + to_string(w.shape()));
  if (x.dim(1) != w.dim(1))
    shape_error(OpKind::conv2d, "input channels " + std::to_string(x.dim(1)) +
                                    " != weight channels " + std::to_string(w.dim(1)));
  if (attrs.stride == 0) shape_error(OpKind::conv2d, "stride must be >= 1");
  const std::size_t ph = x.dim(2) + 2 * attrs.padding;
  const std::size_t pw = x.dim(3) + 2 * attrs.padding;
  if (w.dim(2) > ph || w.dim(3) > pw)
    shape_error(OpKind::conv2d, "kernel " + to_string(w.shape()) +
                                    " does not fit padded input " + to_string(x.shape()));
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3),
          w.dim(0), w.dim(2), w.dim(3),
          (ph - w.dim(2)) / attrs.stride + 1, (pw - w.dim(3)) / attrs.stride + 1,
          attrs.stride, attrs.padding};
}

// Unfolds sample `n` into a [C·KH·KW, OH·OW] row-major matrix.
void im2col(const ConvGeometry& g, const double* in, double* cols) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.positions();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] =
                inside ? in[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                            static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* in_grad) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.positions();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            in_grad[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                    static_cast<std::size_t>(ix)] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

Var conv2d_impl(Var input, Var weight, const Var* bias, Conv2dAttrs attrs) {
  Graph& g = graph_of(input, weight);
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const ConvGeometry geo = conv_geometry(x, w, attrs);
  if (bias) {
    if (bias->graph() != &g) throw ContractError("conv2d: bias belongs to another graph");
    const Tensor& b = bias->value();
    if (b.numel() != geo.o)
      shape_error(OpKind::conv2d, "bias " + to_string(b.shape()) + " does not match " +
                                      std::to_string(geo.o) + " output channels");
  }

  Tensor out({geo.n, geo.o, geo.oh, geo.ow});
  std::vector<double> cols(geo.patch() * geo.positions());
  const ConstMapMat wm(w.data().data(), static_cast<Eigen::Index>(geo.o),
                       static_cast<Eigen::Index>(geo.patch()));
  for (std::size_t n = 0; n < geo.n; ++n) {
    im2col(geo, x.data().data() + n * geo.c * geo.h * geo.w, cols.data());
    const ConstMapMat cm(cols.data(), static_cast<Eigen::Index>(geo.patch()),
                         static_cast<Eigen::Index>(geo.positions()));
    MapMat om(out.data().data() + n * geo.o * geo.positions(),
              static_cast<Eigen::Index>(geo.o), static_cast<Eigen::Index>(geo.positions()));
    om.noalias() = wm * cm;
    if (bias) {
      const Tensor& b = bias->value();
      for (std::size_t o = 0; o < geo.o; ++o) om.row(static_cast<Eigen::Index>(o)).array() += b[o];
    }
  }

  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  return g.record(OpKind::conv2d, std::move(out), inputs, [geo](const Graph::BackwardArgs& args) {
    const Tensor& xin = *args.inputs[0];
    const Tensor& wt = *args.inputs[1];
    Tensor* gx = args.input_grads[0];
    Tensor* gw = args.input_grads[1];
    Tensor* gb = args.input_grads.size() > 2 ? args.input_grads[2] : nullptr;
    const auto rows = static_cast<Eigen::Index>(geo.patch());
    const auto pos = static_cast<Eigen::Index>(geo.positions());
    const auto outc = static_cast<Eigen::Index>(geo.o);
    const ConstMapMat wm(wt.data().data(), outc, rows);
    std::vector<double> cols(geo.patch() * geo.positions());
    for (std::size_t n = 0; n < geo.n; ++n) {
      const ConstMapMat gom(args.grad_out.data().data() + n * geo.o * geo.positions(), outc, pos);
      if (gb) {
        for (std::size_t o = 0; o < geo.o; ++o) (*gb)[o] += gom.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (gw) {
        im2col(geo, xin.data().data() + n * geo.c * geo.h * geo.w, cols.data());
        const ConstMapMat cm(cols.data(), rows, pos);
        MapMat gwm(gw->data().data(), outc, rows);
        gwm.noalias() += gom * cm.transpose();
      }
      if (gx) {
        MapMat dcols(cols.data(), rows, pos);
        dcols.noalias() = wm.transpose() * gom;
        col2im_add(geo, cols.data(), gx->data().data() + n * geo.c * geo.h * geo.w);
      }
    }
  });
}

Var reduce_impl(OpKind kind, Var x, Reduce reduce) {
  Graph& g = graph_of(x);
  const Tensor& t = x.value();
  if (t.numel() == 0) shape_error(kind, "cannot reduce an empty tensor");
  const bool per_sample = reduce == Reduce::per_sample;
  if (per_sample && t.rank() == 0) shape_error(kind, "per-sample reduction of a rank-0 tensor");
  const std::size_t groups = per_sample ? t.dim(0) : 1;
  const std::size_t group_size = t.numel() / groups;
  const double scale = kind == OpKind::mean ? 1.0 / static_cast<double>(group_size) : 1.0;

  Tensor out = per_sample ? Tensor(Shape{groups}) : Tensor::scalar(0.0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < group_size; ++i) acc += t[gi * group_size + i];
    out[gi] = acc * scale;
  }
  const Var inputs[] = {x};
  return g.record(kind, std::move(out), inputs,
                  [groups, group_size, scale](const Graph::BackwardArgs& args) {
                    if (!args.input_grads[0]) return;
                    Tensor& gin = *args.input_grads[0];
                    for (std::size_t gi = 0; gi < groups; ++gi) {
                      const double go = args.grad_out[gi] * scale;
                      for (std::size_t i = 0; i < group_size; ++i) gin[gi * group_size + i] += go;
                    }
                  });
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_))
    throw ShapeError("Tensor: " + std::to_string(data_.size()) +
                     " values for shape " + to_string(shape_));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

double Tensor::item() const {
  if (data_.size() != 1)
    throw ShapeError("Tensor::item on shape " + to_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::log: return "log";
    case OpKind::abs: return "abs";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::pad: return "pad";
    case OpKind::clamp01: return "clamp01";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (graph_ == nullptr) throw ContractError("Var is not bound to a graph");
  return graph_->value(id_);
}

const Tensor& Gradients::operator[](Var v) const {
  if (v.id() >= grads_.size() || !available_[v.id()])
    throw ContractError("no gradient recorded for node " + std::to_string(v.id()));
  return grads_[v.id()];
}

Var Graph::leaf(Tensor value, bool is_parameter) {
  Node node;
  node.kind = OpKind::leaf;
  node.value = std::move(value);
  node.requires_grad = is_parameter;
  node.is_parameter = is_parameter;
  nodes_.push_back(std::move(node));
  Var v(this, nodes_.size() - 1);
  if (is_parameter) parameters_.push_back(v);
  return v;
}

Var Graph::constant(Tensor value) { return leaf(std::move(value), false); }

Var Graph::parameter(Tensor value) { return leaf(std::move(value), true); }

Var Graph::record(OpKind kind, Tensor value, std::span<const Var> inputs,
                  BackwardFn backward) {
  Node node;
  node.kind = kind;
  node.value = std::move(value);
  node.backward = std::move(backward);
  for (const Var& in : inputs) {
    if (in.graph() != this) throw ContractError("op input belongs to another graph");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(Var loss) const {
  if (loss.graph() != this) throw ContractError("backward: loss belongs to another graph");
  if (nodes_[loss.id()].value.numel() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        to_string(nodes_[loss.id()].value.shape()));

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.available_.assign(nodes_.size(), false);
  out.grads_[loss.id()] = Tensor(nodes_[loss.id()].value.shape(), 1.0);
  out.available_[loss.id()] = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!out.available_[id] || !node.requires_grad || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].requires_grad) {
        if (!out.available_[in]) {
          out.grads_[in] = Tensor(nodes_[in].value.shape(), 0.0);
          out.available_[in] = true;
        }
        in_grads.push_back(&out.grads_[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward({out.grads_[id], node.value, in_values, in_grads});
  }

  for (const Var& p : parameters_) {
    if (!out.available_[p.id()]) {
      out.grads_[p.id()] = Tensor(nodes_[p.id()].value.shape(), 0.0);
      out.available_[p.id()] = true;
    }
  }
  return out;
}

Var add(Var a, Var b) {
  return binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var add(Var a, double b) { return add(a, graph_of(a).constant(Tensor::scalar(b))); }

Var sub(double a, Var b) { return sub(graph_of(b).constant(Tensor::scalar(a)), b); }

Var mul(Var a, double b) { return mul(a, graph_of(a).constant(Tensor::scalar(b))); }

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2)
    shape_error(OpKind::matmul, "operands must be rank 2, got " + to_string(ta.shape()) +
                                    " and " + to_string(tb.shape()));
  if (ta.dim(1) != tb.dim(0))
    shape_error(OpKind::matmul, "inner dimensions differ: " + to_string(ta.shape()) +
                                    " x " + to_string(tb.shape()));
  const auto m = static_cast<Eigen::Index>(ta.dim(0));
  const auto k = static_cast<Eigen::Index>(ta.dim(1));
  const auto n = static_cast<Eigen::Index>(tb.dim(1));
  Tensor out({ta.dim(0), tb.dim(1)});
  MapMat(out.data().data(), m, n).noalias() =
      ConstMapMat(ta.data().data(), m, k) * ConstMapMat(tb.data().data(), k, n);

  const Var inputs[] = {a, b};
  return g.record(OpKind::matmul, std::move(out), inputs, [m, k, n](const Graph::BackwardArgs& args) {
    const ConstMapMat go(args.grad_out.data().data(), m, n);
    if (args.input_grads[0]) {
      MapMat(args.input_grads[0]->data().data(), m, k).noalias() +=
          go * ConstMapMat(args.inputs[1]->data().data(), k, n).transpose();
    }
    if (args.input_grads[1]) {
      MapMat(args.input_grads[1]->data().data(), k, n).noalias() +=
          ConstMapMat(args.inputs[0]->data().data(), m, k).transpose() * go;
    }
  });
}

Var conv2d(Var input, Var weight, Conv2dAttrs attrs) {
  return conv2d_impl(input, weight, nullptr, attrs);
}

Var conv2d(Var input, Var weight, Var bias, Conv2dAttrs attrs) {
  return conv2d_impl(input, weight, &bias, attrs);
}

Var leaky_relu(Var x, double slope) {
  return unary(
      OpKind::leaky_relu, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::sigmoid, x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return unary(
      OpKind::tanh, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var log(Var x) {
  return unary(
      OpKind::log, x, [](double v) { return std::log(std::max(v, kLogFloor)); },
      [](double v, double) { return v > kLogFloor ? 1.0 / v : 0.0; });
}

Var abs(Var x) {
  return unary(
      OpKind::abs, x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var sum(Var x, Reduce reduce) { return reduce_impl(OpKind::sum, x, reduce); }

Var mean(Var x, Reduce reduce) { return reduce_impl(OpKind::mean, x, reduce); }

Var pad(Var x, std::size_t amount) {
  Graph& g = graph_of(x);
  const Tensor& t = x.value();
  if (t.rank() != 4) shape_error(OpKind::pad, "input must be NCHW, got " + to_string(t.shape()));
  const std::size_t planes = t.dim(0) * t.dim(1);
  const std::size_t h = t.dim(2);
  const std::size_t w = t.dim(3);
  const std::size_t ph = h + 2 * amount;
  const std::size_t pw = w + 2 * amount;
  Tensor out({t.dim(0), t.dim(1), ph, pw});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(p * ph + y + amount) * pw + xx + amount] = t[(p * h + y) * w + xx];

  const Var inputs[] = {x};
  return g.record(OpKind::pad, std::move(out), inputs,
                  [=](const Graph::BackwardArgs& args) {
                    if (!args.input_grads[0]) return;
                    Tensor& gin = *args.input_grads[0];
                    for (std::size_t p = 0; p < planes; ++p)
                      for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t xx = 0; xx < w; ++xx)
                          gin[(p * h + y) * w + xx] +=
                              args.grad_out[(p * ph + y + amount) * pw + xx + amount];
                  });
}

Var clamp01(Var x) {
  return unary(
      OpKind::clamp01, x, [](double v) { return std::clamp(v, 0.0, 1.0); },
      [](double v, double) { return v > 0.0 && v < 1.0 ? 1.0 : 0.0; });
}

Var forward_op(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  const auto need = [&](std::size_t lo, std::size_t hi) {
    if (inputs.size() < lo || inputs.size() > hi)
      throw ContractError(std::string(op_name(kind)) + ": wrong number of inputs (" +
                          std::to_string(inputs.size()) + ")");
  };
  switch (kind) {
    case OpKind::add: need(2, 2); return add(inputs[0], inputs[1]);
    case OpKind::sub: need(2, 2); return sub(inputs[0], inputs[1]);
    case OpKind::mul: need(2, 2); return mul(inputs[0], inputs[1]);
    case OpKind::matmul: need(2, 2); return matmul(inputs[0], inputs[1]);
    case OpKind::conv2d:
      need(2, 3);
      return inputs.size() == 3 ? conv2d(inputs[0], inputs[1], inputs[2], attrs.conv)
                                : conv2d(inputs[0], inputs[1], attrs.conv);
    case OpKind::leaky_relu: need(1, 1); return leaky_relu(inputs[0], attrs.slope);
    case OpKind::sigmoid: need(1, 1); return sigmoid(inputs[0]);
    case OpKind::tanh: need(1, 1); return tanh(inputs[0]);
    case OpKind::log: need(1, 1); return log(inputs[0]);
    case OpKind::abs: need(1, 1); return abs(inputs[0]);
    case OpKind::sum: need(1, 1); return sum(inputs[0], attrs.reduce);
    case OpKind::mean: need(1, 1); return mean(inputs[0], attrs.reduce);
    case OpKind::pad: need(1, 1); return pad(inputs[0], attrs.pad);
    case OpKind::clamp01: need(1, 1); return clamp01(inputs[0]);
    case OpKind::leaf: break;
  }
  throw ContractError("forward_op: leaf is not an op");
}

}  // namespace satrefine::ad
