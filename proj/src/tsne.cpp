#include "satrefine/tsne.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "satrefine/errors.hpp"
#include "satrefine/parallel.hpp"
#include "satrefine/random.hpp"

namespace satrefine::tsne {

namespace {

constexpr double kPerplexityTolerance = 1e-5;
constexpr int kMaxSearchSteps = 64;

// Fills `p` (length n, p[self] = 0) for precision `beta` and returns 2^H.
double row_distribution(std::span<const double> d, std::size_t self, double d_min, double beta,
                        std::span<double> p) {
  double z = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] = j == self ? 0.0 : std::exp(-beta * (d[j] - d_min));
    z += p[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (j == self) continue;
    p[j] /= z;
    weighted += p[j] * (d[j] - d_min);
  }
  // Entropy in nats; 2^H_bits == e^H_nats.
  return std::exp(std::log(z) + beta * weighted);
}

double calibrate_row(std::span<const double> d, std::size_t self, double target,
                     std::span<double> p, double& beta_out) {
  double d_min = std::numeric_limits<double>::infinity();
  double d_sum = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (j == self) continue;
    d_min = std::min(d_min, d[j]);
    d_sum += d[j];
  }
  const double spread = d_sum / static_cast<double>(d.size() - 1) - d_min;
  double log_beta = spread > 0.0 ? -std::log(spread) : 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double best_err = std::numeric_limits<double>::infinity();
  double best_log_beta = log_beta;
  for (int it = 0; it < kMaxSearchSteps; ++it) {
    const double perp = row_distribution(d, self, d_min, std::exp(log_beta), p);
    const double err = std::abs(perp - target);
    if (err < best_err) {
      best_err = err;
      best_log_beta = log_beta;
    }
    if (err <= kPerplexityTolerance) break;
    // Perplexity falls as precision rises.
    if (perp > target) {
      lo = log_beta;
      log_beta = std::isinf(hi) ? log_beta + 2.0 : 0.5 * (lo + hi);
    } else {
      hi = log_beta;
      log_beta = std::isinf(lo) ? log_beta - 2.0 : 0.5 * (lo + hi);
    }
  }
  beta_out = std::exp(best_log_beta);
  return row_distribution(d, self, d_min, beta_out, p);
}

// Student-t numerators 1/(1+‖yi-yj‖²) for all pairs plus their total.
struct StudentT {
  std::vector<double> num;  // n×n, zero diagonal
  double z = 0.0;
};

StudentT student_t(std::span<const double> y, std::size_t n, std::size_t dims) {
  StudentT out{std::vector<double>(n * n, 0.0), 0.0};
  std::vector<double> row_z(n, 0.0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dims; ++k) {
          const double diff = y[i * dims + k] - y[j * dims + k];
          d2 += diff * diff;
        }
        const double v = 1.0 / (1.0 + d2);
        out.num[i * n + j] = v;
        out.num[j * n + i] = v;
        acc += v;
      }
      row_z[i] = acc;
    }
  });
  for (double v : row_z) out.z += 2.0 * v;
  return out;
}

double kl_from(std::span<const double> p, const StudentT& t, std::size_t n) {
  // KL = Σ p log p - Σ p log(num/Z), over pairs with p > 0.
  std::vector<double> rows(n, 0.0);
  const double log_z = std::log(t.z);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double pij = p[i * n + j];
        if (j == i || pij <= 0.0) continue;
        acc += pij * (std::log(pij) - std::log(t.num[i * n + j]) + log_z);
      }
      rows[i] = acc;
    }
  });
  double kl = 0.0;
  for (double v : rows) kl += v;
  return kl;
}

void gradient_from(std::span<const double> p, double exaggeration, const StudentT& t,
                   std::span<const double> y, std::size_t n, std::size_t dims,
                   std::span<double> grad) {
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(dims);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double num = t.num[i * n + j];
        const double w = (exaggeration * p[i * n + j] - num / t.z) * num;
        for (std::size_t k = 0; k < dims; ++k) acc[k] += w * (y[i * dims + k] - y[j * dims + k]);
      }
      for (std::size_t k = 0; k < dims; ++k) grad[i * dims + k] = 4.0 * acc[k];
    }
  });
}

void check_embedding_args(std::span<const double> p, std::span<const double> y, std::size_t n,
                          std::size_t dims) {
  if (p.size() != n * n || y.size() != n * dims)
    throw ContractError("t-SNE: P must be n×n and y n×dims");
}

}  // namespace

Calibration perplexity_calibrate(std::span<const double> sq_dists, std::size_t n,
                                 double perplexity) {
  if (sq_dists.size() != n * n) throw ContractError("perplexity_calibrate: expected n×n distances");
  if (!(perplexity > 1.0)) throw ContractError("perplexity_calibrate: perplexity must exceed 1");
  if (static_cast<double>(n) <= perplexity)
    throw ContractError("perplexity_calibrate: need more than perplexity (" +
                        std::to_string(perplexity) + ") points, got " + std::to_string(n));
  Calibration out{n, std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0),
                  std::vector<double>(n, 0.0)};
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out.perplexity[i] =
          calibrate_row(sq_dists.subspan(i * n, n), i, perplexity,
                        std::span(out.conditional).subspan(i * n, n), out.beta[i]);
    }
  });
  return out;
}

std::vector<double> symmetrize(const Calibration& c) {
  const std::size_t n = c.n;
  std::vector<double> p(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = (c.conditional[i * n + j] + c.conditional[j * n + i]) * scale;
  return p;
}

double kl_divergence(std::span<const double> p, std::span<const double> y, std::size_t n,
                     std::size_t dims) {
  check_embedding_args(p, y, n, dims);
  return kl_from(p, student_t(y, n, dims), n);
}

std::vector<double> kl_gradient(std::span<const double> p, std::span<const double> y,
                                std::size_t n, std::size_t dims) {
  check_embedding_args(p, y, n, dims);
  std::vector<double> grad(n * dims);
  gradient_from(p, 1.0, student_t(y, n, dims), y, n, dims, grad);
  return grad;
}

std::vector<double> pairwise_sq_dists(const SampleMatrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> d(n * n, 0.0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto a = x.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto b = x.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
          const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
          acc += diff * diff;
        }
        d[i * n + j] = acc;
      }
    }
  });
  return d;
}

SampleMatrix pca_project(const SampleMatrix& x, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  if (k == 0 || static_cast<Eigen::Index>(k) > std::min(n, d))
    throw ContractError("pca_project: k must lie in [1, min(n, d)]");
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      m(i, j) = x.row(static_cast<std::size_t>(i))[static_cast<std::size_t>(j)];
  m.rowwise() -= m.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  // Fix the sign of each component: largest-magnitude entry positive.
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0.0) v.col(c) *= -1.0;
  }
  const Eigen::MatrixXd proj = m * v;
  SampleMatrix out(x.rows(), k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < proj.cols(); ++j)
      out.row(static_cast<std::size_t>(i))[static_cast<std::size_t>(j)] =
          static_cast<float>(proj(i, j));
  return out;
}

Embedding tsne_run(const SampleMatrix& features, std::vector<std::string> labels,
                   const TsneConfig& config, std::optional<std::vector<double>> initial) {
  const std::size_t n = features.rows();
  if (n < 4) throw ContractError("tsne_run: need at least 4 points");
  if (labels.size() != n) throw ContractError("tsne_run: one label per row required");
  if (config.iterations < 1) throw ContractError("tsne_run: iterations must be >= 1");
  if (config.out_dims < 1) throw ContractError("tsne_run: out_dims must be >= 1");
  for (float v : features.data())
    if (!std::isfinite(v)) throw ContractError("tsne_run: non-finite feature value");

  const SampleMatrix reduced = config.pca_dims > 0 && config.pca_dims < features.cols()
                                   ? pca_project(features, config.pca_dims)
                                   : features;
  const std::vector<double> p =
      symmetrize(perplexity_calibrate(pairwise_sq_dists(reduced), n, config.perplexity));

  const std::size_t dims = config.out_dims;
  std::vector<double> y;
  if (initial) {
    if (initial->size() != n * dims) throw ContractError("tsne_run: initial embedding has wrong size");
    y = std::move(*initial);
  } else {
    Rng rng = derive_rng(config.seed, 0x7E);
    y.resize(n * dims);
    for (double& v : y) v = 1e-4 * normal(rng);
  }

  Embedding out;
  out.dims = dims;
  out.labels = std::move(labels);
  out.kl_history.reserve(config.iterations);
  std::vector<double> velocity(n * dims, 0.0);
  std::vector<double> grad(n * dims, 0.0);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double exaggeration =
        it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum =
        it < config.momentum_switch ? config.momentum_initial : config.momentum_final;
    const StudentT t = student_t(y, n, dims);
    out.kl_history.push_back(kl_from(p, t, n));
    gradient_from(p, exaggeration, t, y, n, dims, grad);
    for (std::size_t i = 0; i < y.size(); ++i) {
      velocity[i] = momentum * velocity[i] - config.learning_rate * grad[i];
      y[i] += velocity[i];
    }
    for (std::size_t k = 0; k < dims; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y[i * dims + k];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y[i * dims + k] -= mean;
    }
  }
  for (double v : y)
    if (!std::isfinite(v)) throw ContractError("tsne_run: embedding diverged");
  out.kl_final = kl_divergence(p, y, n, dims);
  out.points = std::move(y);
  return out;
}

std::vector<LabelMean> set_means(const Embedding& e) {
  std::vector<std::string> order;
  for (const std::string& l : e.labels)
    if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
  return set_means(e, order);
}

std::vector<LabelMean> set_means(const Embedding& e, std::span<const std::string> required) {
  if (e.dims != 2) throw ContractError("set_means: embedding must be 2-D");
  std::vector<LabelMean> out;
  for (const std::string& label : required) {
    double sx = 0.0;
    double sy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e.labels[i] != label) continue;
      sx += e.points[2 * i];
      sy += e.points[2 * i + 1];
      ++count;
    }
    if (count == 0) throw ContractError("set_means: label '" + label + "' has no points");
    out.push_back({label, {sx / static_cast<double>(count), sy / static_cast<double>(count)}});
  }
  return out;
}

}  // namespace satrefine::tsne
