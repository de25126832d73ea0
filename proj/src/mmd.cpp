#include "satrefine/mmd.hpp"

#include <Eigen/Core>
#include <cmath>

#include "satrefine/errors.hpp"
#include "satrefine/parallel.hpp"

namespace satrefine {

namespace {

// exp(-a) is exactly zero in double beyond this.
constexpr double kUnderflowArg = 746.0;

// Precomputed 1/(2σ²) per bandwidth.
class MixtureEvaluator {
 public:
  explicit MixtureEvaluator(const KernelSpec& spec) {
    spec.validate();
    for (double s : spec.sigmas) inv_two_sigma_sq_.push_back(1.0 / (2.0 * s * s));
  }

  double operator()(double sq_dist) const {
    double total = 0.0;
    for (double c : inv_two_sigma_sq_) {
      const double a = sq_dist * c;
      if (a < kUnderflowArg) total += std::exp(-a);
    }
    return total;
  }

  const std::vector<double>& coefficients() const { return inv_two_sigma_sq_; }

 private:
  std::vector<double> inv_two_sigma_sq_;
};

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

void check_inputs(const char* who, const SampleMatrix& x, const SampleMatrix& y) {
  if (x.rows() < 2 || y.rows() < 2)
    throw ContractError(std::string(who) + ": need at least 2 samples per set (got " +
                        std::to_string(x.rows()) + ", " + std::to_string(y.rows()) + ")");
  if (x.cols() != y.cols())
    throw ContractError(std::string(who) + ": dimension mismatch " + std::to_string(x.cols()) +
                        " vs " + std::to_string(y.cols()));
}

// Row sums of a kernel matrix. For the symmetric case (b == nullptr) the
// diagonal is excluded and each pair is evaluated once; for the cross case
// both row and column sums are produced. Work is split into fixed blocks of
// rows whose partial column sums are reduced in block order, so results do
// not depend on the thread count.
struct KernelSums {
  std::vector<double> row;
  std::vector<double> col;
};

KernelSums kernel_sums(const SampleMatrix& a, const SampleMatrix* b, const MixtureEvaluator& k) {
  constexpr std::size_t kBlock = 256;
  const bool symmetric = b == nullptr;
  const SampleMatrix& other = symmetric ? a : *b;
  const std::size_t n = a.rows();
  const std::size_t m = other.rows();
  const std::size_t dims = a.cols();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;

  // Column-major copy so one row's distances to every sample vectorize.
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dims));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t d = 0; d < dims; ++d)
      cols(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)) = other.row(j)[d];

  std::vector<double> row(n, 0.0);
  std::vector<std::vector<double>> col_parts(blocks);
  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    Eigen::ArrayXd dist, v;
    for (std::size_t blk = begin; blk < end; ++blk) {
      std::vector<double>& col = col_parts[blk];
      col.assign(m, 0.0);
      Eigen::Map<Eigen::ArrayXd> col_sums(col.data(), static_cast<Eigen::Index>(m));
      const std::size_t lo = blk * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto j0 = static_cast<Eigen::Index>(symmetric ? i + 1 : 0);
        const auto len = static_cast<Eigen::Index>(m) - j0;
        if (len <= 0) continue;
        const auto xi = a.row(i);
        dist.setZero(len);
        for (std::size_t d = 0; d < dims; ++d)
          dist += (cols.col(static_cast<Eigen::Index>(d)).segment(j0, len).array() -
                   static_cast<double>(xi[d]))
                      .square();
        const double nearest = dist.minCoeff();
        v.setZero(len);
        for (double c : k.coefficients())
          if (nearest * c < kUnderflowArg) v += (-c * dist).exp();
        row[i] = v.sum();
        col_sums.segment(j0, len) += v;
      }
    }
  });

  KernelSums out{std::move(row), std::vector<double>(m, 0.0)};
  for (const auto& part : col_parts)
    for (std::size_t j = 0; j < m; ++j) out.col[j] += part[j];
  if (symmetric) {
    for (std::size_t i = 0; i < n; ++i) out.row[i] += out.col[i];
    out.col.clear();
  }
  return out;
}

double total(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

MMDEstimate finish(Estimator kind, double mmd2, double std_error, std::size_t pairs,
                   const KernelSpec& spec) {
  MMDEstimate e;
  e.kind = kind;
  e.mmd2 = mmd2;
  e.mmd = std::sqrt(std::max(0.0, mmd2));
  e.std_error = std_error;
  e.pairs_used = pairs;
  e.kernel = spec;
  return e;
}

}  // namespace

void KernelSpec::validate() const {
  if (sigmas.empty()) throw ContractError("kernel spec has no bandwidths");
  for (double s : sigmas)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ContractError("kernel bandwidths must be positive and finite");
}

KernelSpec default_kernel_spec() {
  KernelSpec spec;
  for (int j = 0; j < 16; ++j) spec.sigmas.push_back(std::pow(10.0, -6.0 + 12.0 * j / 15.0));
  return spec;
}

double rbf_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (x.size() != y.size())
    throw ContractError("rbf_kernel: dimension mismatch " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  if (!(sigma > 0.0)) throw ContractError("rbf_kernel: sigma must be > 0");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

double mixture_kernel(std::span<const double> x, std::span<const double> y,
                      const KernelSpec& spec) {
  spec.validate();
  double out = 0.0;
  for (double s : spec.sigmas) out += rbf_kernel(x, y, s);
  return out;
}

const char* estimator_name(Estimator e) {
  return e == Estimator::quadratic_unbiased ? "quadratic-unbiased" : "linear-unbiased";
}

MMDEstimate mmd2_quadratic_unbiased(const SampleMatrix& x, const SampleMatrix& y,
                                    const KernelSpec& spec) {
  check_inputs("mmd2_quadratic_unbiased", x, y);
  const MixtureEvaluator k(spec);
  const auto n = static_cast<double>(x.rows());
  const auto m = static_cast<double>(y.rows());

  const KernelSums sxx = kernel_sums(x, nullptr, k);
  const KernelSums syy = kernel_sums(y, nullptr, k);
  const KernelSums sxy = kernel_sums(x, &y, k);
  const double kxx = total(sxx.row);
  const double kyy = total(syy.row);
  const double kxy = total(sxy.row);

  const double mmd2 = kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m);

  // Delete-one jackknife per sample, grouped by set.
  double variance = 0.0;
  if (x.rows() >= 3) {
    std::vector<double> loo(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      loo[i] = (kxx - 2.0 * sxx.row[i]) / ((n - 1.0) * (n - 2.0)) + kyy / (m * (m - 1.0)) -
               2.0 * (kxy - sxy.row[i]) / ((n - 1.0) * m);
    }
    const double mean = total(loo) / n;
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    variance += (n - 1.0) / n * ss;
  }
  if (y.rows() >= 3) {
    std::vector<double> loo(y.rows());
    for (std::size_t j = 0; j < y.rows(); ++j) {
      loo[j] = kxx / (n * (n - 1.0)) + (kyy - 2.0 * syy.row[j]) / ((m - 1.0) * (m - 2.0)) -
               2.0 * (kxy - sxy.col[j]) / (n * (m - 1.0));
    }
    const double mean = total(loo) / m;
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    variance += (m - 1.0) / m * ss;
  }

  const std::size_t pairs = x.rows() * (x.rows() - 1) / 2 + y.rows() * (y.rows() - 1) / 2 +
                            x.rows() * y.rows();
  return finish(Estimator::quadratic_unbiased, mmd2, std::sqrt(variance), pairs, spec);
}

MMDEstimate mmd2_linear(const SampleMatrix& x, const SampleMatrix& y, const KernelSpec& spec) {
  check_inputs("mmd2_linear", x, y);
  const MixtureEvaluator k(spec);
  const std::size_t half = std::min(x.rows(), y.rows()) / 2;

  std::vector<double> h(half);
  parallel_for(half, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto x1 = x.row(2 * i);
      const auto x2 = x.row(2 * i + 1);
      const auto y1 = y.row(2 * i);
      const auto y2 = y.row(2 * i + 1);
      // Grouped so that swapping the two sets is bit-exact.
      h[i] = (k(sq_dist(x1, x2)) + k(sq_dist(y1, y2))) -
             (k(sq_dist(x1, y2)) + k(sq_dist(x2, y1)));
    }
  });

  const double count = static_cast<double>(half);
  const double mean = total(h) / count;
  double std_error = 0.0;
  if (half >= 2) {
    double ss = 0.0;
    for (double v : h) ss += (v - mean) * (v - mean);
    std_error = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
  }
  return finish(Estimator::linear_unbiased, mean, std_error, half, spec);
}

}  // namespace satrefine
