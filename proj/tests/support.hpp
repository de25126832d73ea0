#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "satrefine/autodiff.hpp"
#include "satrefine/random.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("satrefine-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every regular file under `root`, relative path → bytes, sorted by path.
inline std::vector<std::pair<std::string, std::vector<unsigned char>>> tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::vector<unsigned char>>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).string(), slurp(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

inline satrefine::ad::Tensor random_tensor(satrefine::Rng& rng, satrefine::ad::Shape shape,
                                           double lo = -1.0, double hi = 1.0) {
  satrefine::ad::Tensor t(std::move(shape));
  for (double& v : t.data()) v = satrefine::uniform(rng, lo, hi);
  return t;
}

// Central finite differences against reverse mode. The builder maps leaf
// variables (one per input tensor) to a one-element loss.
using Builder = std::function<satrefine::ad::Var(satrefine::ad::Graph&,
                                                 std::span<const satrefine::ad::Var>)>;

struct GradCheck {
  double worst_rel = 0.0;  // over entries whose absolute error exceeds abs_tol
  std::size_t checked = 0;
  std::size_t failures = 0;
};

inline double eval_loss(const Builder& f, const std::vector<satrefine::ad::Tensor>& inputs) {
  satrefine::ad::Graph g;
  std::vector<satrefine::ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return f(g, vars).value().item();
}

inline GradCheck check_gradients(const Builder& f, std::vector<satrefine::ad::Tensor> inputs,
                                 double h = 1e-3, double rel_tol = 1e-4, double abs_tol = 1e-6) {
  satrefine::ad::Graph g;
  std::vector<satrefine::ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  const auto grads = g.backward(f(g, vars));

  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto analytic = grads[vars[k]];
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double up = eval_loss(f, inputs);
      inputs[k][i] = orig - h;
      const double down = eval_loss(f, inputs);
      inputs[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric);
      ++out.checked;
      if (err <= abs_tol) continue;
      const double rel = err / std::max(std::abs(analytic[i]), std::abs(numeric));
      out.worst_rel = std::max(out.worst_rel, rel);
      if (rel >= rel_tol) ++out.failures;
    }
  }
  return out;
}

}  // namespace testing
