#include "satrefine/sample_matrix.hpp"

#include <string>

#include "satrefine/errors.hpp"

namespace satrefine {

SampleMatrix::SampleMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

SampleMatrix::SampleMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("SampleMatrix: " + std::to_string(data_.size()) + " values for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
}

SampleMatrix vstack(std::span<const SampleMatrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t cols = parts.front()->cols();
  std::size_t rows = 0;
  std::vector<float> data;
  for (const SampleMatrix* m : parts) {
    if (m->cols() != cols) throw ShapeError("vstack: column counts differ");
    rows += m->rows();
    data.insert(data.end(), m->data().begin(), m->data().end());
  }
  return SampleMatrix(rows, cols, std::move(data));
}

}  // namespace satrefine
