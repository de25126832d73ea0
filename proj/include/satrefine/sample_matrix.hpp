#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace satrefine {

/// n×d row-major matrix of float32 feature vectors.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  SampleMatrix(std::size_t rows, std::size_t cols);
  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Stacks rows of several matrices with equal column counts.
SampleMatrix vstack(std::span<const SampleMatrix* const> parts);

}  // namespace satrefine
