#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace monostage {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Stack of square C×C slices, one per step. Used for pairwise scores and
/// pairwise marginals: entry (t, i, j) is the transition i -> j between
/// frames t and t+1.
class SliceStack {
 public:
  SliceStack() = default;
  SliceStack(std::size_t steps, std::size_t classes, double fill = 0.0)
      : steps_(steps), classes_(classes), data_(steps * classes * classes, fill) {}

  std::size_t steps() const { return steps_; }
  std::size_t classes() const { return classes_; }

  double& operator()(std::size_t t, std::size_t i, std::size_t j) {
    assert(t < steps_ && i < classes_ && j < classes_);
    return data_[(t * classes_ + i) * classes_ + j];
  }
  double operator()(std::size_t t, std::size_t i, std::size_t j) const {
    assert(t < steps_ && i < classes_ && j < classes_);
    return data_[(t * classes_ + i) * classes_ + j];
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const SliceStack&, const SliceStack&) = default;

 private:
  std::size_t steps_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> data_;
};

}  // namespace monostage
