#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "dialbench/errors.hpp"

namespace dialbench {

/// Dense row-major tensor of doubles. Rank 1 and 2 are what the library
/// actually uses; the shape is kept as a vector so checkpoints stay generic.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  /// Row-literal form; rows must be rectangular.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return values_.size(); }

  int rows() const;
  int cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(int r, int c);
  double at(int r, int c) const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {}

  std::vector<int> shape_;
  std::vector<double> values_;
};

/// Throws ShapeError unless a and b have identical shapes.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Throws NumericError if t contains NaN or Inf.
void check_finite(const Tensor& t, const char* what);

}  // namespace dialbench
