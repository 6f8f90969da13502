#include "dialbench/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace dialbench {

namespace {

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in tensor shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = shape_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  std::size_t n = shape_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  std::vector<int> shape{static_cast<int>(values.size())};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw ShapeError("matrix value count does not match rows*cols");
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(c));
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw ShapeError("matrix row literals differ in length");
    values.insert(values.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(values));
}

int Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw ShapeError("rows() on tensor of rank " + std::to_string(rank()));
}

int Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw ShapeError("cols() on tensor of rank " + std::to_string(rank()));
}

double& Tensor::at(int r, int c) {
  return values_[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return values_[static_cast<std::size_t>(r) * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : values_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite())
    throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace dialbench
