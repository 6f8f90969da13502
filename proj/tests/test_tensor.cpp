#include <cmath>

#include "dialbench/errors.hpp"
#include "dialbench/tensor.hpp"
#include "doctest.h"

using namespace dialbench;

TEST_CASE("tensor construction and element access") {
  Tensor m = Tensor::matrix({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.at(0, 1) == 2.0);
  CHECK(m.at(1, 0) == 3.0);
  CHECK(m[3] == 4.0);

  Tensor v = Tensor::vector({5.0, -1.0});
  CHECK(v.rank() == 1);
  CHECK(v.size() == 2);

  Tensor z = Tensor::zeros({3, 4});
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

  Tensor f = Tensor::full({2, 2}, 7.5);
  CHECK(f.at(1, 1) == 7.5);
}

TEST_CASE("tensor equality and shape checks") {
  Tensor a = Tensor::matrix({{1.0, 2.0}});
  Tensor b = Tensor::matrix({{1.0, 2.0}});
  Tensor c = Tensor::vector({1.0, 2.0});
  CHECK(a == b);
  CHECK(a.same_shape(b));
  CHECK_FALSE(a.same_shape(c));  // rank 2 vs rank 1 is a different shape
  CHECK_THROWS_AS(check_same_shape(a, c, "test"), ShapeError);
}

TEST_CASE("tensor finiteness guard") {
  Tensor t = Tensor::vector({1.0, 2.0});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(check_finite(t, "test"), NumericError);
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("tensor fill and mutation through data()") {
  Tensor t = Tensor::zeros({2, 3});
  t.fill(2.0);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 2.0);
  t.data()[0] = -1.0;
  CHECK(t.at(0, 0) == -1.0);
}
