#include <doctest.h>

#include <cmath>

#include "alma/errors.hpp"
#include "alma/tensor.hpp"

using namespace alma;

TEST_CASE("shape bookkeeping") {
  Tensor t({2, 3, 4}, 1.5);
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  CHECK(t[23] == 1.5);
  CHECK(shape_to_string(t.shape()) == "(2,3,4)");
  CHECK(shape_size({}) == 0);
  CHECK(t.reshaped({24}).shape() == Shape{24});
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("construction validates dimensions and data length") {
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor v = Tensor::vector({1.0, 2.0, 2.0});
  CHECK(v.shape() == Shape{3});
  CHECK(l2_norm(v.values()) == 3.0);
  CHECK(dot(v.values(), v.values()) == 9.0);
}

TEST_CASE("finiteness, clamping and shape checks") {
  Tensor t = Tensor::vector({-1.0, 0.5, 2.0});
  CHECK(t.all_finite());
  clamp_inplace(t, 0.0, 1.0);
  CHECK(t == Tensor::vector({0.0, 0.5, 1.0}));
  t[1] = INFINITY;
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(require_same_shape(t, Tensor({2}), "test"), ShapeError);
  CHECK_NOTHROW(require_same_shape(t, Tensor({3}), "test"));
}
