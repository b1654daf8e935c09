#include <doctest.h>

#include <cmath>

#include "alma/errors.hpp"
#include "alma/optimizer.hpp"

using namespace alma;

TEST_CASE("zero gradient on the first step gives a zero update") {
  RmsPropMomentum opt(4, {});
  const Tensor u = opt.step(Tensor(Shape{4}), 0.5);
  for (double v : u.values()) CHECK(v == 0.0);
  for (double s : opt.square_avg()) CHECK(s == doctest::Approx(0.99));
}

TEST_CASE("first step is bounded by the learning rate") {
  RmsPropMomentum opt(3, {0.0, 0.99, 1e-8});
  const Tensor u = opt.step(Tensor::vector({1, -1, 1}), 0.1);
  const double expect = 0.1 / std::sqrt(0.99 + 0.01 + 1e-8);
  CHECK(u[0] == doctest::Approx(expect).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(-expect).epsilon(1e-15));
}

TEST_CASE("recurrences match a scalar transcription") {
  const OptimizerConstants c{};
  RmsPropMomentum opt(1, c);
  double s = 1.0, m = 0.0;
  const double grads[] = {0.3, -2.0, 5.0, 0.01, -0.7};
  for (double g : grads) {
    s = c.square_decay * s + (1 - c.square_decay) * g * g;
    m = c.momentum * m + g / std::sqrt(s + c.epsilon);
    const Tensor u = opt.step(Tensor::vector({g}), 0.2);
    CHECK(u[0] == doctest::Approx(0.2 * m).epsilon(1e-14));
  }
}

TEST_CASE("coordinates are scaled independently") {
  RmsPropMomentum a(2, {}), b(2, {});
  const double grads[][2] = {{0.5, 1.0}, {-0.2, 0.3}, {0.9, -1.1}};
  for (const auto& g : grads) {
    const Tensor ua = a.step(Tensor::vector({g[0], g[1]}), 0.1);
    const Tensor ub = b.step(Tensor::vector({g[0], 10 * g[1]}), 0.1);
    CHECK(ua[0] == ub[0]);
  }
  CHECK_THROWS_AS(a.step(Tensor::vector({1}), 0.1), ShapeError);
}
