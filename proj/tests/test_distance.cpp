#include <doctest.h>

#include <random>

#include "alma/color.hpp"
#include "alma/distance.hpp"
#include "alma/errors.hpp"
#include "test_support.hpp"

using namespace alma;

namespace {

constexpr DistanceKind kAll[] = {DistanceKind::L1, DistanceKind::L2, DistanceKind::Ciede2000, DistanceKind::Ssim};

DistanceSpec spec_of(DistanceKind k) {
  DistanceSpec s;
  s.kind = k;
  return s;
}

}  // namespace

TEST_CASE("lp examples") {
  Tensor x(Shape{3, 2, 2}, 0.5);
  Tensor xt = x;
  for (std::size_t i : {1, 4, 9}) xt[i] += 0.1;
  xt[4] -= 0.2;  // one coordinate moves down instead
  const auto l1 = distance_value_grad(spec_of(DistanceKind::L1), xt, x);
  CHECK(l1.value == doctest::Approx(0.3).epsilon(1e-14));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = (i == 1 || i == 9) ? 1.0 : (i == 4 ? -1.0 : 0.0);
    CHECK(l1.grad[i] == expect);
  }

  const Tensor a(Shape{1, 1, 2}, std::vector<double>{0.0, 0.0});
  const Tensor b(Shape{1, 1, 2}, std::vector<double>{3.0 / 255, 4.0 / 255});
  CHECK(distance_value(spec_of(DistanceKind::L2), b, a) == doctest::Approx(5.0 / 255).epsilon(1e-15));

  const auto same = distance_value_grad(spec_of(DistanceKind::L2), x, x);
  CHECK(same.value == 0.0);
  for (double g : same.grad.values()) CHECK(g == 0.0);
}

TEST_CASE("identity, nonnegativity, symmetry and range") {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor x = testing::random_tensor(rng, {3, 5, 6}, 0, 1);
    const Tensor y = testing::random_tensor(rng, {3, 5, 6}, 0, 1);
    for (auto k : kAll) {
      const auto s = spec_of(k);
      CHECK(distance_value(s, x, x) == 0.0);
      const double d = distance_value(s, y, x);
      CHECK(d >= 0.0);
      CHECK(std::abs(d - distance_value(s, x, y)) <= 1e-9);
      if (k == DistanceKind::Ssim) {
        CHECK(d <= 2.0);
        CHECK(ssim_index(s, x, x) == doctest::Approx(1.0).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("lp norms are absolutely homogeneous") {
  std::mt19937_64 rng(71);
  const Tensor x(Shape{3, 4, 4}, 0.5);
  Tensor delta = testing::random_tensor(rng, {3, 4, 4}, -0.1, 0.1);
  for (double c : {-3.0, -0.5, 0.25, 2.0}) {
    Tensor a = x, b = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      a[i] += c * delta[i];
      b[i] += delta[i];
    }
    for (auto k : {DistanceKind::L1, DistanceKind::L2}) {
      CHECK(distance_value(spec_of(k), a, x) == doctest::Approx(std::abs(c) * distance_value(spec_of(k), b, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ciede2000 accumulation variants") {
  std::mt19937_64 rng(73);
  const Tensor x = testing::random_tensor(rng, {3, 2, 2}, 0, 1);
  const Tensor y = testing::random_tensor(rng, {3, 2, 2}, 0, 1);
  std::vector<double> per_pixel;
  for (std::size_t p = 0; p < 4; ++p) {
    per_pixel.push_back(ciede2000(rgb_to_lab(y[p], y[4 + p], y[8 + p]), rgb_to_lab(x[p], x[4 + p], x[8 + p])));
  }
  double sum = 0.0, sq = 0.0;
  for (double v : per_pixel) {
    sum += v;
    sq += v * v;
  }
  DistanceSpec s = spec_of(DistanceKind::Ciede2000);
  CHECK(distance_value(s, y, x) == doctest::Approx(sum).epsilon(1e-12));
  s.accumulation = CiedeAccumulation::Mean;
  CHECK(distance_value(s, y, x) == doctest::Approx(sum / 4).epsilon(1e-12));
  s.accumulation = CiedeAccumulation::L2;
  CHECK(distance_value(s, y, x) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
}

TEST_CASE("perceptual distances need three-channel images") {
  for (auto k : {DistanceKind::Ciede2000, DistanceKind::Ssim}) {
    CHECK_THROWS_AS(distance_value(spec_of(k), Tensor(Shape{1, 4, 4}), Tensor(Shape{1, 4, 4})), UnsupportedShape);
    CHECK_THROWS_AS(distance_value(spec_of(k), Tensor(Shape{12}), Tensor(Shape{12})), UnsupportedShape);
  }
  CHECK_THROWS_AS(distance_value(spec_of(DistanceKind::L2), Tensor(Shape{3}), Tensor(Shape{4})), ShapeError);
  CHECK_THROWS_AS(parse_distance("linf"), InvalidArgument);
  CHECK(parse_distance("ciede2000").kind == DistanceKind::Ciede2000);
}

TEST_CASE("gradients match central differences at random points") {
  std::mt19937_64 rng(79);
  for (auto k : kAll) {
    const auto s = spec_of(k);
    for (int trial = 0; trial < 25; ++trial) {
      const Tensor x = testing::random_tensor(rng, {3, 4, 5}, 0.1, 0.9);
      Tensor xt = x;
      for (auto& v : xt.values()) v += testing::uniform(rng, -0.08, 0.08);
      const auto eval = distance_value_grad(s, xt, x);
      CHECK(eval.value == doctest::Approx(distance_value(s, xt, x)).epsilon(1e-12));
      const Tensor fd = testing::numeric_gradient([&](const Tensor& v) { return distance_value(s, v, x); }, xt);
      CHECK(testing::relative_error(eval.grad, fd) < 1e-4);
    }
  }
}
