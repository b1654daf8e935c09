#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "alma/errors.hpp"
#include "alma/model.hpp"
#include "test_support.hpp"

using namespace alma;

namespace {

Tensor basis(std::size_t K, std::size_t k) {
  Tensor u(Shape{K});
  u[k] = 1.0;
  return u;
}

// Direct convolution written from the definition, used as a forward oracle.
Tensor conv_oracle(const Conv2d& c, const Tensor& in) {
  const std::size_t H = in.shape()[1], W = in.shape()[2];
  const std::size_t OH = (H + 2 * c.padding - c.kernel_h) / c.stride + 1;
  const std::size_t OW = (W + 2 * c.padding - c.kernel_w) / c.stride + 1;
  Tensor out(Shape{c.out_channels, OH, OW});
  for (std::size_t f = 0; f < c.out_channels; ++f) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double s = c.bias[f];
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
              const long iy = static_cast<long>(oy * c.stride + ky) - static_cast<long>(c.padding);
              const long ix = static_cast<long>(ox * c.stride + kx) - static_cast<long>(c.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              s += c.weights[((f * c.in_channels + ch) * c.kernel_h + ky) * c.kernel_w + kx] *
                   in[(ch * H + iy) * W + ix];
            }
          }
        }
        out[(f * OH + oy) * OW + ox] = s;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identity dense layer passes the input through") {
  const Model m = testing::linear_model({1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, 3);
  PropagationCounter c;
  const Tensor x = Tensor::vector({0.25, -1.0, 3.0});
  CHECK(forward(m, x, c) == x);
  CHECK(c.forwards == 1);
  CHECK(c.backwards == 0);
}

TEST_CASE("dense forward equals the matrix product and the gradient its transpose") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Dense d = testing::random_dense(rng, 3, 3);
    const Model m({3}, {d});
    const Tensor x = testing::random_tensor(rng, {3}, -1, 1);
    const Tensor u = testing::random_tensor(rng, {3}, -1, 1);
    PropagationCounter c;
    const Tensor z = forward(m, x, c);
    const Tensor g = input_gradient(m, x, u, c);
    for (std::size_t r = 0; r < 3; ++r) {
      double zr = d.bias[r], gr = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        zr += d.weights[r * 3 + k] * x[k];
        gr += d.weights[k * 3 + r] * u[k];
      }
      CHECK(z[r] == doctest::Approx(zr).epsilon(1e-14));
      CHECK(g[r] == doctest::Approx(gr).epsilon(1e-14));
    }
    CHECK(c.forwards == 2);
    CHECK(c.backwards == 1);
  }
}

TEST_CASE("relu forward and subgradient") {
  const Model m({3}, {ReLU{}});
  PropagationCounter c;
  CHECK(forward(m, Tensor::vector({-1, 0, 2}), c) == Tensor::vector({0, 0, 2}));
  const Tensor g = input_gradient(m, Tensor::vector({-1, 0, 2}), Tensor::vector({5, 5, 5}), c);
  CHECK(g == Tensor::vector({0, 0, 5}));
}

TEST_CASE("convolution forward matches the direct oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = 1 + rng() % 3, F = 1 + rng() % 4, stride = 1 + rng() % 2, pad = rng() % 2;
    Conv2d conv{C, F, 3, 3, stride, pad, std::vector<double>(F * C * 9), std::vector<double>(F)};
    for (auto& w : conv.weights) w = testing::uniform(rng, -1, 1);
    for (auto& b : conv.bias) b = testing::uniform(rng, -1, 1);
    const Tensor x = testing::random_tensor(rng, {C, 6, 5}, 0, 1);
    const Tensor expected = conv_oracle(conv, x);
    const std::size_t flat = expected.size();
    Dense pick{flat, 3, std::vector<double>(3 * flat, 0.0), std::vector<double>(3, 0.0)};
    // The dense head reads three activations, so the logits expose the conv output.
    for (std::size_t r = 0; r < 3; ++r) pick.weights[r * flat + (r * 7) % flat] = 1.0;
    const Model m({C, 6, 5}, {conv, Flatten{}, pick});
    PropagationCounter c;
    const Tensor z = forward(m, x, c);
    for (std::size_t r = 0; r < 3; ++r) CHECK(z[r] == doctest::Approx(expected[(r * 7) % flat]).epsilon(1e-13));
  }
}

TEST_CASE("max pooling breaks ties by first index") {
  const Model m({1, 2, 2}, {MaxPool2d{2, 2}, Flatten{}, Dense{1, 3, {1, 1, 1}, {0, 0, 0}}});
  PropagationCounter c;
  const Tensor x(Shape{1, 2, 2}, std::vector<double>{0.5, 0.5, 0.1, 0.5});
  const Tensor g = input_gradient(m, x, Tensor::vector({1, 0, 0}), c);
  CHECK(g == Tensor(Shape{1, 2, 2}, std::vector<double>{1, 0, 0, 0}));
}

TEST_CASE("input gradients of a 4-8-3 mlp match finite differences") {
  std::mt19937_64 rng(17);
  const Model m({4}, {testing::random_dense(rng, 4, 8), ReLU{}, testing::random_dense(rng, 8, 3)});
  const Tensor x = testing::random_tensor(rng, {4}, -1, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    PropagationCounter c;
    const Tensor g = input_gradient(m, x, basis(3, k), c);
    const Tensor fd = testing::numeric_gradient(
        [&](const Tensor& v) {
          PropagationCounter tmp;
          return forward(m, v, tmp)[k];
        },
        x);
    CHECK(testing::relative_error(g, fd) < 1e-4);
  }
}

TEST_CASE("random models: gradients, linearity and counters") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Model m = testing::random_model(rng, trial % 2 == 1);
    const std::size_t K = m.num_classes();
    const Tensor x = testing::random_tensor(rng, m.input_shape(), 0, 1);
    const Tensor u = testing::random_tensor(rng, {K}, -1, 1);
    const Tensor v = testing::random_tensor(rng, {K}, -1, 1);
    PropagationCounter c;
    const Tensor gu = input_gradient(m, x, u, c);
    const Tensor fd = testing::numeric_gradient(
        [&](const Tensor& p) {
          PropagationCounter tmp;
          const Tensor z = forward(m, p, tmp);
          return dot(z.values(), u.values());
        },
        x);
    CHECK(testing::relative_error(gu, fd) < 1e-4);

    const Tensor gv = input_gradient(m, x, v, c);
    Tensor mix(Shape{K});
    for (std::size_t k = 0; k < K; ++k) mix[k] = 2.5 * u[k] - 0.75 * v[k];
    const Tensor gm = input_gradient(m, x, mix, c);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(gm[i] - (2.5 * gu[i] - 0.75 * gv[i])) < 1e-10);

    const auto fb = forward_backward(m, x, [&](const Tensor&) { return u; }, c);
    CHECK(fb.input_grad == gu);
    CHECK(c.forwards == 4);
    CHECK(c.backwards == 4);
  }
}

TEST_CASE("shape errors") {
  const Model m = testing::linear_model({1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, 3);
  PropagationCounter c;
  CHECK_THROWS_AS(forward(m, Tensor::vector({1, 2}), c), ShapeError);
  CHECK_THROWS_AS(input_gradient(m, Tensor::vector({1, 2, 3}), Tensor::vector({1}), c), ShapeError);
  CHECK(c.forwards == 0);
  CHECK_THROWS_AS(Model({3}, {}), ShapeError);
  CHECK_THROWS_AS(Model({3}, {Dense{3, 2, std::vector<double>(6), std::vector<double>(2)}}), ShapeError);
  CHECK_THROWS_AS(Model({4}, {Dense{3, 3, std::vector<double>(9), std::vector<double>(3)}}), ShapeError);
}

TEST_CASE("serialization round trip is bit exact") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m = testing::random_model(rng, trial % 2 == 0);
    const std::string bytes = serialize_model(m);
    const Model back = parse_model(bytes);
    CHECK(back == m);
    CHECK(serialize_model(back) == bytes);
  }
  const auto dir = std::filesystem::temp_directory_path() / "alma_test_model";
  std::filesystem::create_directories(dir);
  const Model m = testing::random_model(rng, true);
  save_model(m, dir / "m.bin");
  CHECK(load_model(dir / "m.bin") == m);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed files are rejected") {
  std::mt19937_64 rng(31);
  const std::string bytes = serialize_model(testing::random_model(rng, true));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(parse_model(bytes.substr(0, cut)), ParseError);
  }
  CHECK_THROWS_AS(parse_model(bytes + "x"), ParseError);
  CHECK_THROWS_AS(parse_model("NOTAMODEL\n"), ParseError);
  CHECK_THROWS_AS(load_model("/nonexistent/alma/model.bin"), IoError);
  CHECK_THROWS_AS(save_model(testing::random_model(rng, false), "/nonexistent/alma/model.bin"), IoError);
}

TEST_CASE("bundled reference model reproduces its frozen logits") {
  const Model m = load_model(std::filesystem::path(ALMA_DATA_DIR) / "reference_model.bin");
  std::ifstream in(std::filesystem::path(ALMA_DATA_DIR) / "reference_fixture.json");
  const auto fx = nlohmann::json::parse(in);
  const Tensor x(fx["shape"].get<Shape>(), fx["input"].get<std::vector<double>>());
  const auto expected = fx["logits"].get<std::vector<double>>();
  PropagationCounter c;
  const Tensor z = forward(m, x, c);
  REQUIRE(z.size() == expected.size());
  for (std::size_t k = 0; k < z.size(); ++k) CHECK(std::abs(z[k] - expected[k]) <= 1e-12);
  CHECK(m.parameter_count() <= 100000);
}
