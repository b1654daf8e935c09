#include "alma/color.hpp"

#include <cmath>
#include <numbers>

#include "alma/autodiff.hpp"
#include "alma/errors.hpp"

namespace alma {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kPow25To7 = 6103515625.0;
constexpr double kZeroChroma = 1e-12;

constexpr double kRgbToXyz[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                    {0.2126729, 0.7151522, 0.0721750},
                                    {0.0193339, 0.1191920, 0.9503041}};
constexpr double kWhite[3] = {95.0489, 100.0, 108.8840};
constexpr double kDelta = 6.0 / 29.0;

inline double value_of(double v) { return v; }
inline double value_of(const ad::Var& v) { return v.value(); }

// Generic over double and ad::Var so the value path and the taped gradient
// path share one definition.
template <class T>
T lab_f(const T& t) {
  using std::cbrt;
  if (value_of(t) > kDelta * kDelta * kDelta) return cbrt(t);
  return t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

template <class T>
std::array<T, 3> lab_from_rgb(const std::array<T, 3>& rgb) {
  std::array<T, 3> f;
  for (int row = 0; row < 3; ++row) {
    T xyz = rgb[0] * kRgbToXyz[row][0] + rgb[1] * kRgbToXyz[row][1] + rgb[2] * kRgbToXyz[row][2];
    f[row] = lab_f(xyz * (100.0 / kWhite[row]));
  }
  return {f[1] * 116.0 - 16.0, (f[0] - f[1]) * 500.0, (f[1] - f[2]) * 200.0};
}

template <class T>
T hue_angle(const T& b, const T& a_prime, const T& c_prime, const T& zero) {
  using std::atan2;
  if (value_of(c_prime) < kZeroChroma) return zero;
  T h = atan2(b, a_prime);
  if (value_of(h) < 0.0) return h + kTwoPi;
  return h;
}

// `zero` is a T holding 0.0 (a tape constant for ad::Var).
template <class T>
T delta_e00(const std::array<T, 3>& lab1, const std::array<T, 3>& lab2, const T& zero) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  const T& L1 = lab1[0];
  const T& a1 = lab1[1];
  const T& b1 = lab1[2];
  const T& L2 = lab2[0];
  const T& a2 = lab2[1];
  const T& b2 = lab2[2];

  T C1 = sqrt(a1 * a1 + b1 * b1);
  T C2 = sqrt(a2 * a2 + b2 * b2);
  T C_bar = (C1 + C2) * 0.5;
  T C_bar7 = C_bar * C_bar * C_bar * C_bar * C_bar * C_bar * C_bar;
  T G = 0.5 * (1.0 - sqrt(C_bar7 / (C_bar7 + kPow25To7)));
  T a1p = (1.0 + G) * a1;
  T a2p = (1.0 + G) * a2;
  T C1p = sqrt(a1p * a1p + b1 * b1);
  T C2p = sqrt(a2p * a2p + b2 * b2);
  T h1p = hue_angle(b1, a1p, C1p, zero);
  T h2p = hue_angle(b2, a2p, C2p, zero);

  const bool achromatic = value_of(C1p) < kZeroChroma || value_of(C2p) < kZeroChroma;

  T dLp = L2 - L1;
  T dCp = C2p - C1p;
  T dhp = zero;
  if (!achromatic) {
    dhp = h2p - h1p;
    if (value_of(dhp) > kPi) {
      dhp = dhp - kTwoPi;
    } else if (value_of(dhp) < -kPi) {
      dhp = dhp + kTwoPi;
    }
  }
  T dHp = zero;
  if (!achromatic) dHp = 2.0 * sqrt(C1p * C2p) * sin(dhp * 0.5);

  T Lp_bar = (L1 + L2) * 0.5;
  T Cp_bar = (C1p + C2p) * 0.5;
  T hp_sum = h1p + h2p;
  T hp_bar = hp_sum;
  if (!achromatic) {
    if (std::abs(value_of(h1p) - value_of(h2p)) <= kPi) {
      hp_bar = hp_sum * 0.5;
    } else if (value_of(hp_sum) < kTwoPi) {
      hp_bar = (hp_sum + kTwoPi) * 0.5;
    } else {
      hp_bar = (hp_sum - kTwoPi) * 0.5;
    }
  }

  T T_ = 1.0 - 0.17 * cos(hp_bar - 30.0 * kDeg) + 0.24 * cos(2.0 * hp_bar) + 0.32 * cos(3.0 * hp_bar + 6.0 * kDeg) -
         0.20 * cos(4.0 * hp_bar - 63.0 * kDeg);
  T hue_arg = (hp_bar - 275.0 * kDeg) / (25.0 * kDeg);
  T d_theta = (30.0 * kDeg) * exp(-(hue_arg * hue_arg));
  T Cp_bar7 = Cp_bar * Cp_bar * Cp_bar * Cp_bar * Cp_bar * Cp_bar * Cp_bar;
  T R_C = 2.0 * sqrt(Cp_bar7 / (Cp_bar7 + kPow25To7));
  T Lm = Lp_bar - 50.0;
  T S_L = 1.0 + 0.015 * (Lm * Lm) / sqrt(20.0 + Lm * Lm);
  T S_C = 1.0 + 0.045 * Cp_bar;
  T S_H = 1.0 + 0.015 * Cp_bar * T_;
  T R_T = -(sin(2.0 * d_theta) * R_C);

  T tL = dLp / S_L;
  T tC = dCp / S_C;
  T tH = dHp / S_H;
  T sum = tL * tL + tC * tC + tH * tH + R_T * tC * tH;
  if (value_of(sum) <= 0.0) return zero;
  return sqrt(sum);
}

void check_unit(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw RangeError("rgb_to_lab: channel value " + std::to_string(v) + " outside [0,1]");
}

}  // namespace

LabPixel rgb_to_lab(double r, double g, double b) {
  check_unit(r);
  check_unit(g);
  check_unit(b);
  const auto lab = lab_from_rgb(std::array<double, 3>{r, g, b});
  return {lab[0], lab[1], lab[2]};
}

Tensor rgb_to_lab(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.shape()[0] != 3) {
    throw ShapeError("rgb_to_lab: expects a (3,H,W) image, got " + shape_to_string(rgb.shape()));
  }
  const std::size_t plane = rgb.shape()[1] * rgb.shape()[2];
  Tensor out(rgb.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    const LabPixel lab = rgb_to_lab(rgb[p], rgb[plane + p], rgb[2 * plane + p]);
    out[p] = lab.L_star;
    out[plane + p] = lab.a_star;
    out[2 * plane + p] = lab.b_star;
  }
  return out;
}

double ciede2000(const LabPixel& first, const LabPixel& second) {
  return delta_e00(std::array<double, 3>{first.L_star, first.a_star, first.b_star},
                   std::array<double, 3>{second.L_star, second.a_star, second.b_star}, 0.0);
}

PixelDifference ciede2000_rgb(const std::array<double, 3>& rgb, const LabPixel& reference) {
  for (double v : rgb) check_unit(v);
  thread_local ad::Tape tape;
  tape.clear();
  std::array<ad::Var, 3> in{tape.variable(rgb[0]), tape.variable(rgb[1]), tape.variable(rgb[2])};
  const auto lab1 = lab_from_rgb(in);
  const std::array<ad::Var, 3> lab2{tape.constant(reference.L_star), tape.constant(reference.a_star),
                                    tape.constant(reference.b_star)};
  const ad::Var zero = tape.constant(0.0);
  const ad::Var de = delta_e00(lab1, lab2, zero);

  PixelDifference out;
  out.value = de.value();
  if (out.value > 0.0) {
    const auto adj = tape.gradient(de);
    for (int c = 0; c < 3; ++c) out.grad_rgb[c] = adj[in[c].index()];
  }
  return out;
}

}  // namespace alma
