#include "alma/distance.hpp"

#include <cmath>
#include <vector>

#include "alma/color.hpp"
#include "alma/errors.hpp"

namespace alma {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 3 || t.shape()[0] != 3) {
    throw UnsupportedShape(std::string(what) + " needs a 3-channel (3,H,W) image, got " + shape_to_string(t.shape()));
  }
}

DistanceEval lp_distance(bool l1, const Tensor& xt, const Tensor& x, bool want_grad) {
  DistanceEval out;
  if (want_grad) out.grad = Tensor(xt.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    const double d = xt[i] - x[i];
    acc += l1 ? std::abs(d) : d * d;
  }
  out.value = l1 ? acc : std::sqrt(acc);
  if (want_grad) {
    for (std::size_t i = 0; i < xt.size(); ++i) {
      const double d = xt[i] - x[i];
      if (l1) {
        out.grad[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      } else {
        out.grad[i] = out.value > 0.0 ? d / out.value : 0.0;
      }
    }
  }
  return out;
}

DistanceEval ciede_distance(const DistanceSpec& spec, const Tensor& xt, const Tensor& x, bool want_grad) {
  require_image(xt, "ciede2000");
  const std::size_t plane = xt.shape()[1] * xt.shape()[2];
  std::vector<double> per_pixel(plane);
  std::vector<std::array<double, 3>> per_grad(want_grad ? plane : 0);
  for (std::size_t p = 0; p < plane; ++p) {
    const LabPixel ref = rgb_to_lab(x[p], x[plane + p], x[2 * plane + p]);
    const std::array<double, 3> rgb{xt[p], xt[plane + p], xt[2 * plane + p]};
    if (want_grad) {
      const auto d = ciede2000_rgb(rgb, ref);
      per_pixel[p] = d.value;
      per_grad[p] = d.grad_rgb;
    } else {
      per_pixel[p] = ciede2000(rgb_to_lab(rgb[0], rgb[1], rgb[2]), ref);
    }
  }

  DistanceEval out;
  double scale_sum = 0.0;
  for (double e : per_pixel) scale_sum += spec.accumulation == CiedeAccumulation::L2 ? e * e : e;
  // Weight applied to each per-pixel gradient.
  std::vector<double> weight(plane, 1.0);
  switch (spec.accumulation) {
    case CiedeAccumulation::Sum:
      out.value = scale_sum;
      break;
    case CiedeAccumulation::Mean:
      out.value = scale_sum / static_cast<double>(plane);
      for (auto& w : weight) w = 1.0 / static_cast<double>(plane);
      break;
    case CiedeAccumulation::L2:
      out.value = std::sqrt(scale_sum);
      for (std::size_t p = 0; p < plane; ++p) weight[p] = out.value > 0.0 ? per_pixel[p] / out.value : 0.0;
      break;
  }
  if (want_grad) {
    out.grad = Tensor(xt.shape());
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c) out.grad[c * plane + p] = weight[p] * per_grad[p][c];
  }
  return out;
}

// Row-normalised 1-D Gaussian operator over n positions, truncated at the borders.
std::vector<double> window_operator(std::size_t n, std::size_t window, double sigma) {
  std::vector<double> A(n * n, 0.0);
  const long half = static_cast<long>(window / 2);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (long k = -half; k <= half; ++k) {
      const long j = static_cast<long>(i) + k;
      if (j < 0 || j >= static_cast<long>(n)) continue;
      const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
      A[i * n + static_cast<std::size_t>(j)] = w;
      total += w;
    }
    for (std::size_t j = 0; j < n; ++j) A[i * n + j] /= total;
  }
  return A;
}

// out = Ah * X * Aw^T   (or the transpose: Ah^T * X * Aw when `transpose`).
void filter_plane(const std::vector<double>& Ah, const std::vector<double>& Aw, std::size_t H, std::size_t W,
                  const double* X, double* out, bool transpose) {
  std::vector<double> tmp(H * W, 0.0);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < W; ++k) s += X[r * W + k] * (transpose ? Aw[k * W + c] : Aw[c * W + k]);
      tmp[r * W + c] = s;
    }
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < H; ++k) s += (transpose ? Ah[k * H + r] : Ah[r * H + k]) * tmp[k * W + c];
      out[r * W + c] = s;
    }
}

struct SsimResult {
  double mean_ssim = 0.0;
  Tensor grad;  // d mean_ssim / d a
};

SsimResult ssim_impl(const DistanceSpec& spec, const Tensor& a, const Tensor& b, bool want_grad) {
  require_image(a, "ssim");
  if (spec.ssim_window == 0 || !(spec.ssim_sigma > 0.0)) throw InvalidArgument("ssim: bad window parameters");
  const std::size_t H = a.shape()[1];
  const std::size_t W = a.shape()[2];
  const std::size_t plane = H * W;
  const auto Ah = window_operator(H, spec.ssim_window, spec.ssim_sigma);
  const auto Aw = window_operator(W, spec.ssim_window, spec.ssim_sigma);

  SsimResult res;
  if (want_grad) res.grad = Tensor(a.shape());
  const double norm = 1.0 / static_cast<double>(3 * plane);
  std::vector<double> aa(plane), bb(plane), ab(plane);
  std::vector<double> mu_a(plane), mu_b(plane), m_aa(plane), m_bb(plane), m_ab(plane);
  std::vector<double> g1(plane), g2(plane), g12(plane), t1(plane), t2(plane), t12(plane);
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double* pa = a.raw() + c * plane;
    const double* pb = b.raw() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      aa[p] = pa[p] * pa[p];
      bb[p] = pb[p] * pb[p];
      ab[p] = pa[p] * pb[p];
    }
    filter_plane(Ah, Aw, H, W, pa, mu_a.data(), false);
    filter_plane(Ah, Aw, H, W, pb, mu_b.data(), false);
    filter_plane(Ah, Aw, H, W, aa.data(), m_aa.data(), false);
    filter_plane(Ah, Aw, H, W, bb.data(), m_bb.data(), false);
    filter_plane(Ah, Aw, H, W, ab.data(), m_ab.data(), false);
    for (std::size_t p = 0; p < plane; ++p) {
      const double ma = mu_a[p];
      const double mb = mu_b[p];
      const double var_a = m_aa[p] - ma * ma;
      const double var_b = m_bb[p] - mb * mb;
      const double cov = m_ab[p] - ma * mb;
      const double A1 = 2.0 * ma * mb + kSsimC1;
      const double A2 = 2.0 * cov + kSsimC2;
      const double B1 = ma * ma + mb * mb + kSsimC1;
      const double B2 = var_a + var_b + kSsimC2;
      const double s = (A1 * A2) / (B1 * B2);
      total += s;
      if (want_grad) {
        // Partials of s w.r.t. the window moments of `a`: mean, E[a^2], E[ab].
        const double dA1 = A2 / (B1 * B2);
        const double dA2 = A1 / (B1 * B2);
        const double dB1 = -s / B1;
        const double dB2 = -s / B2;
        g1[p] = norm * (dA1 * 2.0 * mb + dA2 * (-2.0 * mb) + dB1 * 2.0 * ma + dB2 * (-2.0 * ma));
        g2[p] = norm * dB2;
        g12[p] = norm * dA2 * 2.0;
      }
    }
    if (want_grad) {
      filter_plane(Ah, Aw, H, W, g1.data(), t1.data(), true);
      filter_plane(Ah, Aw, H, W, g2.data(), t2.data(), true);
      filter_plane(Ah, Aw, H, W, g12.data(), t12.data(), true);
      double* out = res.grad.raw() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) out[p] = t1[p] + 2.0 * pa[p] * t2[p] + pb[p] * t12[p];
    }
  }
  res.mean_ssim = total * norm;
  return res;
}

DistanceEval evaluate(const DistanceSpec& spec, const Tensor& xt, const Tensor& x, bool want_grad) {
  require_same_shape(xt, x, "distance");
  switch (spec.kind) {
    case DistanceKind::L1: return lp_distance(true, xt, x, want_grad);
    case DistanceKind::L2: return lp_distance(false, xt, x, want_grad);
    case DistanceKind::Ciede2000: return ciede_distance(spec, xt, x, want_grad);
    case DistanceKind::Ssim: {
      auto r = ssim_impl(spec, xt, x, want_grad);
      DistanceEval out;
      out.value = 1.0 - r.mean_ssim;
      if (want_grad) {
        out.grad = std::move(r.grad);
        for (auto& v : out.grad.values()) v = -v;
      }
      return out;
    }
  }
  throw InvalidArgument("distance: unknown kind");
}

}  // namespace

DistanceSpec parse_distance(std::string_view name) {
  DistanceSpec spec;
  if (name == "l1") spec.kind = DistanceKind::L1;
  else if (name == "l2") spec.kind = DistanceKind::L2;
  else if (name == "ciede2000") spec.kind = DistanceKind::Ciede2000;
  else if (name == "ssim") spec.kind = DistanceKind::Ssim;
  else throw InvalidArgument("unknown distance '" + std::string(name) + "' (expected l1|l2|ciede2000|ssim)");
  return spec;
}

CiedeAccumulation parse_accumulation(std::string_view name) {
  if (name == "sum") return CiedeAccumulation::Sum;
  if (name == "mean") return CiedeAccumulation::Mean;
  if (name == "l2") return CiedeAccumulation::L2;
  throw InvalidArgument("unknown CIEDE2000 accumulation '" + std::string(name) + "' (expected sum|mean|l2)");
}

std::string to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::L1: return "l1";
    case DistanceKind::L2: return "l2";
    case DistanceKind::Ciede2000: return "ciede2000";
    case DistanceKind::Ssim: return "ssim";
  }
  return "?";
}

std::string to_string(CiedeAccumulation acc) {
  switch (acc) {
    case CiedeAccumulation::Sum: return "sum";
    case CiedeAccumulation::Mean: return "mean";
    case CiedeAccumulation::L2: return "l2";
  }
  return "?";
}

DistanceEval distance_value_grad(const DistanceSpec& spec, const Tensor& x_tilde, const Tensor& x) {
  return evaluate(spec, x_tilde, x, true);
}

double distance_value(const DistanceSpec& spec, const Tensor& x_tilde, const Tensor& x) {
  return evaluate(spec, x_tilde, x, false).value;
}

double ssim_index(const DistanceSpec& spec, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  return ssim_impl(spec, a, b, false).mean_ssim;
}

}  // namespace alma
