#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "alma/tensor.hpp"

namespace alma {

enum class DistanceKind { L1, L2, Ciede2000, Ssim };

/// Image-level reduction of per-pixel CIEDE2000 differences.
enum class CiedeAccumulation { Sum, Mean, L2 };

struct DistanceSpec {
  DistanceKind kind = DistanceKind::L2;
  CiedeAccumulation accumulation = CiedeAccumulation::Sum;
  std::size_t ssim_window = 11;
  double ssim_sigma = 1.5;
};

/// Accepts "l1", "l2", "ciede2000", "ssim".
DistanceSpec parse_distance(std::string_view name);
CiedeAccumulation parse_accumulation(std::string_view name);
std::string to_string(DistanceKind kind);
std::string to_string(CiedeAccumulation acc);

struct DistanceEval {
  double value = 0.0;
  Tensor grad;  // d value / d x_tilde
};

/// D(x_tilde, x) and its gradient w.r.t. x_tilde.
///
/// L1/L2 are plain norms of x_tilde - x (subgradient 0 at zero coordinates / the
/// origin). CIEDE2000 reduces per-pixel DeltaE00 over the image. SSIM returns
/// 1 - mean over channels of the Gaussian-windowed SSIM; windows are truncated at
/// the image border and renormalised.
DistanceEval distance_value_grad(const DistanceSpec& spec, const Tensor& x_tilde, const Tensor& x);

/// Value only (no gradient work).
double distance_value(const DistanceSpec& spec, const Tensor& x_tilde, const Tensor& x);

/// Mean SSIM over channels, exposed for tests and reports.
double ssim_index(const DistanceSpec& spec, const Tensor& a, const Tensor& b);

}  // namespace alma
