#pragma once

#include <array>

#include "alma/tensor.hpp"

namespace alma {

/// CIELAB coordinates under the D65 reference white.
struct LabPixel {
  double L_star = 0.0;
  double a_star = 0.0;
  double b_star = 0.0;
};

/// RGB in [0,1] -> XYZ (fixed sRGB/D65 matrix applied to the raw values, scaled
/// by 100) -> CIELAB. Throws RangeError outside [0,1].
LabPixel rgb_to_lab(double r, double g, double b);

/// Per-pixel conversion of a (3, H, W) image; output channels are (L*, a*, b*).
Tensor rgb_to_lab(const Tensor& rgb);

/// CIEDE2000 colour difference with unit weighting factors (kL = kC = kH = 1).
double ciede2000(const LabPixel& first, const LabPixel& second);

struct PixelDifference {
  double value = 0.0;
  std::array<double, 3> grad_rgb{};  // d(DeltaE00) / d(r, g, b) of the first pixel
};

/// DeltaE00 between an RGB pixel and a fixed reference colour, with the
/// gradient w.r.t. the RGB pixel. Gradient is zero where DeltaE00 is zero.
PixelDifference ciede2000_rgb(const std::array<double, 3>& rgb, const LabPixel& reference);

}  // namespace alma
